"""System parameters, geometry, and channel sampling.

The scene is a roadside unit (RSU) served by two backscatter sensors that
modulate a carrier emitted by a dedicated carrier emitter (CE).  Each
sensor k sees a forward link CE->sensor over distance d_f[k] and a
backscatter link sensor->RSU over distance d_b[k].  Path loss acts on the
channel amplitude as d^-alpha, so the forward *power* gain scales as
d^-2alpha while the composite two-hop large-scale factor is
d_k = d_f^-alpha * d_b^-alpha; the composite fading power is modeled with
variance d_k directly.  Channel estimation is imperfect: a fraction rho of
the composite variance is estimation error (sigma2_e = rho * d_k of the
far sensor, one scalar for both links) and the rest is the estimate
(sigma2_hat[k] = (1 - rho) * d_k[k]).

All powers are in watts, distances in meters, times are slot fractions
with T_t + T_h = 1 per sensor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "SystemParams",
    "Topology",
    "ScenarioChannel",
    "dbm_to_watt",
    "watt_to_dbm",
    "place_sensors_bpp",
    "sample_channels",
    "estimate_csi",
    "incident_power",
    "harvested_power",
]


def dbm_to_watt(p_dbm: float) -> float:
    """Convert a power level from dBm to watts."""
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def watt_to_dbm(p_w: float) -> float:
    """Convert a power level from watts to dBm (p_w must be positive)."""
    if p_w <= 0.0:
        raise ValueError("power must be positive to express in dBm")
    return 10.0 * math.log10(p_w) + 30.0


@dataclass(frozen=True)
class SystemParams:
    """Static system parameters with defaults from the reference setup.

    bw_hz is retained for absolute-throughput reporting only; rates are
    computed per-Hz (bandwidth factored out), so EE is in bits/Hz/J.
    """

    bw_hz: float = 1e6                      # carrier bandwidth
    sigma2_n_w: float = dbm_to_watt(-114.0)  # RSU noise power
    p_max_w: float = dbm_to_watt(40.0)       # CE transmit power cap
    xi: float = 0.6                          # energy-harvesting efficiency
    kappa: tuple[float, float] = (0.9, 0.9)  # CE power-amplifier efficiency per sensor
    p_c_ce_w: float = 0.1                    # CE circuit power
    p_c_rsu_w: float = 1.0                   # RSU circuit power
    p_c_rs_w: float = dbm_to_watt(-35.0)     # sensor circuit power
    r_min: float = 0.5                       # QoS rate floor, bits/s/Hz
    alpha: float = 4.0                       # path-loss exponent
    rho: float = 0.005                       # relative channel-estimation error
    t_t: tuple[float, float] = (0.5, 0.5)    # backscatter (transmission) slot fraction
    t_h: tuple[float, float] = (0.5, 0.5)    # harvesting slot fraction
    gamma_init: tuple[float, float] = (0.5, 0.5)  # stage-1 reflection coefficients
    theta: float | None = None               # reflection-sum target; None = sum(gamma_init)
    p_gap_w: float | None = None             # SIC power gap; None = 10 * sigma2_n_w
    nu: float = 0.01                         # initial SIC back-off
    step_sizes: tuple[float, float, float, float, float] = (1e-2, 1e6, 1e6, 1e6, 1e6)
    i_max: int = 50                          # max outer iterations
    delta_max: float = 1e-3                  # Dinkelbach residual tolerance

    def __post_init__(self):
        if self.bw_hz <= 0:
            raise ValueError("bw_hz must be positive")
        if self.sigma2_n_w <= 0:
            raise ValueError("sigma2_n_w must be positive")
        if self.p_max_w <= 0:
            raise ValueError("p_max_w must be positive")
        if not 0 < self.xi <= 1:
            raise ValueError("xi must lie in (0, 1]")
        if len(self.kappa) != 2 or any(not 0 < k <= 1 for k in self.kappa):
            raise ValueError("kappa entries must lie in (0, 1]")
        if self.p_c_ce_w < 0 or self.p_c_rsu_w < 0 or self.p_c_rs_w < 0:
            raise ValueError("circuit powers must be non-negative")
        if self.r_min <= 0:
            raise ValueError("r_min must be positive")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if not 0 <= self.rho < 1:
            raise ValueError("rho must lie in [0, 1)")
        for k in range(2):
            if self.t_t[k] <= 0 or self.t_h[k] < 0:
                raise ValueError("slot fractions must be positive (t_t) / non-negative (t_h)")
            if abs(self.t_t[k] + self.t_h[k] - 1.0) > 1e-9:
                raise ValueError("t_t[k] + t_h[k] must equal 1")
        if any(not 0 < g <= 1 for g in self.gamma_init):
            raise ValueError("gamma_init entries must lie in (0, 1]")
        if self.theta is not None and self.theta <= 0:
            raise ValueError("theta must be positive when given")
        if self.p_gap_w is not None and self.p_gap_w <= 0:
            raise ValueError("p_gap_w must be positive when given")
        if not 0 < self.nu < 1:
            raise ValueError("nu must lie in (0, 1)")
        if len(self.step_sizes) != 5 or any(s <= 0 for s in self.step_sizes):
            raise ValueError("step_sizes must be five positive values")
        if self.i_max < 1:
            raise ValueError("i_max must be at least 1")
        if self.delta_max <= 0:
            raise ValueError("delta_max must be positive")

    @property
    def p_gap(self) -> float:
        """SIC power gap in watts (default ten times the noise power)."""
        return self.p_gap_w if self.p_gap_w is not None else 10.0 * self.sigma2_n_w

    @property
    def theta_value(self) -> float:
        """Reflection-sum target used by the interference freeze."""
        return self.theta if self.theta is not None else sum(self.gamma_init)


@dataclass(frozen=True)
class Topology:
    """Sensor geometry: CE->sensor and sensor->RSU distances in meters.

    Optional Cartesian positions (CE at origin) are kept when the layout
    was sampled; distances always remain the source of truth.
    """

    d_f: np.ndarray
    d_b: np.ndarray
    sensor_xy: np.ndarray | None = None
    rsu_xy: tuple[float, float] | None = None

    def __post_init__(self):
        d_f = np.asarray(self.d_f, dtype=float)
        d_b = np.asarray(self.d_b, dtype=float)
        object.__setattr__(self, "d_f", d_f)
        object.__setattr__(self, "d_b", d_b)
        if d_f.shape != d_b.shape or d_f.ndim != 1:
            raise ValueError("d_f and d_b must be 1-D arrays of equal length")
        if np.any(d_f <= 0) or np.any(d_b <= 0):
            raise ValueError("distances must be positive")
        if self.sensor_xy is not None:
            xy = np.asarray(self.sensor_xy, dtype=float)
            object.__setattr__(self, "sensor_xy", xy)
            # positions, when present, must agree with the stored distances
            if not np.allclose(np.hypot(xy[:, 0], xy[:, 1]), d_f, rtol=1e-9):
                raise ValueError("sensor positions inconsistent with d_f")
            if self.rsu_xy is not None:
                rx, ry = self.rsu_xy
                if not np.allclose(np.hypot(xy[:, 0] - rx, xy[:, 1] - ry), d_b, rtol=1e-9):
                    raise ValueError("sensor positions inconsistent with d_b")

    @property
    def n_sensors(self) -> int:
        return self.d_f.shape[0]


@dataclass(frozen=True)
class ScenarioChannel:
    """One fading realization, optionally with estimated CSI filled in.

    h_f, h_b   unit-variance complex fading per hop
    g_f        true forward power gain d_f^-2alpha * |h_f|^2 (drives harvesting)
    d_k        composite large-scale factor d_f^-alpha * d_b^-alpha
    g_hat      |estimated composite channel|^2, ascending (sensor 2 strongest)
    sigma2_e   scalar error variance rho * min(d_k) used in the SINRs
    sigma2_e_k per-sensor error variances rho * d_k[k]
    sigma2_hat per-sensor estimate variances (1 - rho) * d_k[k]
    """

    h_f: np.ndarray
    h_b: np.ndarray
    g_f: np.ndarray
    d_k: np.ndarray
    g_hat: np.ndarray | None = None
    sigma2_e: float | None = None
    sigma2_e_k: np.ndarray | None = None
    sigma2_hat: np.ndarray | None = None
    seed: int | None = None

    @property
    def n_sensors(self) -> int:
        return self.d_k.shape[0]

    def require_estimated(self) -> "ScenarioChannel":
        if self.g_hat is None:
            raise ValueError("channel has no estimated CSI; call estimate_csi first")
        return self


def place_sensors_bpp(
    n: int,
    radius_m: float,
    seed: int,
    rsu_xy: tuple[float, float] = (40.0, 0.0),
) -> Topology:
    """Drop n sensors uniformly in a disc of given radius around the CE.

    A binomial point process: n points i.i.d. uniform over the disc (CE at
    the origin), so the mean CE->sensor distance is 2R/3.  d_b is the
    Euclidean distance to the fixed RSU position.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if radius_m <= 0:
        raise ValueError("radius_m must be positive")
    rng = np.random.default_rng(seed)
    # uniform over the disc: r = R * sqrt(u) gives the area-uniform radius
    r = radius_m * np.sqrt(rng.random(n))
    phi = 2.0 * np.pi * rng.random(n)
    xy = np.column_stack((r * np.cos(phi), r * np.sin(phi)))
    d_f = np.hypot(xy[:, 0], xy[:, 1])
    d_b = np.hypot(xy[:, 0] - rsu_xy[0], xy[:, 1] - rsu_xy[1])
    return Topology(d_f=d_f, d_b=d_b, sensor_xy=xy, rsu_xy=rsu_xy)


def sample_channels(topology: Topology, params: SystemParams, seed: int) -> ScenarioChannel:
    """Draw one Rayleigh fading realization for every sensor.

    h_f and h_b are unit-variance circularly-symmetric complex Gaussians.
    The same seed always reproduces the same realization bit for bit.
    """
    n = topology.n_sensors
    rng = np.random.default_rng(seed)
    h_f = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2.0)
    h_b = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2.0)
    a = params.alpha
    g_f = topology.d_f ** (-2.0 * a) * np.abs(h_f) ** 2
    d_k = topology.d_f ** (-a) * topology.d_b ** (-a)
    return ScenarioChannel(h_f=h_f, h_b=h_b, g_f=g_f, d_k=d_k, seed=seed)


def estimate_csi(channel: ScenarioChannel, params: SystemParams) -> ScenarioChannel:
    """Split the composite channel into estimate and error, and order sensors.

    The estimated composite power gain is derived from the sampled cascade
    fading, g_hat[k] = (1 - rho) * d_k[k] * |h_f[k] * h_b[k]|^2, so its mean
    matches the estimate variance (1 - rho) * d_k[k] and the operation is a
    pure function of the channel (idempotent).  Sensors are relabeled in
    ascending g_hat so index 2 is the stronger (decoded-first) link; exact
    ties keep the original order.  sigma2_e is the single scalar used by the
    SINRs: rho times the far sensor's d_k (the smallest composite gain).
    """
    rho = params.rho
    if not 0 <= rho < 1:
        raise ValueError("rho must lie in [0, 1)")
    g_hat = (1.0 - rho) * channel.d_k * np.abs(channel.h_f * channel.h_b) ** 2
    order = np.argsort(g_hat, kind="stable")
    d_k = channel.d_k[order]
    return replace(
        channel,
        h_f=channel.h_f[order],
        h_b=channel.h_b[order],
        g_f=channel.g_f[order],
        d_k=d_k,
        g_hat=g_hat[order],
        sigma2_e=float(rho * np.min(d_k)),
        sigma2_e_k=rho * d_k,
        sigma2_hat=(1.0 - rho) * d_k,
    )


def incident_power(p_ce_w: float, g_f: float) -> float:
    """RF power arriving at a sensor: P^I = P_ce * g_f."""
    if p_ce_w < 0:
        raise ValueError("p_ce_w must be non-negative")
    return p_ce_w * g_f


def harvested_power(p_i_w: float, gamma: float, params: SystemParams, k: int) -> tuple[float, float]:
    """Energy harvested by sensor k in each slot of one unit frame.

    During backscatter the sensor reflects a fraction gamma and harvests
    from the rest: P^Ht = xi * (1 - gamma) * P^I * T_t.  During the
    harvesting slot everything is harvested: P^Hh = xi * P^I * T_h.
    Returns (transmission-mode, harvesting-mode) harvests in watts.
    """
    if not 0 < gamma <= 1:
        raise ValueError("gamma must lie in (0, 1]")
    if p_i_w < 0:
        raise ValueError("p_i_w must be non-negative")
    p_ht = params.xi * (1.0 - gamma) * p_i_w * params.t_t[k]
    p_hh = params.xi * p_i_w * params.t_h[k]
    return p_ht, p_hh
