"""Uplink NOMA rates, the logarithmic lower bound, and energy efficiency.

Both sensors backscatter simultaneously; the RSU decodes the stronger
sensor (index 2) first, treating the weaker one as interference, then
subtracts it, so with estimation-error power sigma2_e the SINRs are

    gamma_1 = P * G1 * ghat_1 / (sigma2_e * P * (G1 + G2) + sigma2_n)
    gamma_2 = P * G2 * ghat_2 / (P * G1 * ghat_1
                                 + sigma2_e * P * (G1 + G2) + sigma2_n)

with G_k the reflection coefficients.  Rates are per-Hz:
R = sum_k T_t,k * log2(1 + gamma_k).  The non-concave log2(1 + z) is
handled through the classic lower bound

    Pi * log2(z) + Phi <= log2(1 + z),
    Pi = z0 / (1 + z0),  Phi = log2(1 + z0) - Pi * log2(z0),

tight at the anchor z = z0.  Total consumed power charges the CE power
through each sensor's amplifier efficiency for the full frame plus the CE
and RSU circuit powers, so EE = rate / power is in bits/Hz/J.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import ScenarioChannel, SystemParams

__all__ = [
    "ApproxCoeffs",
    "RateReport",
    "sinr_pair",
    "sum_rate_exact",
    "approx_coeffs",
    "sum_rate_approx",
    "total_power",
    "energy_efficiency",
    "rate_report",
]


@dataclass(frozen=True)
class ApproxCoeffs:
    """Per-sensor bound coefficients (Pi, Phi) and the anchors they tighten at."""

    pi: np.ndarray
    phi: np.ndarray
    anchor: np.ndarray

    def __post_init__(self):
        if np.any(self.anchor <= 0):
            raise ValueError("anchors must be positive")
        if np.any(self.pi <= 0) or np.any(self.pi >= 1):
            raise ValueError("pi must lie in (0, 1)")


def sinr_pair(
    p_ce_w: float,
    gammas: tuple[float, float],
    channel: ScenarioChannel,
    params: SystemParams,
) -> tuple[float, float]:
    """Post-SIC SINRs of the weak (1) and strong (2) sensor at power p_ce_w."""
    channel.require_estimated()
    if p_ce_w <= 0:
        raise ValueError("p_ce_w must be positive")
    g1, g2 = gammas
    ghat = channel.g_hat
    err = channel.sigma2_e * p_ce_w * (g1 + g2) + params.sigma2_n_w
    sinr1 = p_ce_w * g1 * ghat[0] / err
    sinr2 = p_ce_w * g2 * ghat[1] / (p_ce_w * g1 * ghat[0] + err)
    return float(sinr1), float(sinr2)


def sum_rate_exact(sinrs, params: SystemParams) -> float:
    """Exact per-Hz sum rate sum_k T_t,k * log2(1 + sinr_k)."""
    s = np.asarray(sinrs, dtype=float)
    if np.any(s < 0):
        raise ValueError("SINRs must be non-negative")
    t_t = np.asarray(params.t_t)
    return float(np.sum(t_t * np.log2(1.0 + s)))


def approx_coeffs(anchor) -> ApproxCoeffs:
    """Tighten the logarithmic lower bound at the given SINR anchors."""
    z0 = np.asarray(anchor, dtype=float)
    if np.any(z0 <= 0):
        raise ValueError("anchor SINRs must be positive")
    pi = z0 / (1.0 + z0)
    phi = np.log2(1.0 + z0) - pi * np.log2(z0)
    return ApproxCoeffs(pi=pi, phi=phi, anchor=z0)


def sum_rate_approx(sinrs, coeffs: ApproxCoeffs, params: SystemParams) -> float:
    """Lower-bound per-Hz sum rate sum_k T_t,k * (Pi_k log2 sinr_k + Phi_k)."""
    s = np.asarray(sinrs, dtype=float)
    if np.any(s <= 0):
        raise ValueError("SINRs must be positive for the log-domain bound")
    t_t = np.asarray(params.t_t)
    return float(np.sum(t_t * (coeffs.pi * np.log2(s) + coeffs.phi)))


def total_power(p_ce_w: float, params: SystemParams) -> float:
    """Total consumed power in watts.

    The CE radiates for the whole frame on behalf of each sensor, so the
    emitter term is charged once per sensor: sum_k (P_ce / kappa_k) *
    (T_t,k + T_h,k), plus the CE and RSU circuit powers.
    """
    if p_ce_w < 0:
        raise ValueError("p_ce_w must be non-negative")
    amp = sum(
        p_ce_w / params.kappa[k] * (params.t_t[k] + params.t_h[k]) for k in range(2)
    )
    return amp + params.p_c_ce_w + params.p_c_rsu_w


def energy_efficiency(rate: float, p_total_w: float) -> float:
    """EE in bits/Hz/J; the power must be positive."""
    if p_total_w <= 0:
        raise ValueError("p_total_w must be positive")
    return rate / p_total_w


@dataclass(frozen=True)
class RateReport:
    """Rates and EE of one operating point; ee uses the bounded rate."""

    sinr: tuple[float, float]
    rate_exact: float
    rate_approx: float
    p_total_w: float
    ee: float


def rate_report(
    p_ce_w: float,
    gammas: tuple[float, float],
    channel: ScenarioChannel,
    params: SystemParams,
    coeffs: ApproxCoeffs | None = None,
) -> RateReport:
    """Evaluate one (power, reflection) point.

    With coeffs=None the bound is tightened at this point's own SINRs, so
    rate_approx equals rate_exact there.
    """
    sinr = sinr_pair(p_ce_w, gammas, channel, params)
    if coeffs is None:
        coeffs = approx_coeffs(sinr)
    rate_ex = sum_rate_exact(sinr, params)
    rate_ap = sum_rate_approx(sinr, coeffs, params)
    p_tot = total_power(p_ce_w, params)
    return RateReport(
        sinr=sinr,
        rate_exact=rate_ex,
        rate_approx=rate_ap,
        p_total_w=p_tot,
        ee=energy_efficiency(rate_ap, p_tot),
    )
