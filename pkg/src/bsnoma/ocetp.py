"""Stage 1: optimal CE transmit power at fixed reflection coefficients.

The fractional EE objective max R(P)/P_T(P) is handled with Dinkelbach's
method: for the current parameter psi the subproblem max R_bar(P) - psi *
P_T(P) is solved in closed form, psi is refreshed to the achieved ratio,
and the loop stops when the residual |R_bar - psi * P_T| at the fresh
power drops below delta_max.  R_bar is the concave log-domain lower bound
of the sum rate, retightened at the incumbent power once per iteration.

Each subproblem is relaxed with Lagrange multipliers (lambda for the power
cap, mu_k for QoS, beta_k for sensor-circuit harvest) updated by projected
subgradients with diminishing steps w_i / sqrt(iter).  Stationarity of the
relaxed objective in P reduces, after clearing denominators, to a cubic

    a P^3 + b P^2 + c P + d = 0
    a = ln2 * B*D*G
    b = ln2 * B*G*s + ln2 * D*G*s
    c = ln2 * G*s^2 + A*D + C*B
    d = A*s + C*s            (s = noise power)

with A = T_t,1 Pi_1 s, B = sigma2_e (G1+G2), C = T_t,2 Pi_2 s,
D = G1 ghat_1 + sigma2_e (G1+G2), and G collecting the linear-in-P terms
(QoS slopes Q_k, harvest slopes P^H_k, -psi * sum 1/kappa_k, -lambda).
The cubic is solved by Cardano's closed form, including the trigonometric
three-real-root case, and the maximizing candidate is kept.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleProblemError
from .rate_model import (
    ApproxCoeffs,
    approx_coeffs,
    sinr_pair,
    sum_rate_approx,
    total_power,
)
from .scenario import ScenarioChannel, SystemParams

__all__ = [
    "DualState",
    "CardanoCoeffs",
    "StageOneResult",
    "qos_exponents",
    "constraint_slacks",
    "lagrangian",
    "cardano_coefficients",
    "solve_cubic",
    "select_power_candidate",
    "update_duals",
    "feasible_power_range",
    "run_ocetp",
]

_LN2 = math.log(2.0)


@dataclass(frozen=True)
class DualState:
    """Lagrange multipliers and the subgradient iteration counter."""

    lam: float = 0.0
    mu: tuple[float, float] = (0.0, 0.0)
    beta: tuple[float, float] = (0.0, 0.0)
    it: int = 1

    def __post_init__(self):
        if self.lam < 0 or any(m < 0 for m in self.mu) or any(b < 0 for b in self.beta):
            raise ValueError("multipliers must be non-negative")
        if self.it < 1:
            raise ValueError("iteration counter starts at 1")


@dataclass(frozen=True)
class CardanoCoeffs:
    """Cubic coefficients of the stationarity condition plus aggregates.

    p, q, r parameterize the depressed form used by the closed-form root:
    p = -b/(3a), q = p^3 + (bc - 3ad)/(6a^2), r = c/(3a); they are NaN when
    the cubic degenerates (a = 0).  ``degenerate`` flags G = 0 or B*D = 0,
    which the solver handles by falling back to lower degree.
    """

    a: float
    b: float
    c: float
    d: float
    p: float
    q: float
    r: float
    cap_a: float
    cap_b: float
    cap_c: float
    cap_d: float
    cap_g: float
    q_k: tuple[float, float]
    p_h_k: tuple[float, float]
    degenerate: bool


@dataclass(frozen=True)
class StageOneResult:
    """Converged stage-1 output.

    psi is the final Dinkelbach parameter, i.e. the EE at p_ce_w with the
    bound retightened there (hence the exact EE of the returned power).
    trace holds one (psi, p_ce_w, residual) row per iteration.  coeffs are
    the final bound coefficients, handed to stage 2.
    """

    p_ce_w: float
    psi: float
    converged: bool
    iterations: int
    trace: list[tuple[float, float, float]]
    coeffs: ApproxCoeffs


def qos_exponents(coeffs: ApproxCoeffs, params: SystemParams) -> np.ndarray:
    """Per-sensor QoS exponents (R_min - T_t,k Phi_k) / (T_t,k Pi_k)."""
    t_t = np.asarray(params.t_t)
    return (params.r_min - t_t * coeffs.phi) / (t_t * coeffs.pi)


def constraint_slacks(
    p_ce_w: float,
    gammas: tuple[float, float],
    channel: ScenarioChannel,
    coeffs: ApproxCoeffs,
    params: SystemParams,
) -> tuple[float, float, float, float, float]:
    """Slacks of the relaxed constraints at power p_ce_w.

    Order: power cap, QoS sensor 1, QoS sensor 2, harvest sensor 1,
    harvest sensor 2.  Positive means satisfied.
    """
    g1, g2 = gammas
    ghat = channel.g_hat
    se = channel.sigma2_e
    sn = params.sigma2_n_w
    aleph = qos_exponents(coeffs, params)
    floor = np.exp2(aleph)
    s_cap = params.p_max_w - p_ce_w
    s_q1 = p_ce_w * g1 * ghat[0] - floor[0] * (se * p_ce_w * (g1 + g2) + sn)
    s_q2 = p_ce_w * g2 * ghat[1] - floor[1] * (
        p_ce_w * g1 * ghat[0] + se * p_ce_w * (g1 + g2) + sn
    )
    s_h = [
        params.xi * (1.0 - gammas[k]) * p_ce_w * channel.g_f[k] * params.t_t[k]
        + params.xi * p_ce_w * channel.g_f[k] * params.t_h[k]
        - params.p_c_rs_w * params.t_t[k]
        for k in range(2)
    ]
    return s_cap, float(s_q1), float(s_q2), s_h[0], s_h[1]


def lagrangian(
    p_ce_w: float,
    gammas: tuple[float, float],
    channel: ScenarioChannel,
    coeffs: ApproxCoeffs,
    duals: DualState,
    psi: float,
    params: SystemParams,
) -> float:
    """Relaxed objective R_bar - psi * P_T plus the weighted slacks."""
    sinr = sinr_pair(p_ce_w, gammas, channel, params)
    val = sum_rate_approx(sinr, coeffs, params) - psi * total_power(p_ce_w, params)
    slacks = constraint_slacks(p_ce_w, gammas, channel, coeffs, params)
    mults = (duals.lam, duals.mu[0], duals.mu[1], duals.beta[0], duals.beta[1])
    for m, s in zip(mults, slacks):
        if m != 0.0:  # skip 0 * inf when an exponent saturates
            val += m * s
    return val


def cardano_coefficients(
    channel: ScenarioChannel,
    gammas: tuple[float, float],
    coeffs: ApproxCoeffs,
    duals: DualState,
    psi: float,
    params: SystemParams,
) -> CardanoCoeffs:
    """Assemble the stationarity cubic at the current multipliers and psi."""
    channel.require_estimated()
    g1, g2 = gammas
    ghat = channel.g_hat
    se = channel.sigma2_e
    sn = params.sigma2_n_w
    t_t = params.t_t

    cap_a = t_t[0] * coeffs.pi[0] * sn
    cap_b = se * (g1 + g2)
    cap_c = t_t[1] * coeffs.pi[1] * sn
    cap_d = g1 * ghat[0] + se * (g1 + g2)

    aleph = qos_exponents(coeffs, params)
    floor = np.exp2(aleph)
    q_1 = g1 * ghat[0] - floor[0] * se * (g1 + g2)
    q_2 = g2 * ghat[1] - floor[1] * (g1 * ghat[0] + se * (g1 + g2))
    p_h = tuple(
        params.xi * (1.0 - gammas[k]) * channel.g_f[k] * params.t_t[k]
        + params.xi * channel.g_f[k] * params.t_h[k]
        for k in range(2)
    )

    cap_g = -psi * (1.0 / params.kappa[0] + 1.0 / params.kappa[1]) - duals.lam
    for m, slope in zip(duals.mu, (q_1, q_2)):
        if m != 0.0:
            cap_g += m * slope
    for m, slope in zip(duals.beta, p_h):
        if m != 0.0:
            cap_g += m * slope

    a = _LN2 * cap_b * cap_d * cap_g
    b = _LN2 * cap_b * cap_g * sn + _LN2 * cap_d * cap_g * sn
    c = _LN2 * cap_g * sn**2 + cap_a * cap_d + cap_c * cap_b
    d = cap_a * sn + cap_c * sn

    if a != 0.0:
        p = -b / (3.0 * a)
        q = p**3 + (b * c - 3.0 * a * d) / (6.0 * a**2)
        r = c / (3.0 * a)
    else:
        p = q = r = float("nan")

    return CardanoCoeffs(
        a=a, b=b, c=c, d=d, p=p, q=q, r=r,
        cap_a=cap_a, cap_b=cap_b, cap_c=cap_c, cap_d=cap_d, cap_g=cap_g,
        q_k=(float(q_1), float(q_2)), p_h_k=p_h,
        degenerate=(cap_g == 0.0 or cap_b * cap_d == 0.0),
    )


def _cbrt(x: float) -> float:
    return math.copysign(abs(x) ** (1.0 / 3.0), x)


def _polish(roots: list[float], a: float, b: float, c: float, d: float) -> list[float]:
    # one or two Newton steps, kept only while the residual improves
    out = []
    for x in roots:
        for _ in range(2):
            f = ((a * x + b) * x + c) * x + d
            fp = (3.0 * a * x + 2.0 * b) * x + c
            if fp == 0.0 or not math.isfinite(fp):
                break
            x_new = x - f / fp
            f_new = ((a * x_new + b) * x_new + c) * x_new + d
            if not math.isfinite(x_new) or abs(f_new) >= abs(f):
                break
            x = x_new
        out.append(x)
    return out


def solve_cubic(coeffs) -> list[float]:
    """Real roots (with multiplicity) of a*x^3 + b*x^2 + c*x + d = 0.

    Accepts a CardanoCoeffs or a plain (a, b, c, d) sequence.  Cardano's
    radical form covers the single-real-root case; the casus irreducibilis
    (three real roots) uses the trigonometric form.  a = 0 falls back to
    the quadratic/linear solution; all-zero coefficients are rejected.
    """
    if isinstance(coeffs, CardanoCoeffs):
        a, b, c, d = coeffs.a, coeffs.b, coeffs.c, coeffs.d
    else:
        a, b, c, d = (float(v) for v in coeffs)

    scale = max(abs(a), abs(b), abs(c), abs(d))
    if scale == 0.0:
        raise ValueError("all cubic coefficients are zero")
    an, bn, cn, dn = a / scale, b / scale, c / scale, d / scale

    if an == 0.0:
        if bn == 0.0:
            if cn == 0.0:
                return []  # constant, no roots
            return [-dn / cn]
        disc = cn * cn - 4.0 * bn * dn
        if disc < 0.0:
            return []
        sq = math.sqrt(disc)
        # stable quadratic: avoid cancellation in the smaller root
        u = -(cn + math.copysign(sq, cn)) / 2.0
        if u == 0.0:
            roots = [0.0, -cn / bn]
        else:
            roots = [u / bn, dn / u]
        return sorted(_polish(roots, an, bn, cn, dn))

    big_b, big_c, big_d = bn / an, cn / an, dn / an
    p = -big_b / 3.0
    q = p**3 + (big_b * big_c - 3.0 * big_d) / 6.0
    r = big_c / 3.0
    w = r - p * p
    disc = q * q + w**3

    if disc >= 0.0:
        sq = math.sqrt(disc)
        t = _cbrt(q + sq) + _cbrt(q - sq)
        if disc == 0.0 and (q != 0.0 or w != 0.0):
            # double root alongside the simple one
            roots = [t + p, -t / 2.0 + p, -t / 2.0 + p]
        elif disc == 0.0:
            roots = [p, p, p]  # triple root
        else:
            roots = [t + p]
    else:
        # three distinct real roots: w < 0 here
        m = 2.0 * math.sqrt(-w)
        arg = q / math.sqrt(-(w**3))
        arg = min(1.0, max(-1.0, arg))
        phi = math.acos(arg)
        roots = [m * math.cos((phi - 2.0 * math.pi * k) / 3.0) + p for k in range(3)]

    return sorted(_polish(roots, an, bn, cn, dn))


def select_power_candidate(roots, objective, p_max_w: float) -> float:
    """Pick the relaxed-objective maximizer among admissible powers.

    Positive roots are clamped to (0, p_max_w]; the cap itself is always a
    candidate, so the result is positive even with no usable root.  The
    cubic's stationary points include minima, so selection is by value.
    """
    if p_max_w <= 0:
        raise ValueError("p_max_w must be positive")
    candidates = {min(r, p_max_w) for r in roots if r > 0.0 and math.isfinite(r)}
    candidates.add(p_max_w)
    return max(sorted(candidates), key=objective)


def update_duals(
    duals: DualState,
    p_ce_w: float,
    gammas: tuple[float, float],
    channel: ScenarioChannel,
    coeffs: ApproxCoeffs,
    params: SystemParams,
) -> DualState:
    """One projected-subgradient step with diminishing steps w_i/sqrt(it)."""
    slacks = constraint_slacks(p_ce_w, gammas, channel, coeffs, params)
    w = [s / math.sqrt(duals.it) for s in params.step_sizes]
    lam = max(duals.lam - w[0] * slacks[0], 0.0)
    mu = tuple(max(duals.mu[k] - w[1 + k] * slacks[1 + k], 0.0) for k in range(2))
    beta = tuple(max(duals.beta[k] - w[3 + k] * slacks[3 + k], 0.0) for k in range(2))
    return DualState(lam=lam, mu=mu, beta=beta, it=duals.it + 1)


def feasible_power_range(
    gammas: tuple[float, float],
    channel: ScenarioChannel,
    params: SystemParams,
) -> tuple[float, float]:
    """Smallest and largest CE powers meeting C1, C2, and C5 at these gammas.

    Each constraint is linear in P at exact rates, so it either fails for
    every P (slope non-positive) or sets a lower threshold.  Raises
    InfeasibleProblemError naming the binding constraint when the range is
    empty.
    """
    channel.require_estimated()
    g1, g2 = gammas
    if not (0 < g1 <= 1 and 0 < g2 <= 1):
        raise ValueError("gammas must lie in (0, 1]")
    ghat = channel.g_hat
    se = channel.sigma2_e
    sn = params.sigma2_n_w
    thresholds = {}

    tau1 = 2.0 ** (params.r_min / params.t_t[0]) - 1.0
    coef1 = g1 * ghat[0] - tau1 * se * (g1 + g2)
    if coef1 <= 0.0:
        raise InfeasibleProblemError(
            "QoS of sensor 1 unreachable at any power for these gammas", constraint="C1"
        )
    thresholds["C1"] = tau1 * sn / coef1

    tau2 = 2.0 ** (params.r_min / params.t_t[1]) - 1.0
    coef2 = g2 * ghat[1] - tau2 * (g1 * ghat[0] + se * (g1 + g2))
    if coef2 <= 0.0:
        raise InfeasibleProblemError(
            "QoS of sensor 2 unreachable at any power for these gammas", constraint="C2"
        )
    thresholds["C2"] = tau2 * sn / coef2

    for k, g in enumerate(gammas):
        slope = params.xi * channel.g_f[k] * (
            (1.0 - g) * params.t_t[k] + params.t_h[k]
        )
        need = params.p_c_rs_w * params.t_t[k]
        if slope <= 0.0:
            if need > 0.0:
                raise InfeasibleProblemError(
                    f"sensor {k + 1} cannot harvest its circuit power", constraint="C5"
                )
            continue
        thresholds[f"C5:{k + 1}"] = need / slope

    binding = max(thresholds, key=thresholds.get)
    p_min = thresholds[binding]
    if p_min > params.p_max_w:
        raise InfeasibleProblemError(
            f"minimum feasible power {p_min:.3e} W exceeds the cap "
            f"{params.p_max_w:.3e} W",
            constraint=binding.split(":")[0],
        )
    return p_min, params.p_max_w


def run_ocetp(
    channel: ScenarioChannel,
    gammas: tuple[float, float],
    params: SystemParams,
) -> StageOneResult:
    """Dinkelbach power search at fixed reflection coefficients.

    Starts from P = p_max/2 with psi = 0 and zero multipliers.  Each
    iteration retightens the bound at the incumbent power, refreshes psi,
    steps the multipliers, solves the stationarity cubic, and keeps the
    best candidate.  The result is projected onto the exact-rate feasible
    power range before the final psi is computed.
    """
    channel.require_estimated()
    p_min, p_max = feasible_power_range(gammas, channel, params)

    p = p_max / 2.0
    duals = DualState()
    psi = 0.0
    trace: list[tuple[float, float, float]] = []
    converged = False

    for _ in range(params.i_max):
        coeffs = approx_coeffs(sinr_pair(p, gammas, channel, params))
        r_bar = sum_rate_approx(coeffs.anchor, coeffs, params)
        psi = r_bar / total_power(p, params)
        duals = update_duals(duals, p, gammas, channel, coeffs, params)
        cubic = cardano_coefficients(channel, gammas, coeffs, duals, psi, params)
        roots = solve_cubic(cubic)
        p_new = select_power_candidate(
            roots,
            lambda cand: lagrangian(cand, gammas, channel, coeffs, duals, psi, params),
            p_max,
        )
        residual = abs(
            sum_rate_approx(sinr_pair(p_new, gammas, channel, params), coeffs, params)
            - psi * total_power(p_new, params)
        )
        trace.append((psi, p_new, residual))
        p = p_new
        if residual < params.delta_max:
            converged = True
            break

    # hard feasibility: the subgradient steps are far too small to move the
    # cubic at these magnitudes, so enforce the exact-rate range directly
    p = min(max(p, p_min), p_max)
    coeffs = approx_coeffs(sinr_pair(p, gammas, channel, params))
    psi = sum_rate_approx(coeffs.anchor, coeffs, params) / total_power(p, params)
    return StageOneResult(
        p_ce_w=p,
        psi=psi,
        converged=converged,
        iterations=len(trace),
        trace=trace,
        coeffs=coeffs,
    )
