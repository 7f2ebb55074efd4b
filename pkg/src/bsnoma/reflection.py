"""Stage 2: optimal reflection coefficients at the stage-1 power.

With the CE power P* and the bound coefficients (Pi, Phi) fixed, the
residual interference is frozen at sigma2_T = sigma2_e * P* * theta +
sigma2_n (theta is the reflection-sum target) and each sensor's optimal
coefficient follows in closed form from its QoS floor and harvest cap:

    lower_k = 2^aleph_k * (sigma2_T + I_k) / (P* * ghat_k)
    upper_k = min(1 + T_h,k/T_t,k - P^c_RS / (xi * P^I_k), 1)

with aleph_k = (R_min - T_t,k Phi_k) / (T_t,k Pi_k) and I_k the NOMA
interference seen by sensor k (zero for the decoded-last weak sensor's
own QoS floor is interference-free; the strong sensor's floor sees the
weak sensor's already-fixed received power).  The harvest cap carries the
conversion efficiency xi so that a coefficient at the cap meets the
sensor-circuit constraint with equality.

Cases: the objective increases toward the harvest cap, so Gamma* is the
cap when it is below 1 (harvest-limited), 1 when the raw cap allows it
(full backscatter), and the problem is infeasible when the QoS floor
exceeds the cap.  If both sensors land on full backscatter, the stronger
sensor backs off to 1 - nu, doubling nu until the SIC power-gap condition
P*(G2 ghat_2 - G1 ghat_1) <= p_gap holds; nu >= 0.5 is infeasible.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InfeasibleProblemError
from .rate_model import ApproxCoeffs
from .ocetp import qos_exponents
from .scenario import ScenarioChannel, SystemParams

__all__ = ["ReflectionBounds", "ReflectionSolution", "gamma_bounds", "optimal_reflection"]


@dataclass(frozen=True)
class ReflectionBounds:
    """QoS floor and harvest cap for one sensor at the stage-1 power."""

    lower: float
    upper: float
    aleph: float
    sigma2_t: float
    i_noma: float


@dataclass(frozen=True)
class ReflectionSolution:
    """Stage-2 output: coefficients, case tags, and the SIC back-off flag."""

    gamma: tuple[float, float]
    case: tuple[str, str]
    sic_adjusted: bool
    nu_used: float | None
    bounds: tuple[ReflectionBounds, ReflectionBounds]


def gamma_bounds(
    k: int,
    p_ce_w: float,
    i_noma_w: float,
    channel: ScenarioChannel,
    coeffs: ApproxCoeffs,
    params: SystemParams,
) -> ReflectionBounds:
    """Bounds for sensor k (0-based) given the fixed NOMA interference."""
    channel.require_estimated()
    if p_ce_w <= 0:
        raise ValueError("p_ce_w must be positive")
    if i_noma_w < 0:
        raise ValueError("i_noma_w must be non-negative")
    theta = params.theta_value
    sigma2_t = channel.sigma2_e * p_ce_w * theta + params.sigma2_n_w
    aleph = float(qos_exponents(coeffs, params)[k])
    lower = 2.0**aleph * (sigma2_t + i_noma_w) / (p_ce_w * channel.g_hat[k])
    p_i = p_ce_w * channel.g_f[k]
    if p_i <= 0:
        raise ValueError("incident power must be positive")
    raw_upper = 1.0 + params.t_h[k] / params.t_t[k] - params.p_c_rs_w / (params.xi * p_i)
    return ReflectionBounds(
        lower=float(lower),
        upper=min(raw_upper, 1.0),
        aleph=aleph,
        sigma2_t=float(sigma2_t),
        i_noma=float(i_noma_w),
    )


def _case(bounds: ReflectionBounds) -> tuple[float, str]:
    if bounds.lower > bounds.upper:
        raise InfeasibleProblemError(
            f"QoS floor {bounds.lower:.3e} exceeds harvest cap {bounds.upper:.3e}",
            constraint="C2" if bounds.i_noma > 0 else "C1",
        )
    if bounds.upper < 1.0:
        return bounds.upper, "harvest-limited"
    return 1.0, "full-backscatter"


def optimal_reflection(
    p_ce_w: float,
    channel: ScenarioChannel,
    coeffs: ApproxCoeffs,
    params: SystemParams,
) -> ReflectionSolution:
    """Closed-form reflection coefficients at the stage-1 power.

    Solved sequentially in decoding order: the weak sensor's coefficient is
    fixed first, and its received power enters the strong sensor's QoS
    floor.  Raises InfeasibleProblemError when a QoS floor exceeds its cap
    or when the SIC back-off would need nu >= 0.5.
    """
    b1 = gamma_bounds(0, p_ce_w, 0.0, channel, coeffs, params)
    gamma1, case1 = _case(b1)

    i_noma = p_ce_w * gamma1 * channel.g_hat[0]
    b2 = gamma_bounds(1, p_ce_w, i_noma, channel, coeffs, params)
    gamma2, case2 = _case(b2)

    sic_adjusted = False
    nu_used = None
    if gamma1 == 1.0 and gamma2 == 1.0:
        # both at full backscatter: back off the stronger sensor until the
        # received powers are within the SIC gap
        nu = params.nu
        while nu < 0.5:
            gap = p_ce_w * (1.0 - nu) * channel.g_hat[1] - p_ce_w * gamma1 * channel.g_hat[0]
            if gap <= params.p_gap:
                break
            nu *= 2.0
        else:
            raise InfeasibleProblemError(
                "SIC power gap cannot be met with nu < 0.5", constraint="SIC"
            )
        gamma2 = 1.0 - nu
        case2 = "sic-adjusted"
        sic_adjusted = True
        nu_used = nu

    return ReflectionSolution(
        gamma=(float(gamma1), float(gamma2)),
        case=(case1, case2),
        sic_adjusted=sic_adjusted,
        nu_used=nu_used,
        bounds=(b1, b2),
    )
