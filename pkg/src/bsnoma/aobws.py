"""Two-stage solver: stage-1 power search plus stage-2 reflection update.

run_aobws chains run_ocetp (power at the initial reflection coefficients)
and optimal_reflection (coefficients at that power), then keeps whichever
of the two operating points has the higher exact-rate EE among those that
satisfy the exact constraint set.  The closed-form stage-2 point is built
from the frozen-interference bound, so in rare corners (SIC back-off,
asymmetric harvest caps) it can regress the exact EE or leave a QoS floor
unmet; the guard makes the two-stage result never worse than stage 1.

Solutions report the exact sum rate (per-Hz) and exact EE so that every
algorithm, including the exhaustive search, is compared on the same scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import InfeasibleProblemError
from .ocetp import StageOneResult, run_ocetp
from .rate_model import energy_efficiency, sinr_pair, sum_rate_exact, total_power
from .reflection import ReflectionSolution, optimal_reflection
from .scenario import ScenarioChannel, SystemParams, harvested_power, incident_power

__all__ = ["Solution", "exact_constraints_ok", "evaluate_point", "run_aobws", "run_stage1"]

_SLACK_TOL = 1e-12  # absolute slack allowed in the exact recheck


@dataclass(frozen=True)
class Solution:
    """One algorithm's operating point for one scenario."""

    algorithm: str
    p_ce_w: float
    gamma: tuple[float, float]
    rate: float
    p_total_w: float
    ee: float
    feasible: bool
    iterations: int = 0


def exact_constraints_ok(
    p_ce_w: float,
    gammas: tuple[float, float],
    channel: ScenarioChannel,
    params: SystemParams,
) -> bool:
    """Exact-rate recheck of the full constraint set at one point.

    C1/C2: per-sensor exact rate meets r_min; C3: power within (0, p_max];
    C4 is the frozen-sum device inside stage 2 and is not re-imposed here;
    C5: harvested power covers the sensor circuit; reflection in (0, 1].
    """
    if not 0.0 < p_ce_w <= params.p_max_w * (1.0 + 1e-12):
        return False
    if any(not 0.0 < g <= 1.0 for g in gammas):
        return False
    sinr = sinr_pair(p_ce_w, gammas, channel, params)
    for k in range(2):
        if params.t_t[k] * math.log2(1.0 + sinr[k]) < params.r_min - _SLACK_TOL:
            return False
        p_ht, p_hh = harvested_power(
            incident_power(p_ce_w, channel.g_f[k]), gammas[k], params, k
        )
        if p_ht + p_hh < params.p_c_rs_w * params.t_t[k] - _SLACK_TOL:
            return False
    return True


def evaluate_point(
    algorithm: str,
    p_ce_w: float,
    gammas: tuple[float, float],
    channel: ScenarioChannel,
    params: SystemParams,
    iterations: int = 0,
) -> Solution:
    """Exact-rate Solution record at one (power, reflection) point."""
    sinr = sinr_pair(p_ce_w, gammas, channel, params)
    rate = sum_rate_exact(sinr, params)
    p_tot = total_power(p_ce_w, params)
    return Solution(
        algorithm=algorithm,
        p_ce_w=float(p_ce_w),
        gamma=(float(gammas[0]), float(gammas[1])),
        rate=rate,
        p_total_w=p_tot,
        ee=energy_efficiency(rate, p_tot),
        feasible=True,
        iterations=iterations,
    )


def run_stage1(channel: ScenarioChannel, params: SystemParams) -> tuple[Solution, StageOneResult]:
    """Stage 1 alone, reported at the initial reflection coefficients."""
    stage1 = run_ocetp(channel, params.gamma_init, params)
    sol = evaluate_point(
        "ocetp", stage1.p_ce_w, params.gamma_init, channel, params,
        iterations=stage1.iterations,
    )
    return sol, stage1


def run_aobws(
    channel: ScenarioChannel,
    params: SystemParams,
) -> tuple[Solution, StageOneResult, ReflectionSolution | None]:
    """Full two-stage solve; raises InfeasibleProblemError when stage 1 does.

    The returned Solution is the better of the stage-2 point (when it
    passes the exact recheck) and the stage-1 point.
    """
    stage1_sol, stage1 = run_stage1(channel, params)
    best = stage1_sol
    try:
        refl = optimal_reflection(stage1.p_ce_w, channel, stage1.coeffs, params)
    except InfeasibleProblemError:
        refl = None
    if refl is not None and exact_constraints_ok(
        stage1.p_ce_w, refl.gamma, channel, params
    ):
        cand = evaluate_point(
            "aobws", stage1.p_ce_w, refl.gamma, channel, params,
            iterations=stage1.iterations,
        )
        if cand.ee >= best.ee:
            best = cand
    return replace(best, algorithm="aobws"), stage1, refl
