"""Exhaustive grid search over (P_ce, Gamma_1, Gamma_2).

The benchmark visits every point of the rectangular grid

    P     in {p_step, 2 p_step, ...}            (ceil(p_max / p_step) values,
                                                 the last clipped to p_max)
    G_1,2 in {g_step, 2 g_step, ...}            (ceil(gamma_max / g_step) each,
                                                 clipped to gamma_max)

so exactly ceil(p_max/p_step) * ceil(gamma_max/g_step)^2 points are
evaluated.  Feasibility and the objective use the exact rate (the log
bound tightened at each point's own SINR coincides with it), so the ES
result is comparable with the solver outputs on the same EE scale.  Ties
break deterministically toward the lowest power, then the lowest G_1,
then the lowest G_2, independent of evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .aobws import Solution
from .errors import InfeasibleProblemError
from .rate_model import total_power
from .scenario import ScenarioChannel, SystemParams

__all__ = ["EsConfig", "es_search", "grid_sizes"]


@dataclass(frozen=True)
class EsConfig:
    """Grid resolution of the exhaustive search."""

    p_step_w: float
    gamma_step: float
    gamma_max: float = 1.0

    def __post_init__(self):
        if self.p_step_w <= 0:
            raise ValueError("p_step_w must be positive")
        if self.gamma_step <= 0:
            raise ValueError("gamma_step must be positive")
        if not 0 < self.gamma_max <= 1:
            raise ValueError("gamma_max must lie in (0, 1]")


def grid_sizes(es: EsConfig, params: SystemParams) -> tuple[int, int]:
    """(power points, reflection points per axis) for the given resolution."""
    n_p = math.ceil(params.p_max_w / es.p_step_w)
    n_g = math.ceil(es.gamma_max / es.gamma_step)
    return n_p, n_g


def es_search(
    channel: ScenarioChannel,
    params: SystemParams,
    es: EsConfig,
    p_fixed_w: float | None = None,
) -> Solution:
    """Best feasible grid point by exact EE.

    With p_fixed_w the power axis collapses to that single value (used by
    fixed-power sweeps).  Raises InfeasibleProblemError when no grid point
    satisfies the constraints.
    """
    channel.require_estimated()
    n_p, n_g = grid_sizes(es, params)
    if p_fixed_w is not None:
        if not 0 < p_fixed_w <= params.p_max_w:
            raise ValueError("p_fixed_w must lie in (0, p_max]")
        p_grid = np.array([p_fixed_w])
    else:
        p_grid = np.minimum(es.p_step_w * np.arange(1, n_p + 1), params.p_max_w)
    g_axis = np.minimum(es.gamma_step * np.arange(1, n_g + 1), es.gamma_max)
    g1, g2 = np.meshgrid(g_axis, g_axis, indexing="ij")

    ghat = channel.g_hat
    se = channel.sigma2_e
    sn = params.sigma2_n_w
    t_t = params.t_t
    # harvest slope per unit power, per sensor (independent of the other sensor)
    h_slope = [
        params.xi * channel.g_f[k] * ((1.0 - g_axis) * t_t[k] + params.t_h[k])
        for k in range(2)
    ]
    h_need = [params.p_c_rs_w * t_t[k] for k in range(2)]

    best_ee = -np.inf
    best = None
    for p in p_grid:
        err = se * p * (g1 + g2) + sn
        sig1 = p * g1 * ghat[0]
        sinr1 = sig1 / err
        sinr2 = p * g2 * ghat[1] / (sig1 + err)
        rate1 = t_t[0] * np.log2(1.0 + sinr1)
        rate2 = t_t[1] * np.log2(1.0 + sinr2)
        feas = (rate1 >= params.r_min) & (rate2 >= params.r_min)
        feas &= (p * h_slope[0] >= h_need[0])[:, None]
        feas &= (p * h_slope[1] >= h_need[1])[None, :]
        if not feas.any():
            continue
        ee = np.where(feas, (rate1 + rate2) / total_power(float(p), params), -np.inf)
        idx = int(np.argmax(ee))  # first occurrence: lowest G1, then lowest G2
        if ee.flat[idx] > best_ee:  # strict: earlier (lower) power wins ties
            i, j = divmod(idx, n_g)
            best_ee = float(ee.flat[idx])
            best = (float(p), float(g_axis[i]), float(g_axis[j]),
                    float(rate1[i, j] + rate2[i, j]))

    if best is None:
        raise InfeasibleProblemError("no feasible grid point", constraint="C1-C5")
    p, gam1, gam2, rate = best
    p_tot = total_power(p, params)
    return Solution(
        algorithm="es",
        p_ce_w=p,
        gamma=(gam1, gam2),
        rate=rate,
        p_total_w=p_tot,
        ee=rate / p_tot,
        feasible=True,
        iterations=0,
    )
