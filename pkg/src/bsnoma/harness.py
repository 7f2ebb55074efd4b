"""Configuration, Monte Carlo sweeps, figure presets, and CSV/JSON output.

Sweeps fix a base seed; trial t always uses seed = base + t for the
topology draw (BPP mode) and seed = base + t + FADE_SEED_OFFSET for the
fading draw, for every sweep value and algorithm alike.  Sharing seeds
across sweep values gives common random numbers, so monotone trends in
the swept variable are not washed out by sampling noise, and the whole
sweep is reproducible bit for bit regardless of the worker count.

The p_ce_dbm variable pins the CE transmit power to the swept value
(stage 1 collapses to tightening the bound there); the other variables
re-run the full optimizers per trial.  d_b and d_f sweeps move the far
sensor to the swept distance and keep the baseline near/far offset.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .aobws import Solution, evaluate_point, exact_constraints_ok, run_aobws, run_stage1
from .errors import ConfigError, InfeasibleProblemError
from .es_oracle import EsConfig, es_search
from .rate_model import approx_coeffs, sinr_pair
from .reflection import optimal_reflection
from .scenario import (
    ScenarioChannel,
    SystemParams,
    Topology,
    dbm_to_watt,
    estimate_csi,
    place_sensors_bpp,
    sample_channels,
)

__all__ = [
    "SweepSpec",
    "SweepRow",
    "BppSpec",
    "FADE_SEED_OFFSET",
    "load_config",
    "build_channel",
    "solve_scenario",
    "run_sweep",
    "figure_rows",
    "rows_to_csv",
    "rows_to_json",
    "solution_to_dict",
]

FADE_SEED_OFFSET = 1_000_000_007  # keeps fading and placement streams apart

SWEEP_VARIABLES = ("p_ce_dbm", "rho", "r_min", "d_b", "d_f")
ALGORITHMS = ("ocetp", "aobws", "es")

# canonical figure geometry: sensors inside the 5 m CE disc, RSU links at
# the default (50, 30) m; the R_min figure keeps its stated (10, 5) m
_FIG_DF = (5.0, 3.0)
_FIG_DB = (50.0, 30.0)
_FIG_RHOS = (0.001, 0.005, 0.009)


@dataclass(frozen=True)
class BppSpec:
    """Random-topology mode: n sensors uniform in a disc around the CE."""

    n: int = 2
    radius_m: float = 5.0
    rsu_xy: tuple[float, float] = (40.0, 0.0)


@dataclass(frozen=True)
class SweepSpec:
    """One swept variable over an inclusive (start, stop, step) range."""

    variable: str
    start: float
    stop: float
    step: float
    trials: int = 500
    seed: int = 0
    algorithms: tuple[str, ...] = ("ocetp", "aobws")

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ValueError(f"variable must be one of {SWEEP_VARIABLES}")
        if self.step <= 0 or self.stop < self.start:
            raise ValueError("need step > 0 and stop >= start")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not self.algorithms:
            raise ValueError("at least one algorithm must be selected")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {a!r}")

    def values(self) -> np.ndarray:
        n = int(round((self.stop - self.start) / self.step)) + 1
        return self.start + self.step * np.arange(n)


@dataclass(frozen=True)
class SweepRow:
    """Aggregated result of one (sweep value, algorithm) cell.

    Means are over feasible trials only and are None when every trial was
    infeasible.
    """

    sweep_var: str
    sweep_value: float
    algorithm: str
    mean_ee_bits_hz_j: float | None
    mean_rate: float | None
    mean_pce_w: float | None
    mean_gamma1: float | None
    mean_gamma2: float | None
    feasible_frac: float
    trials: int
    mean_iters: float | None


# --- configuration ---------------------------------------------------------

_DBM_KEYS = {
    "sigma2_n_dbm": "sigma2_n_w",
    "p_max_dbm": "p_max_w",
    "p_c_ce_dbm": "p_c_ce_w",
    "p_c_rsu_dbm": "p_c_rsu_w",
    "p_c_rs_dbm": "p_c_rs_w",
    "p_gap_dbm": "p_gap_w",
}
_TUPLE_KEYS = {"kappa": 2, "t_t": 2, "t_h": 2, "gamma_init": 2, "step_sizes": 5}
_PARAM_KEYS = {
    "bw_hz", "sigma2_n_w", "p_max_w", "xi", "kappa", "p_c_ce_w", "p_c_rsu_w",
    "p_c_rs_w", "r_min", "alpha", "rho", "t_t", "t_h", "gamma_init", "theta",
    "p_gap_w", "nu", "step_sizes", "i_max", "delta_max",
}


def _params_from_table(table: dict, where: str) -> SystemParams:
    kwargs = {}
    for key, value in table.items():
        if key in _DBM_KEYS:
            target = _DBM_KEYS[key]
            if target in table:
                raise ConfigError("given both in dBm and in watts", key=f"{where}{key}")
            if not isinstance(value, (int, float)):
                raise ConfigError("expected a number", key=f"{where}{key}")
            kwargs[target] = dbm_to_watt(float(value))
        elif key in _PARAM_KEYS:
            if key in _TUPLE_KEYS:
                if not isinstance(value, (list, tuple)) or len(value) != _TUPLE_KEYS[key]:
                    raise ConfigError(
                        f"expected a list of {_TUPLE_KEYS[key]} numbers", key=f"{where}{key}"
                    )
                kwargs[key] = tuple(float(v) for v in value)
            elif key == "i_max":
                kwargs[key] = int(value)
            else:
                kwargs[key] = float(value)
        else:
            raise ConfigError("unknown key", key=f"{where}{key}")
    try:
        return SystemParams(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc), key=where.rstrip(".") or None) from exc


def _topology_from_table(table: dict) -> Topology | BppSpec:
    mode = table.get("mode", "fixed")
    known = {"mode", "d_f", "d_b", "n", "radius_m", "rsu_xy"}
    for key in table:
        if key not in known:
            raise ConfigError("unknown key", key=f"topology.{key}")
    if mode == "fixed":
        d_f = table.get("d_f", [10.0, 5.0])
        d_b = table.get("d_b", [50.0, 30.0])
        try:
            return Topology(d_f=np.asarray(d_f, float), d_b=np.asarray(d_b, float))
        except ValueError as exc:
            raise ConfigError(str(exc), key="topology") from exc
    if mode == "bpp":
        rsu = table.get("rsu_xy", [40.0, 0.0])
        spec = BppSpec(
            n=int(table.get("n", 2)),
            radius_m=float(table.get("radius_m", 5.0)),
            rsu_xy=(float(rsu[0]), float(rsu[1])),
        )
        if spec.n < 1 or spec.radius_m <= 0:
            raise ConfigError("need n >= 1 and radius_m > 0", key="topology")
        return spec
    raise ConfigError("mode must be 'fixed' or 'bpp'", key="topology.mode")


def _sweep_from_table(table: dict) -> SweepSpec:
    known = {"variable", "start", "stop", "step", "trials", "seed", "algorithms"}
    for key in table:
        if key not in known:
            raise ConfigError("unknown key", key=f"sweep.{key}")
    if "variable" not in table:
        raise ConfigError("missing 'variable'", key="sweep")
    try:
        return SweepSpec(
            variable=str(table["variable"]),
            start=float(table.get("start", 0.0)),
            stop=float(table.get("stop", 0.0)),
            step=float(table.get("step", 1.0)),
            trials=int(table.get("trials", 500)),
            seed=int(table.get("seed", 0)),
            algorithms=tuple(table.get("algorithms", ["ocetp", "aobws"])),
        )
    except ValueError as exc:
        raise ConfigError(str(exc), key="sweep") from exc


def load_config(path) -> tuple[SystemParams, Topology | BppSpec, SweepSpec | None]:
    """Parse a TOML config into (params, topology, sweep spec).

    Top-level keys set SystemParams fields (dBm spellings are converted to
    watts at this boundary); the optional [topology] and [sweep] tables
    configure geometry and the sweep. Unspecified fields take the built-in
    defaults.
    """
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"TOML parse failure: {exc}") from exc

    topo_table = raw.pop("topology", {})
    sweep_table = raw.pop("sweep", None)
    params = _params_from_table(raw, where="")
    topology = _topology_from_table(topo_table)
    sweep = _sweep_from_table(sweep_table) if sweep_table is not None else None
    return params, topology, sweep


# --- scenario construction and per-trial solving ---------------------------

def build_channel(
    topology: Topology | BppSpec,
    params: SystemParams,
    seed: int,
) -> ScenarioChannel:
    """Scenario for one trial: placement (BPP mode), fading, CSI estimate."""
    if isinstance(topology, BppSpec):
        topo = place_sensors_bpp(topology.n, topology.radius_m, seed, topology.rsu_xy)
    else:
        topo = topology
    raw = sample_channels(topo, params, seed + FADE_SEED_OFFSET)
    return estimate_csi(raw, params)


def solve_scenario(
    algorithm: str,
    channel: ScenarioChannel,
    params: SystemParams,
    pinned_p_w: float | None = None,
    es_config: EsConfig | None = None,
) -> Solution:
    """One algorithm on one scenario; raises InfeasibleProblemError."""
    if algorithm == "es":
        cfg = es_config or EsConfig(p_step_w=params.p_max_w / 100.0, gamma_step=0.02)
        return es_search(channel, params, cfg, p_fixed_w=pinned_p_w)
    if pinned_p_w is None:
        if algorithm == "ocetp":
            return run_stage1(channel, params)[0]
        if algorithm == "aobws":
            return run_aobws(channel, params)[0]
        raise ValueError(f"unknown algorithm {algorithm!r}")

    # pinned CE power: evaluate / improve at exactly this power
    base = None
    if exact_constraints_ok(pinned_p_w, params.gamma_init, channel, params):
        base = evaluate_point(algorithm, pinned_p_w, params.gamma_init, channel, params)
    if algorithm == "ocetp":
        if base is None:
            raise InfeasibleProblemError(
                "initial reflection point violates constraints at the pinned power",
                constraint="C1-C5",
            )
        return base
    if algorithm != "aobws":
        raise ValueError(f"unknown algorithm {algorithm!r}")
    cand = None
    try:
        coeffs = approx_coeffs(sinr_pair(pinned_p_w, params.gamma_init, channel, params))
        refl = optimal_reflection(pinned_p_w, channel, coeffs, params)
        if exact_constraints_ok(pinned_p_w, refl.gamma, channel, params):
            cand = evaluate_point("aobws", pinned_p_w, refl.gamma, channel, params)
    except InfeasibleProblemError:
        cand = None
    choices = [s for s in (base, cand) if s is not None]
    if not choices:
        raise InfeasibleProblemError(
            "no feasible reflection point at the pinned power", constraint="C1-C5"
        )
    best = max(choices, key=lambda s: s.ee)
    return replace(best, algorithm="aobws")


def _apply_variable(
    variable: str,
    value: float,
    params: SystemParams,
    topology: Topology | BppSpec,
) -> tuple[SystemParams, Topology | BppSpec, float | None]:
    """Overridden (params, topology, pinned power) for one sweep value."""
    if variable == "p_ce_dbm":
        p = dbm_to_watt(value)
        if p > params.p_max_w:
            params = replace(params, p_max_w=p)
        return params, topology, p
    if variable == "rho":
        return replace(params, rho=float(value)), topology, None
    if variable == "r_min":
        return replace(params, r_min=float(value)), topology, None
    if variable in ("d_b", "d_f"):
        if isinstance(topology, BppSpec):
            raise ValueError("distance sweeps need a fixed topology")
        base = getattr(topology, variable)
        offset = float(base[0] - base[1])
        new = np.array([float(value), float(value) - offset])
        if np.any(new <= 0):
            raise ValueError(f"{variable} sweep reaches a non-positive distance")
        return params, replace(topology, **{variable: new, "sensor_xy": None, "rsu_xy": None}), None
    raise ValueError(f"unknown sweep variable {variable!r}")


def _run_trial(args):
    (trial, base_seed, algorithms, params, topology, pinned, es_config) = args
    seed = base_seed + trial
    channel = build_channel(topology, params, seed)
    out = {}
    for alg in algorithms:
        try:
            out[alg] = solve_scenario(alg, channel, params, pinned, es_config)
        except InfeasibleProblemError:
            out[alg] = None
    return out


def run_sweep(
    spec: SweepSpec,
    params: SystemParams,
    topology: Topology | BppSpec,
    threads: int = 1,
    es_config: EsConfig | None = None,
    label: str | None = None,
) -> list[SweepRow]:
    """Monte Carlo sweep; rows sorted by sweep value then algorithm.

    ``label`` replaces the plain algorithm name in the emitted rows (used
    by figure presets to tag curve families); {alg} inside it expands to
    the algorithm name.
    """
    rows = []
    for value in spec.values():
        p_v, t_v, pinned = _apply_variable(spec.variable, float(value), params, topology)
        work = [
            (t, spec.seed, spec.algorithms, p_v, t_v, pinned, es_config)
            for t in range(spec.trials)
        ]
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(_run_trial, work))
        else:
            results = [_run_trial(w) for w in work]
        for alg in spec.algorithms:
            sols = [r[alg] for r in results if r[alg] is not None]
            name = (label or "{alg}").format(alg=alg)
            rows.append(_aggregate(spec.variable, float(value), name, sols, spec.trials))
    rows.sort(key=lambda r: (r.sweep_value, r.algorithm))
    return rows


def _aggregate(
    var: str, value: float, algorithm: str, sols: list[Solution], trials: int
) -> SweepRow:
    if not sols:
        return SweepRow(
            sweep_var=var, sweep_value=value, algorithm=algorithm,
            mean_ee_bits_hz_j=None, mean_rate=None, mean_pce_w=None,
            mean_gamma1=None, mean_gamma2=None,
            feasible_frac=0.0, trials=trials, mean_iters=None,
        )
    mean = lambda xs: float(np.mean(np.asarray(xs, dtype=float)))
    return SweepRow(
        sweep_var=var,
        sweep_value=value,
        algorithm=algorithm,
        mean_ee_bits_hz_j=mean([s.ee for s in sols]),
        mean_rate=mean([s.rate for s in sols]),
        mean_pce_w=mean([s.p_ce_w for s in sols]),
        mean_gamma1=mean([s.gamma[0] for s in sols]),
        mean_gamma2=mean([s.gamma[1] for s in sols]),
        feasible_frac=len(sols) / trials,
        trials=trials,
        mean_iters=mean([s.iterations for s in sols]),
    )


# --- figure presets ---------------------------------------------------------

def _fig_topology(params: SystemParams, d_f=_FIG_DF, d_b=_FIG_DB) -> Topology:
    return Topology(d_f=np.asarray(d_f, float), d_b=np.asarray(d_b, float))


def figure_rows(
    number: int,
    params: SystemParams,
    trials: int = 500,
    seed: int = 0,
    threads: int = 1,
) -> list[SweepRow]:
    """Preset sweeps reproducing each figure's data at desk scale.

    3: EE vs CE power, ocetp vs aobws.       4: convergence summary vs rho.
    5: EE vs CE power per rho (aobws).       6: EE vs rho per RSU distance.
    7: EE vs rho per CE distance.            8: EE vs R_min per rho.
    Curve families are tagged in the algorithm column, e.g. aobws[rho=0.001].
    """
    if number == 3:
        spec = SweepSpec("p_ce_dbm", 0.0, 40.0, 2.0, trials, seed, ("ocetp", "aobws"))
        return run_sweep(spec, params, _fig_topology(params), threads)
    if number == 4:
        spec = SweepSpec("rho", 0.001, 0.009, 0.004, trials, seed, ("ocetp",))
        return run_sweep(spec, params, _fig_topology(params), threads)
    if number == 5:
        rows = []
        for rho in _FIG_RHOS:
            spec = SweepSpec("p_ce_dbm", 0.0, 40.0, 2.0, trials, seed, ("aobws",))
            rows += run_sweep(
                spec, replace(params, rho=rho), _fig_topology(params), threads,
                label=f"{{alg}}[rho={rho}]",
            )
        rows.sort(key=lambda r: (r.sweep_value, r.algorithm))
        return rows
    if number in (6, 7):
        pairs = [(50.0, 30.0), (40.0, 20.0)] if number == 6 else [(5.0, 3.0), (4.0, 2.0)]
        key = "db" if number == 6 else "df"
        rows = []
        for pair in pairs:
            topo = (
                _fig_topology(params, d_b=pair)
                if number == 6
                else _fig_topology(params, d_f=pair)
            )
            spec = SweepSpec("rho", 0.001, 0.009, 0.001, trials, seed, ("aobws", "es"))
            rows += run_sweep(
                spec, params, topo, threads,
                label=f"{{alg}}[{key}={pair[0]:g},{pair[1]:g}]",
            )
        rows.sort(key=lambda r: (r.sweep_value, r.algorithm))
        return rows
    if number == 8:
        rows = []
        for rho in _FIG_RHOS:
            spec = SweepSpec("r_min", 0.1, 1.0, 0.1, trials, seed, ("aobws",))
            rows += run_sweep(
                spec, replace(params, rho=rho),
                _fig_topology(params, d_f=(10.0, 5.0)), threads,
                label=f"{{alg}}[rho={rho}]",
            )
        rows.sort(key=lambda r: (r.sweep_value, r.algorithm))
        return rows
    raise ConfigError(f"no preset for figure {number}; expected 3-8")


# --- emission ----------------------------------------------------------------

_CSV_HEADER = [
    "sweep_var", "sweep_value", "algorithm", "mean_ee_bits_hz_j", "mean_rate",
    "mean_pce_w", "mean_gamma1", "mean_gamma2", "feasible_frac", "trials",
    "mean_iters",
]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, int):
        return str(value)
    return f"{value:.9g}"


def rows_to_csv(rows: list[SweepRow]) -> str:
    """Render rows as CSV text (header line, LF endings, 9 sig. digits)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_CSV_HEADER)
    for r in rows:
        writer.writerow([
            r.sweep_var, _fmt(r.sweep_value), r.algorithm,
            _fmt(r.mean_ee_bits_hz_j), _fmt(r.mean_rate), _fmt(r.mean_pce_w),
            _fmt(r.mean_gamma1), _fmt(r.mean_gamma2), _fmt(r.feasible_frac),
            _fmt(r.trials), _fmt(r.mean_iters),
        ])
    return buf.getvalue()


def rows_to_json(rows: list[SweepRow]) -> str:
    """Render rows as a JSON array of objects in CSV column order."""
    out = []
    for r in rows:
        out.append({
            "sweep_var": r.sweep_var,
            "sweep_value": r.sweep_value,
            "algorithm": r.algorithm,
            "mean_ee_bits_hz_j": r.mean_ee_bits_hz_j,
            "mean_rate": r.mean_rate,
            "mean_pce_w": r.mean_pce_w,
            "mean_gamma1": r.mean_gamma1,
            "mean_gamma2": r.mean_gamma2,
            "feasible_frac": r.feasible_frac,
            "trials": r.trials,
            "mean_iters": r.mean_iters,
        })
    return json.dumps(out, indent=2) + "\n"


def solution_to_dict(sol: Solution) -> dict:
    """JSON-ready view of a Solution."""
    return {
        "algorithm": sol.algorithm,
        "p_ce_w": sol.p_ce_w,
        "gamma1": sol.gamma[0],
        "gamma2": sol.gamma[1],
        "rate_bits_hz": sol.rate,
        "p_total_w": sol.p_total_w,
        "ee_bits_hz_j": sol.ee,
        "feasible": sol.feasible,
        "iterations": sol.iterations,
    }
