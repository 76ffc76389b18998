"""Monte Carlo experiment driver.

``run_trial`` orchestrates one end-to-end experiment on one sampled
instance: pairwise matching, the recovery pipeline, and (optionally) the
below-threshold witness, with every statistic recorded in a
:class:`TrialResult`.  ``sweep`` runs trials over a parameter grid with
per-trial seeds derived deterministically from (master seed, cell identity,
trial index), so cell order and parallelism cannot change any result, and
aggregates one CSV row per cell.  ``scaling_experiment`` fits log-log slopes
of the unmatched-set sizes against theory, and ``region_grid_export``
rasterises the phase diagram.

CSV output is deterministic byte-for-byte for a fixed config: rows are
sorted by parameter key, floats are written with ``repr``, and fields whose
experiment did not run stay empty (never zero).  Wall-clock columns are
filled only when a config opts into timing, since timings are the one
non-reproducible measurement.
"""

from __future__ import annotations

import json
import math
import time
import warnings
from dataclasses import dataclass, field, replace
from itertools import product

import numpy as np

from .generate import Params, sample_instance
from .impossibility import map_failure_witness, singleton_sets
from .matching import (
    all_pairwise_matchings,
    classify_good_bad,
    exact_matching_estimator,
)
from .recovery import full_recovery
from .seeds import cell_key, trial_seed
from .thresholds import RegionLabel, classify_region, connectivity_param

__all__ = [
    "TrialResult",
    "run_trial",
    "SweepConfig",
    "SweepResult",
    "sweep",
    "ScalingResult",
    "scaling_experiment",
    "region_grid_export",
    "AGGREGATE_COLUMNS",
    "TRIAL_COLUMNS",
    "SCALING_COLUMNS",
    "REGION_COLUMNS",
    "format_csv",
]

EXPERIMENT_NAMES = ("recover", "match", "witness", "scaling")

AGGREGATE_COLUMNS = [
    "n", "a", "b", "s", "K", "k", "trials",
    "success_rate", "match_rate", "mean_overlap", "mean_bad",
    "mean_F12", "mean_F12capF13", "witness_rate", "mean_ms",
]

TRIAL_COLUMNS = [
    "n", "a", "b", "s", "K", "k", "trial", "seed",
    "overlap", "recovery_success", "degraded", "good_disagreements",
    "matching_success", "bad_vertex_count", "F12", "F12capF13",
    "R_star", "S_star", "witness_found", "wall_ms",
]

SCALING_COLUMNS = [
    "a", "b", "s", "K", "k", "trials", "points_used",
    "fitted_F12", "theory_F12",
    "fitted_F12capF13", "theory_F12capF13",
    "fitted_Rstar", "theory_Rstar",
]

REGION_COLUMNS = ["a", "b", "region"]


@dataclass
class TrialResult:
    """Everything measured in one trial; None marks a skipped experiment.

    ``recovery_success`` is exact: the signed label agreement reaches ±n,
    not merely an overlap that rounds to 1.  ``unmatched_sizes`` maps each
    pair (i, j) to |F_ij|; ``intersect_sizes`` maps (i, j) with
    1 <= i < j to |F_1i ∩ F_1j| in anchor labels.
    """

    params: Params
    seed: int
    overlap: float | None = None
    recovery_success: bool | None = None
    degraded: bool | None = None
    good_disagreements: int | None = None
    matching_success: bool | None = None
    bad_vertex_count: int | None = None
    unmatched_sizes: dict[tuple[int, int], int] | None = None
    intersect_sizes: dict[tuple[int, int], int] | None = None
    r_star_size: int | None = None
    s_star_size: int | None = None
    witness_found: bool | None = None
    wall_ms: float = 0.0

    def replay_key(self) -> tuple:
        """All reproducible fields (everything except wall time)."""
        return (
            self.params, self.seed, self.overlap, self.recovery_success,
            self.degraded, self.good_disagreements, self.matching_success,
            self.bad_vertex_count,
            tuple(sorted(self.unmatched_sizes.items())) if self.unmatched_sizes else None,
            tuple(sorted(self.intersect_sizes.items())) if self.intersect_sizes else None,
            self.r_star_size, self.s_star_size, self.witness_found,
        )


def run_trial(
    params: Params,
    seed: int,
    mode: str = "seeded",
    experiments: tuple[str, ...] = ("recover", "match"),
) -> TrialResult:
    """Sample one instance and run the requested experiments on it.

    Deterministic given ``(params, seed, mode, experiments)`` in every field
    except wall time.  Experiments needing at least two children (match,
    witness) leave their fields None at K = 1; a degraded recovery run is
    recorded like any other.
    """
    bad_names = set(experiments) - {"recover", "match", "witness"}
    if bad_names:
        raise ValueError(f"unknown experiments: {sorted(bad_names)}")
    start = time.perf_counter()
    inst = sample_instance(params, seed)
    result = TrialResult(params=params, seed=seed)
    fam = None
    if params.K >= 2 and ("recover" in experiments or "match" in experiments):
        fam = all_pairwise_matchings(inst, params.k, mode)
        classes = classify_good_bad(fam)
        result.bad_vertex_count = len(classes.bad)
        result.unmatched_sizes = {
            pair: int(fam.unmatched_mask(*pair).sum()) for pair in fam.pairs()
        }
        result.intersect_sizes = {
            (i, j): int(
                (fam.unmatched_mask(0, i) & fam.unmatched_mask(0, j)).sum()
            )
            for i in range(1, params.K)
            for j in range(i + 1, params.K)
        }
    if "match" in experiments and params.K >= 2:
        estimate = exact_matching_estimator(inst, params.k, mode=mode, family=fam)
        result.matching_success = estimate.success
    if "recover" in experiments:
        final = full_recovery(inst, mode=mode, family=fam)
        signed = int(
            np.dot(
                inst.sigma_star.astype(np.int64), final.labels.astype(np.int64)
            )
        )
        result.overlap = abs(signed) / params.n
        result.recovery_success = abs(signed) == params.n
        result.degraded = final.degraded
        result.good_disagreements = final.good_disagreements
    if "witness" in experiments and params.K >= 2:
        report = map_failure_witness(inst)
        result.r_star_size = len(report.r_star)
        result.s_star_size = len(report.s_star)
        result.witness_found = report.witness_found
    result.wall_ms = (time.perf_counter() - start) * 1000.0
    return result


def _sorted_unique(values, caster) -> tuple:
    return tuple(sorted({caster(v) for v in values}))


@dataclass
class SweepConfig:
    """Grids, trial count, seed, and experiment selection for one sweep.

    Grid values are deduplicated and sorted on construction, and every grid
    cell is validated eagerly through Params.  The ``scaling`` experiment
    needs at least four strictly ascending n values; the other experiments
    run per cell.  ``record_timing`` opts into the wall-clock columns (off
    by default so sweep CSVs are byte-reproducible).
    """

    n_values: tuple[int, ...]
    a_values: tuple[float, ...]
    b_values: tuple[float, ...]
    s_values: tuple[float, ...]
    K_values: tuple[int, ...] = (3,)
    k: int = 13
    eps: float = 0.05
    trials: int = 10
    master_seed: int = 0
    experiments: tuple[str, ...] = ("recover",)
    mode: str = "seeded"
    record_timing: bool = False
    per_trial: bool = False

    def __post_init__(self):
        self.n_values = _sorted_unique(self.n_values, int)
        self.a_values = _sorted_unique(self.a_values, float)
        self.b_values = _sorted_unique(self.b_values, float)
        self.s_values = _sorted_unique(self.s_values, float)
        self.K_values = _sorted_unique(self.K_values, int)
        self.experiments = tuple(self.experiments)
        for grid_name in ("n_values", "a_values", "b_values", "s_values", "K_values"):
            if not getattr(self, grid_name):
                raise ValueError(f"{grid_name} must be non-empty")
        bad_names = set(self.experiments) - set(EXPERIMENT_NAMES)
        if bad_names:
            raise ValueError(f"unknown experiments: {sorted(bad_names)}")
        if not self.experiments:
            raise ValueError("at least one experiment is required")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.mode not in ("seeded", "bruteforce"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if "scaling" in self.experiments and len(self.n_values) < 4:
            raise ValueError("the scaling experiment needs at least 4 distinct n values")
        for cell in self.cells():
            self.cell_params(cell)

    def cells(self) -> list[tuple]:
        return [
            (n, a, b, s, K)
            for n in self.n_values
            for a in self.a_values
            for b in self.b_values
            for s in self.s_values
            for K in self.K_values
        ]

    def cell_params(self, cell: tuple) -> Params:
        n, a, b, s, K = cell
        return Params(n=n, a=a, b=b, s=s, K=K, k=self.k, eps=self.eps)

    def to_json(self) -> str:
        payload = {
            "n_values": list(self.n_values),
            "a_values": list(self.a_values),
            "b_values": list(self.b_values),
            "s_values": list(self.s_values),
            "K_values": list(self.K_values),
            "k": self.k,
            "eps": self.eps,
            "trials": self.trials,
            "master_seed": self.master_seed,
            "experiments": list(self.experiments),
            "mode": self.mode,
            "record_timing": self.record_timing,
            "per_trial": self.per_trial,
        }
        return json.dumps(payload, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SweepConfig":
        payload = json.loads(text)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(payload) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        payload["experiments"] = tuple(payload.get("experiments", ("recover",)))
        for grid in ("n_values", "a_values", "b_values", "s_values", "K_values"):
            if grid in payload:
                payload[grid] = tuple(payload[grid])
        return cls(**payload)


@dataclass
class SweepResult:
    """Rows produced by one sweep, ready for the CSV writers."""

    cell_rows: list[dict]
    trial_rows: list[dict] = field(default_factory=list)
    scaling_rows: list[dict] = field(default_factory=list)


def _mean(values) -> float | None:
    kept = [float(v) for v in values if v is not None]
    if not kept:
        return None
    return sum(kept) / len(kept)


def _aggregate_row(params: Params, results: list[TrialResult], record_timing: bool) -> dict:
    row = {
        "n": params.n,
        "a": params.a,
        "b": params.b,
        "s": params.s,
        "K": params.K,
        "k": params.k,
        "trials": len(results),
        "success_rate": _mean(r.recovery_success for r in results),
        "match_rate": _mean(r.matching_success for r in results),
        "mean_overlap": _mean(r.overlap for r in results),
        "mean_bad": _mean(r.bad_vertex_count for r in results),
        "mean_F12": _mean(
            r.unmatched_sizes.get((0, 1)) if r.unmatched_sizes else None
            for r in results
        ),
        "mean_F12capF13": _mean(
            r.intersect_sizes.get((1, 2)) if r.intersect_sizes else None
            for r in results
        ),
        "witness_rate": _mean(r.witness_found for r in results),
        "mean_ms": _mean(r.wall_ms for r in results) if record_timing else None,
    }
    return row


def trial_row(params: Params, index: int, r: TrialResult, record_timing: bool) -> dict:
    return {
        "n": params.n,
        "a": params.a,
        "b": params.b,
        "s": params.s,
        "K": params.K,
        "k": params.k,
        "trial": index,
        "seed": r.seed,
        "overlap": r.overlap,
        "recovery_success": r.recovery_success,
        "degraded": r.degraded,
        "good_disagreements": r.good_disagreements,
        "matching_success": r.matching_success,
        "bad_vertex_count": r.bad_vertex_count,
        "F12": r.unmatched_sizes.get((0, 1)) if r.unmatched_sizes else None,
        "F12capF13": r.intersect_sizes.get((1, 2)) if r.intersect_sizes else None,
        "R_star": r.r_star_size,
        "S_star": r.s_star_size,
        "witness_found": r.witness_found,
        "wall_ms": r.wall_ms if record_timing else None,
    }


def sweep(cfg: SweepConfig) -> SweepResult:
    """Run every cell of the grid; aggregate per cell, optionally per trial.

    Per-trial seeds depend only on (master seed, cell parameters, trial
    index), so permuting cells or splitting the grid leaves every trial
    unchanged.  Cells run in sorted parameter order and rows come out
    already sorted.
    """
    trial_experiments = tuple(e for e in cfg.experiments if e != "scaling")
    result = SweepResult(cell_rows=[])
    if trial_experiments:
        for cell in cfg.cells():
            params = cfg.cell_params(cell)
            key = cell_key(params.n, params.a, params.b, params.s, params.K, params.k)
            trial_results = []
            for t in range(cfg.trials):
                seed = trial_seed(cfg.master_seed, key, t)
                trial_results.append(
                    run_trial(params, seed, mode=cfg.mode, experiments=trial_experiments)
                )
            result.cell_rows.append(
                _aggregate_row(params, trial_results, cfg.record_timing)
            )
            if cfg.per_trial:
                result.trial_rows.extend(
                    trial_row(params, t, r, cfg.record_timing)
                    for t, r in enumerate(trial_results)
                )
    if "scaling" in cfg.experiments:
        for a, b, s, K in product(cfg.a_values, cfg.b_values, cfg.s_values, cfg.K_values):
            if K < 2:
                warnings.warn(f"scaling skipped at K={K}: needs at least two children")
                continue
            base = Params(
                n=cfg.n_values[0], a=a, b=b, s=s, K=K, k=cfg.k, eps=cfg.eps
            )
            fit = scaling_experiment(base, cfg.n_values, cfg.trials, cfg.master_seed)
            result.scaling_rows.append(
                {
                    "a": a,
                    "b": b,
                    "s": s,
                    "K": K,
                    "k": cfg.k,
                    "trials": cfg.trials,
                    "points_used": fit.points_used,
                    "fitted_F12": fit.fitted_unmatched,
                    "theory_F12": fit.theory_unmatched,
                    "fitted_F12capF13": fit.fitted_intersection,
                    "theory_F12capF13": fit.theory_intersection,
                    "fitted_Rstar": fit.fitted_singletons,
                    "theory_Rstar": fit.theory_singletons,
                }
            )
    return result


@dataclass
class ScalingResult:
    """Log-log slope fits of the unmatched-set sizes against n.

    ``mean_*`` hold the per-n averages in n order.  Fits are least-squares
    slopes over the points with positive mean (zero-mean points are dropped
    with a warning); a fit is None when fewer than two points remain.
    Intersection fields are None when K < 3.
    """

    n_values: tuple[int, ...]
    trials: int
    mean_unmatched: list[float]
    mean_intersection: list[float] | None
    mean_singletons: list[float]
    fitted_unmatched: float | None
    fitted_intersection: float | None
    fitted_singletons: float | None
    theory_unmatched: float
    theory_intersection: float | None
    theory_singletons: float
    points_used: int


def _fit_slope(n_values, means, label: str) -> tuple[float | None, int]:
    points = [(n, m) for n, m in zip(n_values, means) if m > 0]
    dropped = len(means) - len(points)
    if dropped:
        warnings.warn(
            f"{label}: dropped {dropped} zero-mean point(s) from the exponent fit"
        )
    if len(points) < 2:
        return None, len(points)
    logs_n = np.log([p[0] for p in points])
    logs_m = np.log([p[1] for p in points])
    slope = float(np.polyfit(logs_n, logs_m, 1)[0])
    return slope, len(points)


def scaling_experiment(
    base: Params,
    n_list,
    trials: int,
    master_seed: int = 0,
) -> ScalingResult:
    """Average |F_12|, |F_12 ∩ F_13|, |R*| over trials at each n and fit slopes.

    ``base`` fixes (a, b, s, K, k); each n in the strictly ascending
    ``n_list`` (at least four points) reuses it with n replaced.  Reported
    theory exponents: 1 - s^2 T_c for |F_12|, 1 - s(1-(1-s)^2) T_c for the
    pair intersection, and 1 - s(1-(1-s)^(K-1)) T_c for the singleton set.
    """
    n_list = [int(n) for n in n_list]
    if len(n_list) < 4:
        raise ValueError("scaling needs at least four n values")
    if any(x >= y for x, y in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be strictly ascending")
    if base.K < 2:
        raise ValueError("scaling needs at least two children")
    if trials < 1:
        raise ValueError("trials must be at least 1")
    track_intersection = base.K >= 3
    mean_unmatched: list[float] = []
    mean_intersection: list[float] = []
    mean_singletons: list[float] = []
    for n in n_list:
        params = replace(base, n=n)
        key = cell_key(params.n, params.a, params.b, params.s, params.K, params.k)
        sizes_f = []
        sizes_i = []
        sizes_r = []
        for t in range(trials):
            inst = sample_instance(params, trial_seed(master_seed, key, t))
            fam = all_pairwise_matchings(inst, params.k)
            sizes_f.append(int(fam.unmatched_mask(0, 1).sum()))
            if track_intersection:
                sizes_i.append(
                    int((fam.unmatched_mask(0, 1) & fam.unmatched_mask(0, 2)).sum())
                )
            sizes_r.append(len(singleton_sets(inst).r_star))
        mean_unmatched.append(sum(sizes_f) / trials)
        if track_intersection:
            mean_intersection.append(sum(sizes_i) / trials)
        mean_singletons.append(sum(sizes_r) / trials)
    s, K = base.s, base.K
    tc = connectivity_param(base.a, base.b)
    fitted_f, used_f = _fit_slope(n_list, mean_unmatched, "unmatched F_12")
    if track_intersection:
        fitted_i, _ = _fit_slope(n_list, mean_intersection, "intersection F_12 ∩ F_13")
    else:
        fitted_i = None
    fitted_r, _ = _fit_slope(n_list, mean_singletons, "singleton R*")
    return ScalingResult(
        n_values=tuple(n_list),
        trials=trials,
        mean_unmatched=mean_unmatched,
        mean_intersection=mean_intersection if track_intersection else None,
        mean_singletons=mean_singletons,
        fitted_unmatched=fitted_f,
        fitted_intersection=fitted_i,
        fitted_singletons=fitted_r,
        theory_unmatched=1.0 - s * s * tc,
        theory_intersection=(
            1.0 - s * (1.0 - (1.0 - s) ** 2) * tc if track_intersection else None
        ),
        theory_singletons=1.0 - s * (1.0 - (1.0 - s) ** (K - 1)) * tc,
        points_used=used_f,
    )


def _grid_values(step: float, upper: float) -> list[float]:
    count = int(math.floor(upper / step + 1e-9))
    return [round(i * step, 10) for i in range(1, count + 1)]


def region_grid_export(
    s: float, a_max: float, b_max: float, step: float
) -> tuple[list[tuple[float, float, str]], dict[str, int]]:
    """Rasterise the K=3 phase diagram at fixed ``s``.

    The grid runs over multiples of ``step`` in (0, a_max] x (0, b_max].
    Classification runs at strict tolerance (no Boundary rows); the summary
    counts grid cells per region label in a fixed label order.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    a_values = _grid_values(step, a_max)
    b_values = _grid_values(step, b_max)
    if not a_values or not b_values:
        raise ValueError("ranges must contain at least one grid point")
    rows = []
    counts = {label.value: 0 for label in RegionLabel if label is not RegionLabel.BOUNDARY}
    for a in a_values:
        for b in b_values:
            label = classify_region(a, b, s, tol=0.0).value
            rows.append((a, b, label))
            counts[label] += 1
    return rows, counts


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_csv(columns: list[str], rows: list[dict], sort_by: list[str] | None = None) -> str:
    """Render rows to CSV text deterministically (sorted, repr floats)."""
    ordered = rows
    if sort_by:
        ordered = sorted(rows, key=lambda r: tuple(r[c] for c in sort_by))
    lines = [",".join(columns)]
    for row in ordered:
        lines.append(",".join(_format_cell(row.get(c)) for c in columns))
    return "\n".join(lines) + "\n"


def cells_csv(result: SweepResult) -> str:
    """Aggregated per-cell CSV for a sweep result."""
    return format_csv(
        AGGREGATE_COLUMNS, result.cell_rows, sort_by=["n", "a", "b", "s", "K", "k"]
    )


def trials_csv(result: SweepResult) -> str:
    """Per-trial CSV for a sweep run with per_trial enabled."""
    return format_csv(
        TRIAL_COLUMNS,
        result.trial_rows,
        sort_by=["n", "a", "b", "s", "K", "k", "trial"],
    )


def scaling_csv(result: SweepResult) -> str:
    """Exponent-fit CSV for a sweep run with the scaling experiment."""
    return format_csv(
        SCALING_COLUMNS, result.scaling_rows, sort_by=["a", "b", "s", "K", "k"]
    )


def regions_csv(rows: list[tuple[float, float, str]]) -> str:
    """CSV for a region grid export (rows are already in grid order)."""
    dict_rows = [{"a": a, "b": b, "region": label} for a, b, label in rows]
    return format_csv(REGION_COLUMNS, dict_rows)
