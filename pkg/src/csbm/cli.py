"""Command-line entry points.

Subcommands: ``gen`` writes one sampled instance to a directory; ``recover``,
``match``, and ``witness`` run repeated trials at one parameter point and
print per-trial lines; ``sweep`` drives a JSON-configured grid to CSV;
``scaling`` fits the unmatched-set exponents; ``regions`` rasterises the
phase diagram.  All randomness flows from ``--seed`` through the same
derivation the sweep harness uses, so a CLI trial reproduces the library
call exactly.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .generate import Params, sample_instance, sample_instance_partition
from .graphs import write_edge_list
from .harness import (
    SCALING_COLUMNS,
    TRIAL_COLUMNS,
    SweepConfig,
    cells_csv,
    format_csv,
    region_grid_export,
    regions_csv,
    run_trial,
    scaling_csv,
    scaling_experiment,
    sweep,
    trial_row,
    trials_csv,
)
from .impossibility import map_failure_witness
from .seeds import cell_key, trial_seed

__all__ = ["main"]


def _add_model_arguments(parser: argparse.ArgumentParser, with_core: bool = True) -> None:
    parser.add_argument("--n", type=int, required=True, help="vertex count")
    parser.add_argument("--a", type=float, required=True, help="intra-community coefficient")
    parser.add_argument("--b", type=float, required=True, help="inter-community coefficient")
    parser.add_argument("--s", type=float, required=True, help="edge retention probability")
    parser.add_argument("--K", type=int, default=3, help="number of children (default 3)")
    if with_core:
        parser.add_argument("--k", type=int, default=13, help="core order (default 13)")
        parser.add_argument("--eps", type=float, default=0.05, help="init accuracy target")


def _params_from(args: argparse.Namespace) -> Params:
    return Params(
        n=args.n,
        a=args.a,
        b=args.b,
        s=args.s,
        K=args.K,
        k=getattr(args, "k", 13),
        eps=getattr(args, "eps", 0.05),
    )


def _trial_seeds(args: argparse.Namespace, params: Params) -> list[int]:
    key = cell_key(params.n, params.a, params.b, params.s, params.K, params.k)
    return [trial_seed(args.seed, key, t) for t in range(args.trials)]


def _cmd_gen(args: argparse.Namespace) -> int:
    params = _params_from(args)
    sampler = sample_instance_partition if args.partition else sample_instance
    inst = sampler(params, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_edge_list(inst.parent, out / "parent.edges")
    for j, child in enumerate(inst.children, start=1):
        write_edge_list(child, out / f"child_{j}.edges")
    (out / "sigma.txt").write_text(
        "\n".join("+1" if v > 0 else "-1" for v in inst.sigma_star) + "\n"
    )
    for j in range(1, params.K):
        (out / f"pi_{j + 1}.txt").write_text(
            "\n".join(str(int(v)) for v in inst.pi_star[j]) + "\n"
        )
    meta = {
        "n": params.n,
        "a": params.a,
        "b": params.b,
        "s": params.s,
        "K": params.K,
        "k": params.k,
        "eps": params.eps,
        "seed": args.seed,
        "construction": "partition" if args.partition else "subsample",
        "parent_edges": inst.parent.edge_count,
        "child_edges": [c.edge_count for c in inst.children],
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    print(f"wrote instance to {out} ({inst.parent.edge_count} parent edges)")
    return 0


def _append_csv(path: Path, columns: list[str], rows: list[dict]) -> None:
    text = format_csv(columns, rows)
    lines = text.splitlines(keepends=True)
    if path.exists() and path.stat().st_size > 0:
        lines = lines[1:]
    with path.open("a") as fh:
        fh.writelines(lines)


def _cmd_recover(args: argparse.Namespace) -> int:
    params = _params_from(args)
    rows = []
    print("trial overlap success bad_vertices degraded ms")
    for t, seed in enumerate(_trial_seeds(args, params)):
        result = run_trial(params, seed, mode=args.mode, experiments=("recover",))
        bad = "-" if result.bad_vertex_count is None else result.bad_vertex_count
        print(
            f"{t} {result.overlap:.6f} {int(result.recovery_success)} "
            f"{bad} {int(result.degraded)} {result.wall_ms:.1f}"
        )
        rows.append(trial_row(params, t, result, record_timing=args.timing))
    if args.csv:
        _append_csv(Path(args.csv), TRIAL_COLUMNS, rows)
    return 0


def _cmd_match(args: argparse.Namespace) -> int:
    params = _params_from(args)
    if params.K < 2:
        raise ValueError("matching needs at least two children (K >= 2)")
    pair_names = [
        f"M{i + 1}{j + 1}" for i in range(params.K) for j in range(i + 1, params.K)
    ]
    records = []
    for t, seed in enumerate(_trial_seeds(args, params)):
        result = run_trial(params, seed, mode=args.mode, experiments=("match",))
        fractions = {
            name: 1.0 - result.unmatched_sizes[pair] / params.n
            for name, pair in zip(
                pair_names,
                [(i, j) for i in range(params.K) for j in range(i + 1, params.K)],
            )
        }
        records.append(
            {
                "trial": t,
                **{name: round(frac, 6) for name, frac in fractions.items()},
                "bad_vertices": result.bad_vertex_count,
                "estimator_success": result.matching_success,
            }
        )
    if args.json:
        print(json.dumps(records, indent=2))
        return 0
    header = ["trial", *pair_names, "bad_vertices", "estimator_success"]
    print(" ".join(header))
    for rec in records:
        print(" ".join(str(rec[h]) for h in header))
    return 0


def _cmd_witness(args: argparse.Namespace) -> int:
    params = Params(n=args.n, a=args.a, b=args.b, s=args.s, K=args.K)
    if params.K < 2:
        raise ValueError("the witness needs at least two children (K >= 2)")
    print("trial R_star S_star S_plus S_minus witness")
    key = cell_key(params.n, params.a, params.b, params.s, params.K, params.k)
    for t in range(args.trials):
        inst = sample_instance(params, trial_seed(args.seed, key, t))
        report = map_failure_witness(inst)
        plus = sum(1 for i in report.s_star if inst.sigma_star[i] > 0)
        minus = len(report.s_star) - plus
        verdict = "-" if report.witness_found is None else int(report.witness_found)
        print(
            f"{t} {len(report.r_star)} {len(report.s_star)} {plus} {minus} {verdict}"
        )
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    cfg = SweepConfig.from_json(Path(args.config).read_text())
    result = sweep(cfg)
    cells_text = cells_csv(result)
    if args.out:
        Path(args.out).write_text(cells_text)
        print(f"wrote {len(result.cell_rows)} cell rows to {args.out}")
    else:
        sys.stdout.write(cells_text)
    if args.per_trial_out:
        if not cfg.per_trial:
            raise ValueError("config must set per_trial=true to export per-trial rows")
        Path(args.per_trial_out).write_text(trials_csv(result))
        print(f"wrote {len(result.trial_rows)} trial rows to {args.per_trial_out}")
    if args.scaling_out:
        if "scaling" not in cfg.experiments:
            raise ValueError("config must include the scaling experiment")
        Path(args.scaling_out).write_text(scaling_csv(result))
        print(f"wrote {len(result.scaling_rows)} scaling rows to {args.scaling_out}")
    return 0


def _cmd_scaling(args: argparse.Namespace) -> int:
    n_list = [int(x) for x in args.n_list.split(",") if x.strip()]
    base = Params(
        n=n_list[0], a=args.a, b=args.b, s=args.s, K=args.K, k=args.k
    )
    fit = scaling_experiment(base, n_list, args.trials, args.seed)
    for name, ns, means in (
        ("F12", fit.n_values, fit.mean_unmatched),
        ("F12capF13", fit.n_values, fit.mean_intersection),
        ("Rstar", fit.n_values, fit.mean_singletons),
    ):
        if means is None:
            continue
        print(f"{name} means: " + " ".join(f"{n}:{m:.2f}" for n, m in zip(ns, means)))
    print(f"fitted F12 exponent: {fit.fitted_unmatched} (theory {fit.theory_unmatched})")
    if fit.fitted_intersection is not None or fit.theory_intersection is not None:
        print(
            f"fitted F12capF13 exponent: {fit.fitted_intersection} "
            f"(theory {fit.theory_intersection})"
        )
    print(f"fitted Rstar exponent: {fit.fitted_singletons} (theory {fit.theory_singletons})")
    if args.out:
        row = {
            "a": base.a,
            "b": base.b,
            "s": base.s,
            "K": base.K,
            "k": base.k,
            "trials": args.trials,
            "points_used": fit.points_used,
            "fitted_F12": fit.fitted_unmatched,
            "theory_F12": fit.theory_unmatched,
            "fitted_F12capF13": fit.fitted_intersection,
            "theory_F12capF13": fit.theory_intersection,
            "fitted_Rstar": fit.fitted_singletons,
            "theory_Rstar": fit.theory_singletons,
        }
        Path(args.out).write_text(format_csv(SCALING_COLUMNS, [row]))
        print(f"wrote scaling row to {args.out}")
    return 0


def _cmd_regions(args: argparse.Namespace) -> int:
    rows, counts = region_grid_export(args.s, args.amax, args.bmax, args.step)
    text = regions_csv(rows)
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {len(rows)} region rows to {args.out}")
    else:
        sys.stdout.write(text)
    if args.summary:
        for label, count in counts.items():
            if count:
                print(f"{label}: {count}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="csbm",
        description="Correlated block-model experiments: generation, matching, recovery",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="sample one instance and write it to a directory")
    _add_model_arguments(gen)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="output directory")
    gen.add_argument(
        "--partition",
        action="store_true",
        help="use the pair-class construction (records classes for balance checks)",
    )
    gen.set_defaults(func=_cmd_gen)

    recover = sub.add_parser("recover", help="run recovery trials at one parameter point")
    _add_model_arguments(recover)
    recover.add_argument("--trials", type=int, default=10)
    recover.add_argument("--seed", type=int, default=0)
    recover.add_argument("--mode", choices=("seeded", "bruteforce"), default="seeded")
    recover.add_argument("--csv", help="append per-trial rows to this CSV")
    recover.add_argument(
        "--timing", action="store_true", help="fill the wall_ms column in --csv output"
    )
    recover.set_defaults(func=_cmd_recover)

    match = sub.add_parser("match", help="run matching trials at one parameter point")
    _add_model_arguments(match)
    match.add_argument("--trials", type=int, default=10)
    match.add_argument("--seed", type=int, default=0)
    match.add_argument("--mode", choices=("seeded", "bruteforce"), default="seeded")
    match.add_argument("--json", action="store_true", help="emit JSON instead of a table")
    match.set_defaults(func=_cmd_match)

    witness = sub.add_parser("witness", help="singleton sets and the failure witness")
    witness.add_argument("--n", type=int, required=True)
    witness.add_argument("--a", type=float, required=True)
    witness.add_argument("--b", type=float, required=True)
    witness.add_argument("--s", type=float, required=True)
    witness.add_argument("--K", type=int, default=3)
    witness.add_argument("--trials", type=int, default=10)
    witness.add_argument("--seed", type=int, default=0)
    witness.set_defaults(func=_cmd_witness)

    sweep_cmd = sub.add_parser("sweep", help="run a JSON-configured parameter sweep")
    sweep_cmd.add_argument("--config", required=True, help="path to a JSON sweep config")
    sweep_cmd.add_argument("--out", help="write the aggregated CSV here (default stdout)")
    sweep_cmd.add_argument("--per-trial-out", help="write per-trial rows here")
    sweep_cmd.add_argument("--scaling-out", help="write scaling-fit rows here")
    sweep_cmd.set_defaults(func=_cmd_sweep)

    scaling = sub.add_parser("scaling", help="fit unmatched-set scaling exponents")
    scaling.add_argument("--a", type=float, required=True)
    scaling.add_argument("--b", type=float, required=True)
    scaling.add_argument("--s", type=float, required=True)
    scaling.add_argument("--K", type=int, default=3)
    scaling.add_argument("--k", type=int, default=13)
    scaling.add_argument(
        "--n-list", required=True, help="comma-separated ascending sizes, at least four"
    )
    scaling.add_argument("--trials", type=int, default=20)
    scaling.add_argument("--seed", type=int, default=0)
    scaling.add_argument("--out", help="write one CSV row of fits here")
    scaling.set_defaults(func=_cmd_scaling)

    regions = sub.add_parser("regions", help="rasterise the phase diagram at fixed s")
    regions.add_argument("--s", type=float, required=True)
    regions.add_argument("--amax", type=float, required=True)
    regions.add_argument("--bmax", type=float, required=True)
    regions.add_argument("--step", type=float, required=True)
    regions.add_argument("--out", help="write the CSV here (default stdout)")
    regions.add_argument("--summary", action="store_true", help="print per-region counts")
    regions.set_defaults(func=_cmd_regions)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
