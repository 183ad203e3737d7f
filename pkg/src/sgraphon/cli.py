"""Command-line interface: ``sgraphon {embed,kshape,shape,dist,converge,verify}``.

Exit codes: 0 success, 2 input error, 3 domain precondition violated,
4 numerical guard tripped, 5 verification failure.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path
from typing import Any, Sequence

from sgraphon import __version__
from sgraphon.convergence import (
    DEFAULT_KMAX,
    DEFAULT_KS,
    DEFAULT_REFINE,
    DEFAULT_SAMPLES,
    FAMILIES,
    ConvergenceReport,
    SequenceSpec,
    cross_pipeline_check,
    generate_with_retries,
    test_kshape_convergence,
    test_shape_convergence,
)
from sgraphon.errors import DimensionMismatch, InvalidInput, SGraphonError
from sgraphon.grid import DEFAULT_DEPTH, RhoMetric, embed_graph
from sgraphon.io import (
    atomic_write,
    dumps,
    format_number,
    kshape_to_dict,
    load_json,
    measure_to_dict,
    read_cloud,
    read_graph,
    read_measure,
    shape_to_dict,
)
from sgraphon.rng import RNG_NAME
from sgraphon.shapes import KShapeCloud, ShapeCloud, build_kshape, build_shape, hausdorff_matrix, hausdorff_rho

EPILOG = """\
file formats (worked example: the single-edge graph K_2)

  graph file      first line "n m", then m lines "u v" (1-based):
                    2 1
                    1 2
  measure file    {"resolution": 2, "masses": [0, 0.5, 0.5, 0]}
                  (row-major cell masses; symmetric, non-negative, total 1)
  kernel file     {"rows": 2, "cols": 2, "weights": [0.75, 0.25, 0.25, 0.75]}
                  (doubly stochastic; partitions use the same layout, m x k)
  cloud file      {"kind": "kshape", "k": 2, "points": [[0, 0.5, 0.5, 0], ...],
                   "provenance": [...], "builder_params": {...}}
                  shape clouds have "kind": "shape" and measure records as points
  report          JSON (canonical) or CSV with columns
                  n,k,distance,uncertainty,budgets,seed,millis,index,kind

  Every output embeds the run configuration and tool version; numbers are
  written with 17 significant digits and re-running a recorded configuration
  reproduces the file byte for byte.

exit codes: 0 ok, 2 input error, 3 domain precondition (e.g. empty edge set),
            4 numerical guard, 5 verification failure
"""


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--seed", type=int, default=0)


def _budget(p: argparse.ArgumentParser) -> None:
    p.add_argument("--refine", type=int, default=DEFAULT_REFINE, help="max refinement factor R")
    p.add_argument("--samples", type=int, default=DEFAULT_SAMPLES, help="soft partitions per refinement")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sgraphon",
        description="Shapes, k-shapes and s-convergence of graph sequences.",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"sgraphon {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.RawDescriptionHelpFormatter

    p = sub.add_parser("embed", help="graph file -> measure file", epilog=EPILOG, formatter_class=fmt)
    p.add_argument("graph")
    p.add_argument("--out")

    p = sub.add_parser("kshape", help="measure file -> k-shape cloud", epilog=EPILOG, formatter_class=fmt)
    p.add_argument("measure")
    p.add_argument("--k", type=int, required=True)
    _budget(p)
    _common(p)

    p = sub.add_parser("shape", help="measure file -> shape cloud", epilog=EPILOG, formatter_class=fmt)
    p.add_argument("measure")
    p.add_argument("--kmax", type=int, default=DEFAULT_KMAX)
    _budget(p)
    _common(p)

    p = sub.add_parser("dist", help="Hausdorff distance between two clouds", epilog=EPILOG, formatter_class=fmt)
    p.add_argument("cloud_a")
    p.add_argument("cloud_b")
    p.add_argument("--metric", choices=("matrix", "rho"), default=None, help="default: matrix for k-shape clouds, rho for shape clouds")
    p.add_argument("--depth", type=int, default=DEFAULT_DEPTH)
    p.add_argument("--out")

    p = sub.add_parser("converge", help="s-convergence report for a graph sequence", epilog=EPILOG, formatter_class=fmt)
    p.add_argument("--spec", help="JSON sequence spec {family, sizes, seed, p, files}")
    p.add_argument("--family", choices=FAMILIES)
    p.add_argument("--sizes", type=_int_list)
    p.add_argument("--p", type=float, help="edge probability for erdos_renyi")
    p.add_argument("--files", nargs="+", help="graph files for the custom family")
    p.add_argument("--target", default="uniform", help="'uniform', 'none' (Cauchy diagnostics) or a measure file")
    p.add_argument("--pipeline", choices=("kshape", "shape", "both"), default="both")
    p.add_argument("--ks", type=_int_list, default=list(DEFAULT_KS))
    p.add_argument("--kmax", type=int, default=DEFAULT_KMAX)
    p.add_argument("--depth", type=int, default=DEFAULT_DEPTH)
    p.add_argument("--format", choices=("json", "csv"), default="json", help="format written to stdout when --out is absent")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (output is identical for any value)")
    p.add_argument("--timings", action="store_true", help="record wall-times (makes output non-reproducible)")
    p.add_argument("--dump-clouds", metavar="DIR", help="also write every per-index cloud to DIR")
    _budget(p)
    _common(p)

    p = sub.add_parser("verify", help="run the exact-identity suite", epilog=EPILOG, formatter_class=fmt)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--corrupt-mass", action="store_true", help=argparse.SUPPRESS)
    return parser


def _config(args: argparse.Namespace) -> dict[str, Any]:
    cfg = {k: v for k, v in vars(args).items() if v is not None}
    cfg["version"] = __version__
    cfg["rng"] = RNG_NAME
    return cfg


def _emit(text: str, out: str | None) -> None:
    if out:
        atomic_write(out, text)
    else:
        sys.stdout.write(text)


def cmd_embed(args: argparse.Namespace) -> int:
    m = embed_graph(read_graph(args.graph))
    _emit(dumps({**measure_to_dict(m), "config": _config(args)}) + "\n", args.out)
    return 0


def cmd_kshape(args: argparse.Namespace) -> int:
    cloud = build_kshape(read_measure(args.measure), args.k, args.refine, args.samples, args.seed)
    _emit(dumps({**kshape_to_dict(cloud), "config": _config(args)}) + "\n", args.out)
    return 0


def cmd_shape(args: argparse.Namespace) -> int:
    cloud = build_shape(read_measure(args.measure), args.kmax, args.refine, args.samples, args.seed)
    _emit(dumps({**shape_to_dict(cloud), "config": _config(args)}) + "\n", args.out)
    return 0


def _as_shape(c: KShapeCloud | ShapeCloud) -> ShapeCloud:
    return c.to_shape() if isinstance(c, KShapeCloud) else c


def cmd_dist(args: argparse.Namespace) -> int:
    a, b = read_cloud(args.cloud_a), read_cloud(args.cloud_b)
    both_k = isinstance(a, KShapeCloud) and isinstance(b, KShapeCloud)
    metric_name = args.metric or ("matrix" if both_k else "rho")
    if metric_name == "matrix":
        if not both_k:
            raise DimensionMismatch("the matrix metric needs two k-shape clouds")
        d, unc = hausdorff_matrix(a, b), 0.0
    else:
        metric = RhoMetric(args.depth)
        d, unc = hausdorff_rho(_as_shape(a), _as_shape(b), metric), metric.uncertainty
    record = {"distance": d, "uncertainty": unc, "metric": metric_name, "config": _config(args)}
    print(format_number(d))
    if args.out:
        atomic_write(args.out, dumps(record) + "\n")
    return 0


def _spec_from_args(args: argparse.Namespace) -> SequenceSpec:
    if args.spec:
        d = load_json(args.spec)
        try:
            return SequenceSpec.from_dict(d)
        except KeyError as exc:
            raise InvalidInput(f"{args.spec}: missing field {exc}") from None
    if args.files and not args.family:
        args.family = "custom"
    if not args.family:
        raise InvalidInput("give --spec, --family or --files")
    return SequenceSpec(args.family, tuple(args.sizes or ()), args.seed, args.p, tuple(args.files or ()))


def cmd_converge(args: argparse.Namespace) -> int:
    spec = _spec_from_args(args)
    graphs, retries = generate_with_retries(spec)
    if args.target == "uniform":
        target: Any = "uniform"
    elif args.target == "none":
        target = None
    else:
        target = read_measure(args.target)
    metric = RhoMetric(args.depth)
    reports: dict[str, ConvergenceReport] = {}
    t0 = time.perf_counter()
    if args.pipeline in ("kshape", "both"):
        reports["kshape"] = test_kshape_convergence(
            graphs, target, args.ks, args.refine, args.samples, args.seed, timings=args.timings, workers=args.jobs
        )
    if args.pipeline in ("shape", "both"):
        reports["shape"] = test_shape_convergence(
            graphs, target, args.kmax, args.refine, args.samples, metric, args.seed, timings=args.timings, workers=args.jobs
        )
    doc: dict[str, Any] = {
        "sequence": {**spec.to_dict(), "vertex_counts": [g.n for g in graphs], "er_retries": retries},
        "reports": {name: r.to_dict() for name, r in reports.items()},
        "config": _config(args),
    }
    if len(reports) == 2:
        doc["cross_pipeline"] = cross_pipeline_check(reports["kshape"], reports["shape"]).to_dict()
    if args.timings:
        doc["total_millis"] = round((time.perf_counter() - t0) * 1000, 3)
    csv_text = "".join(
        r.to_csv() if i == 0 else r.to_csv().split("\n", 1)[1] for i, r in enumerate(reports.values())
    )
    if args.out:
        base = Path(args.out)
        stem = base.with_suffix("") if base.suffix in (".json", ".csv") else base
        atomic_write(stem.with_suffix(".json"), dumps(doc) + "\n")
        atomic_write(stem.with_suffix(".csv"), csv_text)
    else:
        sys.stdout.write(dumps(doc) + "\n" if args.format == "json" else csv_text)
    if args.dump_clouds:
        _dump_clouds(args, graphs)
    return 0


def _dump_clouds(args: argparse.Namespace, graphs: Sequence) -> None:
    out = Path(args.dump_clouds)
    for idx, g in enumerate(graphs):
        m = embed_graph(g)
        if args.pipeline in ("kshape", "both"):
            for k in args.ks:
                c = build_kshape(m, k, args.refine, args.samples, args.seed)
                atomic_write(out / f"index{idx:03d}_k{k}.json", dumps({**kshape_to_dict(c), "config": _config(args)}) + "\n")
        if args.pipeline in ("shape", "both"):
            c = build_shape(m, args.kmax, args.refine, args.samples, args.seed)
            atomic_write(out / f"index{idx:03d}_shape.json", dumps({**shape_to_dict(c), "config": _config(args)}) + "\n")


def cmd_verify(args: argparse.Namespace) -> int:
    from sgraphon.verify import run_all

    results = run_all(args.seed, corrupt_mass=args.corrupt_mass)
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    if failed:
        print(f"verification failed: {failed[0].name}", file=sys.stderr)
        return 5
    print(f"all {len(results)} invariants passed")
    return 0


COMMANDS = {
    "embed": cmd_embed,
    "kshape": cmd_kshape,
    "shape": cmd_shape,
    "dist": cmd_dist,
    "converge": cmd_converge,
    "verify": cmd_verify,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except SGraphonError as exc:
        print(f"sgraphon {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
