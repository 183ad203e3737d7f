"""Graph-sequence generators and the two s-convergence pipelines.

``test_kshape_convergence`` compares k-shape clouds in the matrix topology;
``test_shape_convergence`` compares shape clouds under the truncated metric.
Both compute trend-based verdicts only: finite clouds cannot refute
convergence, and no rates are assumed.

All clouds in one run use the same sampling seed, so every index (and the
target) is probed with the same partition streams; graph generation uses
its own counter-based streams per sequence index.
"""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy.stats import spearmanr

from sgraphon.errors import EmptyEdgeSet, InfeasibleSpec, InvalidInput, MismatchedSequences
from sgraphon.grid import Graph, GridMeasure, RhoMetric, embed_graph
from sgraphon.rng import stream
from sgraphon.shapes import (
    HARD_CAP,
    KShapeCloud,
    ShapeCloud,
    build_kshape,
    build_shape,
    hausdorff_matrix,
    hausdorff_rho,
    uniform_kshape,
)

FAMILIES = ("erdos_renyi", "complete_bipartite", "star", "clique", "custom")
MAX_ER_RETRIES = 10_000
SPEARMAN_THRESHOLD = 0.8

DEFAULT_KS = (1, 2, 3, 4)
DEFAULT_KMAX = 4
DEFAULT_REFINE = 2
DEFAULT_SAMPLES = 500


@dataclass(frozen=True)
class SequenceSpec:
    family: str
    sizes: tuple = ()
    seed: int = 0
    p: float | None = None
    files: tuple = ()

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise InfeasibleSpec(f"unknown family {self.family!r}; choose from {', '.join(FAMILIES)}")
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        object.__setattr__(self, "files", tuple(str(f) for f in self.files))
        if self.family == "custom":
            if not self.files:
                raise InfeasibleSpec("custom family needs a list of graph files")
            return
        if not self.sizes:
            raise InfeasibleSpec("sizes must be non-empty")
        if any(b <= a for a, b in zip(self.sizes, self.sizes[1:])):
            raise InfeasibleSpec("sizes must be strictly increasing")
        if self.family == "erdos_renyi":
            if self.p is None or not 0 < self.p <= 1:
                raise InfeasibleSpec("erdos_renyi needs 0 < p <= 1")
            if self.sizes[0] < 2:
                raise InfeasibleSpec("erdos_renyi needs n >= 2")
        elif self.family == "star" and self.sizes[0] < 2:
            raise InfeasibleSpec("star needs n >= 2 leaves")
        elif self.family in ("clique", "complete_bipartite") and self.sizes[0] < 2:
            raise InfeasibleSpec(f"{self.family} needs n >= 2")

    def to_dict(self) -> dict[str, Any]:
        return {"family": self.family, "sizes": list(self.sizes), "seed": self.seed, "p": self.p, "files": list(self.files)}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SequenceSpec":
        return cls(d["family"], tuple(d.get("sizes", ())), int(d.get("seed", 0)), d.get("p"), tuple(d.get("files", ())))


def erdos_renyi(n: int, p: float, seed: int, index: int = 0) -> tuple[Graph, int]:
    """G(n, p) redrawn until it has an edge; returns the graph and the number of redraws."""
    iu, ju = np.triu_indices(n, 1)
    for attempt in range(MAX_ER_RETRIES):
        mask = stream(seed, index, attempt).random(iu.size) < p
        if mask.any():
            return Graph(n, frozenset(zip((iu[mask] + 1).tolist(), (ju[mask] + 1).tolist()))), attempt
    raise EmptyEdgeSet(f"G({n}, {p}) produced no edges in {MAX_ER_RETRIES} draws")


def clique(n: int) -> Graph:
    return Graph(n, frozenset((u, v) for u in range(1, n + 1) for v in range(u + 1, n + 1)))


def star(leaves: int) -> Graph:
    return Graph(leaves + 1, frozenset((1, v) for v in range(2, leaves + 2)))


def complete_bipartite(n: int) -> Graph:
    a = n // 2
    return Graph(n, frozenset((u, v) for u in range(1, a + 1) for v in range(a + 1, n + 1)))


def generate_with_retries(spec: SequenceSpec) -> tuple[list[Graph], list[int]]:
    if spec.family == "custom":
        from sgraphon.io import read_graph

        graphs = [read_graph(f) for f in spec.files]
        for f, g in zip(spec.files, graphs):
            if not g.edges:
                raise EmptyEdgeSet(f"{f}: graph has an empty edge set")
        return graphs, [0] * len(graphs)
    graphs, retries = [], []
    for idx, n in enumerate(spec.sizes):
        tries = 0
        if spec.family == "erdos_renyi":
            g, tries = erdos_renyi(n, float(spec.p), spec.seed, idx)
        elif spec.family == "clique":
            g = clique(n)
        elif spec.family == "star":
            g = star(n)
        else:
            g = complete_bipartite(n)
        graphs.append(g)
        retries.append(tries)
    return graphs, retries


def generate(spec: SequenceSpec) -> list[Graph]:
    """Deterministic graph sequence for ``spec``."""
    return generate_with_retries(spec)[0]


@dataclass
class ConvergenceReport:
    """Distances of one pipeline run, one row per (index, k) or per index for shapes.

    ``rows`` entries carry ``index``, ``n``, ``k`` (an int, or ``"shape"``),
    ``kind`` (``"target"`` or ``"cauchy"`` for consecutive-index distances),
    ``distance`` and ``uncertainty``; ``millis`` is filled only when timing
    was requested, so reports stay byte-reproducible by default.
    """

    pipeline: str
    sizes: list
    rows: list = field(default_factory=list)
    params: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)

    def distances(self, k: Any = None, kind: str | None = None) -> list[float]:
        return [
            r["distance"]
            for r in self.rows
            if (k is None or r["k"] == k) and (kind is None or r["kind"] == kind)
        ]

    def per_index_max(self) -> dict[int, float]:
        out: dict[int, float] = {}
        for r in self.rows:
            out[r["index"]] = max(out.get(r["index"], 0.0), r["distance"])
        return out

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ConvergenceReport":
        return cls(d["pipeline"], list(d["sizes"]), list(d["rows"]), dict(d["params"]), dict(d.get("verdicts", {})))

    def to_csv(self) -> str:
        from sgraphon.io import format_number

        budgets = ";".join(f"{key}={self.params[key]}" for key in ("max_refine", "samples", "kmax", "depth") if key in self.params)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "k", "distance", "uncertainty", "budgets", "seed", "millis", "index", "kind"])
        for r in self.rows:
            w.writerow(
                [
                    r["n"],
                    r["k"],
                    format_number(r["distance"]),
                    format_number(r["uncertainty"]),
                    budgets,
                    self.params.get("seed", ""),
                    "" if r.get("millis") is None else r["millis"],
                    r["index"],
                    r["kind"],
                ]
            )
        return buf.getvalue()


def trend_verdict(sizes: Sequence[int], dists: Sequence[float]) -> str:
    """``"decreasing"`` if the last distance is strictly below the first and a
    least-squares line in ``log n`` has negative slope, else ``"inconclusive"``."""
    if len(dists) < 2 or len(set(sizes)) < 2:
        return "inconclusive"
    slope = np.polyfit(np.log(np.asarray(sizes, dtype=float)), np.asarray(dists, dtype=float), 1)[0]
    if dists[-1] < dists[0] and slope < 0:
        return "decreasing"
    return "inconclusive"


def _graph_sizes(graphs: Sequence[Graph]) -> list[int]:
    return [g.n for g in graphs]


def _perms(graphs: Sequence[Graph], permutations: Sequence | None) -> list:
    if permutations is None:
        return [None] * len(graphs)
    if len(permutations) != len(graphs):
        raise InvalidInput("one permutation (or None) per graph is required")
    return list(permutations)


def _kshape_clouds(args: tuple) -> tuple[dict[int, KShapeCloud], float]:
    graph, perm, ks, max_refine, samples, seed, hard_cap = args
    t0 = time.perf_counter()
    m = embed_graph(graph)
    clouds = {k: build_kshape(m, k, max_refine, samples, seed, perm, hard_cap) for k in ks}
    return clouds, (time.perf_counter() - t0) * 1000


def _shape_cloud(args: tuple) -> tuple[ShapeCloud, float]:
    graph, perm, kmax, max_refine, samples, seed, hard_cap = args
    t0 = time.perf_counter()
    cloud = build_shape(embed_graph(graph), kmax, max_refine, samples, seed, perm, hard_cap)
    return cloud, (time.perf_counter() - t0) * 1000


def _map(fn, jobs: list, workers: int) -> list:
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def test_kshape_convergence(
    graphs: Sequence[Graph],
    target: GridMeasure | str | None = "uniform",
    ks: Sequence[int] = DEFAULT_KS,
    max_refine: int = DEFAULT_REFINE,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    permutations: Sequence | None = None,
    hard_cap: int = HARD_CAP,
    timings: bool = False,
    workers: int = 1,
) -> ConvergenceReport:
    """Matrix-Hausdorff distance of each graph's k-shape cloud to the target's.

    ``target="uniform"`` uses the analytic singleton ``{J / k^2}``; a
    :class:`GridMeasure` target gets a cloud built with the same budgets and
    seed; ``None`` reports consecutive-index (Cauchy) distances instead.
    """
    ks = [int(k) for k in ks]
    perms = _perms(graphs, permutations)
    jobs = [(g, p, ks, max_refine, samples, seed, hard_cap) for g, p in zip(graphs, perms)]
    results = _map(_kshape_clouds, jobs, workers)
    sizes = _graph_sizes(graphs)

    targets: dict[int, KShapeCloud] = {}
    if isinstance(target, GridMeasure):
        targets = {k: build_kshape(target, k, max_refine, samples, seed, hard_cap=hard_cap) for k in ks}
    elif target == "uniform":
        targets = {k: uniform_kshape(k) for k in ks}
    elif target is not None:
        raise InvalidInput(f"unknown target {target!r}")

    rows = []
    for idx, (clouds, millis) in enumerate(results):
        for k in ks:
            if target is not None:
                d = hausdorff_matrix(clouds[k], targets[k])
                kind = "target"
            elif idx + 1 < len(results):
                d = hausdorff_matrix(clouds[k], results[idx + 1][0][k])
                kind = "cauchy"
            else:
                continue
            rows.append(
                {
                    "index": idx,
                    "n": sizes[idx],
                    "k": k,
                    "kind": kind,
                    "distance": d,
                    "uncertainty": 0.0,
                    "millis": round(millis, 3) if timings else None,
                }
            )
    params = {
        "ks": ks,
        "max_refine": max_refine,
        "samples": samples,
        "seed": seed,
        "hard_cap": hard_cap,
        "target": _target_label(target),
    }
    report = ConvergenceReport("kshape", sizes, rows, params)
    for k in ks:
        kind = "target" if target is not None else "cauchy"
        sel = [r for r in rows if r["k"] == k and r["kind"] == kind]
        report.verdicts[str(k)] = trend_verdict([r["n"] for r in sel], [r["distance"] for r in sel])
    return report


test_kshape_convergence.__test__ = False  # type: ignore[attr-defined]


def test_shape_convergence(
    graphs: Sequence[Graph],
    target: GridMeasure | str | None = "uniform",
    kmax: int = DEFAULT_KMAX,
    max_refine: int = DEFAULT_REFINE,
    samples: int = DEFAULT_SAMPLES,
    metric: RhoMetric | None = None,
    seed: int = 0,
    permutations: Sequence | None = None,
    hard_cap: int = HARD_CAP,
    timings: bool = False,
    workers: int = 1,
) -> ConvergenceReport:
    """Hausdorff distance (truncated metric) of each graph's shape cloud to the target's.

    Without a target the report holds consecutive-index distances.
    """
    metric = metric or RhoMetric()
    perms = _perms(graphs, permutations)
    jobs = [(g, p, kmax, max_refine, samples, seed, hard_cap) for g, p in zip(graphs, perms)]
    results = _map(_shape_cloud, jobs, workers)
    sizes = _graph_sizes(graphs)

    if isinstance(target, GridMeasure):
        tcloud = build_shape(target, kmax, max_refine, samples, seed, hard_cap=hard_cap)
    elif target == "uniform":
        tcloud = ShapeCloud((GridMeasure.uniform(1),), ({"mode": "analytic"},))
    elif target is None:
        tcloud = None
    else:
        raise InvalidInput(f"unknown target {target!r}")

    rows = []
    for idx, (cloud, millis) in enumerate(results):
        if tcloud is not None:
            d, kind = hausdorff_rho(cloud, tcloud, metric), "target"
        elif idx + 1 < len(results):
            d, kind = hausdorff_rho(cloud, results[idx + 1][0], metric), "cauchy"
        else:
            continue
        rows.append(
            {
                "index": idx,
                "n": sizes[idx],
                "k": "shape",
                "kind": kind,
                "distance": d,
                "uncertainty": metric.uncertainty,
                "millis": round(millis, 3) if timings else None,
            }
        )
    params = {
        "kmax": kmax,
        "max_refine": max_refine,
        "samples": samples,
        "depth": metric.depth,
        "seed": seed,
        "hard_cap": hard_cap,
        "target": _target_label(target),
    }
    report = ConvergenceReport("shape", sizes, rows, params)
    report.verdicts["shape"] = trend_verdict([r["n"] for r in rows], [r["distance"] for r in rows])
    return report


test_shape_convergence.__test__ = False  # type: ignore[attr-defined]


def _target_label(target: Any) -> str | None:
    if isinstance(target, GridMeasure):
        return f"measure(resolution={target.resolution})"
    return target


@dataclass(frozen=True)
class CrossPipelineDiagnostic:
    status: str  # "PASS", "WARN" or "degenerate-PASS"
    correlation: float | None
    kshape_values: tuple
    shape_values: tuple

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def cross_pipeline_check(first: ConvergenceReport, second: ConvergenceReport) -> CrossPipelineDiagnostic:
    """Spearman co-trend between per-index k-shape distances (max over k) and shape distances.

    Never a hard failure: below the threshold the status is ``WARN``.
    """
    by_kind = {first.pipeline: first, second.pipeline: second}
    if set(by_kind) != {"kshape", "shape"}:
        raise MismatchedSequences("need one k-shape report and one shape report")
    ksr, shr = by_kind["kshape"], by_kind["shape"]
    if list(ksr.sizes) != list(shr.sizes):
        raise MismatchedSequences(f"reports cover different sequences: {ksr.sizes} vs {shr.sizes}")
    a = ksr.per_index_max()
    b = shr.per_index_max()
    if sorted(a) != sorted(b):
        raise MismatchedSequences("reports cover different indices")
    idx = sorted(a)
    x = np.array([a[i] for i in idx])
    y = np.array([b[i] for i in idx])
    if len(idx) < 2 or np.ptp(x) == 0 or np.ptp(y) == 0:
        return CrossPipelineDiagnostic("degenerate-PASS", None, tuple(x.tolist()), tuple(y.tolist()))
    rho = float(spearmanr(x, y).statistic)
    if math.isnan(rho):
        return CrossPipelineDiagnostic("degenerate-PASS", None, tuple(x.tolist()), tuple(y.tolist()))
    status = "PASS" if rho >= SPEARMAN_THRESHOLD else "WARN"
    return CrossPipelineDiagnostic(status, rho, tuple(x.tolist()), tuple(y.tolist()))
