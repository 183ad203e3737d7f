"""Finite point clouds approximating k-shapes and shapes, and Hausdorff distances between them.

Every cloud is a finite subset of the true (closed) set, so reported
Hausdorff distances are estimates between truncations: they can be biased
either way, and enlarging the budgets can only move the directed distance
from a reference set into the cloud downwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from sgraphon.errors import DimensionMismatch, EmptyCloud, InvalidInput, ResolutionGuard
from sgraphon.grid import GridMeasure, RhoMetric, _check_perm, overlap_numerators, refine
from sgraphon.kernels import (
    MAX_RESOLUTION,
    FractionalPartition,
    count_balanced,
    enumerate_balanced_labels,
    hard_quotient_batch,
    permute_rows,
    quotient,
    quotient_batch,
    random_balanced_labels,
    sample_fractional_partition,
)
from sgraphon.rng import stream

DEDUP_TOL = 1e-12
HARD_CAP = 10_000

# stream keys: (k, r, SOFT|HARD, draw)
_SOFT = 0
_HARD = 1


def dedup_indices(flat: np.ndarray, tol: float = DEDUP_TOL) -> np.ndarray:
    """Indices of the points kept by a first-come greedy pass: a point is dropped
    when an earlier kept point is within max-norm distance ``< tol``."""
    n = flat.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    tree = cKDTree(flat)
    removed = np.zeros(n, dtype=bool)
    keep = []
    for i in range(n):
        if removed[i]:
            continue
        keep.append(i)
        for j in tree.query_ball_point(flat[i], r=tol, p=np.inf):
            if j > i and np.max(np.abs(flat[j] - flat[i])) < tol:
                removed[j] = True
    return np.asarray(keep, dtype=np.int64)


def check_mk_star(q: np.ndarray, tol: float = 1e-12) -> None:
    """Raise unless every matrix in ``q`` (``(k, k)`` or ``(n, k, k)``) is in ``M_k^*``."""
    q = np.asarray(q)
    if q.ndim == 2:
        q = q[None]
    if np.any(q < 0):
        raise InvalidInput("matrix has negative entries")
    if np.max(np.abs(q - np.swapaxes(q, 1, 2)), initial=0.0) > tol:
        raise InvalidInput("matrix is not symmetric")
    sums = q.sum(axis=(1, 2))
    if np.max(np.abs(sums - 1.0), initial=0.0) > tol:
        raise InvalidInput("matrix entries do not sum to 1")


@dataclass(frozen=True, eq=False)
class KShapeCloud:
    """Finite sample of the k-shape: distinct matrices of ``M_k^*`` with provenance."""

    k: int
    points: np.ndarray
    provenance: tuple = ()
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim == 2 and pts.size == 0:
            pts = pts.reshape(0, self.k, self.k)
        if pts.ndim != 3 or pts.shape[1:] != (self.k, self.k):
            raise InvalidInput(f"points must have shape (n, {self.k}, {self.k}), got {pts.shape}")
        check_mk_star(pts)
        if self.provenance and len(self.provenance) != pts.shape[0]:
            raise InvalidInput("provenance length does not match the number of points")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "provenance", tuple(self.provenance))

    def __len__(self) -> int:
        return self.points.shape[0]

    def flat(self) -> np.ndarray:
        return self.points.reshape(len(self), -1)

    @classmethod
    def singleton(cls, q: np.ndarray, label: str = "analytic") -> "KShapeCloud":
        q = np.asarray(q, dtype=np.float64)
        return cls(q.shape[0], q[None], ({"mode": label},))

    def to_shape(self) -> "ShapeCloud":
        """Embed every matrix as the grid measure at resolution ``k``."""
        prov = self.provenance or tuple({} for _ in range(len(self)))
        return ShapeCloud(
            tuple(GridMeasure(q) for q in self.points),
            tuple({**p, "k": self.k} for p in prov),
            dict(self.params),
        )


@dataclass(frozen=True, eq=False)
class ShapeCloud:
    """Finite sample of the shape: grid measures of possibly different resolutions."""

    points: tuple
    provenance: tuple = ()
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        pts = tuple(self.points)
        if not all(isinstance(p, GridMeasure) for p in pts):
            raise InvalidInput("shape cloud points must be GridMeasure instances")
        if self.provenance and len(self.provenance) != len(pts):
            raise InvalidInput("provenance length does not match the number of points")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "provenance", tuple(self.provenance))

    def __len__(self) -> int:
        return len(self.points)

    def features(self, metric: RhoMetric) -> np.ndarray:
        """Weighted test-function integrals, one row per point."""
        out = np.empty((len(self.points), metric.depth))
        by_res: dict[int, list[int]] = {}
        for idx, p in enumerate(self.points):
            by_res.setdefault(p.resolution, []).append(idx)
        for res, idxs in by_res.items():
            stack = np.stack([self.points[i].masses for i in idxs])
            out[idxs] = metric.scaled_features(stack)
        return out


def _lift_permutation(perm: np.ndarray, r: int) -> np.ndarray:
    """Permutation of the refined grid induced by relabelling the coarse cells."""
    if r == 1:
        return perm
    return (perm[:, None] * r + np.arange(r)[None, :]).ravel()


def build_kshape(
    m: GridMeasure,
    k: int,
    max_refine: int = 2,
    samples: int = 500,
    seed: int = 0,
    permutation: Sequence[int] | None = None,
    hard_cap: int = HARD_CAP,
    extra: Sequence[FractionalPartition] = (),
) -> KShapeCloud:
    """Point cloud in the k-shape of ``m``.

    For each refinement ``r = 1..max_refine`` the measure is refined to
    resolution ``r * k_m`` and the cloud collects the quotient matrices of the
    uniform partition (all entries ``1/k``), ``samples`` soft partitions and,
    when ``k`` divides the refined resolution, the hard (0/1 balanced)
    partitions: all of them if there are at most ``hard_cap``, otherwise
    ``hard_cap`` random ones. Near-duplicates are merged.

    ``permutation`` relabels cell ``a`` of ``m`` as ``permutation[a]`` in every
    sampled partition. Building the cloud of ``m.permuted(perm)`` with
    ``permutation=perm`` reproduces the cloud of ``m`` (up to summation order).

    ``extra`` partitions (``k`` columns, rows equal to some refined
    resolution ``r * k_m`` with ``r <= max_refine``) are added as candidates.
    """
    if k < 1 or max_refine < 1 or samples < 1:
        raise InvalidInput("k, max_refine and samples must all be >= 1")
    perm = None if permutation is None else _check_perm(permutation, m.resolution)
    chunks: list[np.ndarray] = []
    prov: list[dict[str, Any]] = []
    for r in range(1, max_refine + 1):
        res = r * m.resolution
        if res > MAX_RESOLUTION:
            raise ResolutionGuard(f"refined resolution {res} exceeds {MAX_RESOLUTION}")
        masses = refine(m, r).masses
        lifted = None if perm is None else _lift_permutation(perm, r)

        chunks.append(np.full((1, k, k), 1.0 / (k * k)))
        prov.append({"r": r, "mode": "uniform", "draw": 0})

        soft = np.stack(
            [
                sample_fractional_partition(res, k, seed, "soft", (k, r, _SOFT, s)).weights
                for s in range(samples)
            ]
        )
        if lifted is not None:
            soft = permute_rows(soft, lifted)
        chunks.append(quotient_batch(soft, masses))
        prov.extend({"r": r, "mode": "soft", "draw": s} for s in range(samples))

        if res % k == 0:
            total = count_balanced(res, k)
            if total <= hard_cap:
                labels = np.stack(list(enumerate_balanced_labels(res, k)))
                mode = "hard-enum"
            else:
                labels = np.stack(
                    [random_balanced_labels(res, k, stream(seed, k, r, _HARD, s)) for s in range(hard_cap)]
                )
                mode = "hard"
            if lifted is not None:
                moved = np.empty_like(labels)
                moved[:, lifted] = labels
                labels = moved
            chunks.append(hard_quotient_batch(labels, masses, k))
            prov.extend({"r": r, "mode": mode, "draw": s} for s in range(labels.shape[0]))

    for idx, p in enumerate(extra):
        r, rem = divmod(p.rows, m.resolution)
        if rem or not 1 <= r <= max_refine or p.parts != k:
            raise InvalidInput(f"extra partition of shape {p.weights.shape} does not fit k={k}, R={max_refine}")
        chunks.append(quotient(p, refine(m, r))[None])
        prov.append({"r": r, "mode": "given", "draw": idx})

    pts = np.concatenate(chunks)
    keep = dedup_indices(pts.reshape(pts.shape[0], -1))
    params = {
        "k": k,
        "max_refine": max_refine,
        "samples": samples,
        "seed": seed,
        "hard_cap": hard_cap,
        "source_resolution": m.resolution,
    }
    return KShapeCloud(k, pts[keep], tuple(prov[i] for i in keep), params)


def uniform_kshape(k: int) -> KShapeCloud:
    """The k-shape of the uniform measure: the single matrix with entries ``1/k^2``."""
    return KShapeCloud.singleton(np.full((k, k), 1.0 / (k * k)))


def build_shape(
    m: GridMeasure,
    kmax: int = 4,
    max_refine: int = 2,
    samples: int = 500,
    seed: int = 0,
    permutation: Sequence[int] | None = None,
    hard_cap: int = HARD_CAP,
) -> ShapeCloud:
    """Union over ``k = 1..kmax`` of the embedded k-shape clouds."""
    if kmax < 1:
        raise InvalidInput("kmax must be >= 1")
    points: list[GridMeasure] = []
    prov: list[dict[str, Any]] = []
    for k in range(1, kmax + 1):
        sub = build_kshape(m, k, max_refine, samples, seed, permutation, hard_cap).to_shape()
        points.extend(sub.points)
        prov.extend(sub.provenance)
    params = {
        "kmax": kmax,
        "max_refine": max_refine,
        "samples": samples,
        "seed": seed,
        "hard_cap": hard_cap,
        "source_resolution": m.resolution,
    }
    return ShapeCloud(tuple(points), tuple(prov), params)


def _directed(a: np.ndarray, b: np.ndarray, p: float) -> float:
    """``max_{x in a} min_{y in b} ||x - y||_p``."""
    dist, _ = cKDTree(b).query(a, k=1, p=p)
    return float(np.max(dist))


def hausdorff_matrix(a: KShapeCloud, b: KShapeCloud) -> float:
    """Hausdorff distance between k-shape clouds under the entrywise max-difference metric."""
    if a.k != b.k:
        raise DimensionMismatch(f"clouds live in different matrix spaces (k={a.k} vs k={b.k})")
    if len(a) == 0 or len(b) == 0:
        raise EmptyCloud("Hausdorff distance needs two non-empty clouds")
    fa, fb = a.flat(), b.flat()
    return max(_directed(fa, fb, np.inf), _directed(fb, fa, np.inf))


def directed_rho(a: ShapeCloud, b: ShapeCloud, metric: RhoMetric) -> float:
    """``max_{x in a} min_{y in b} rho(x, y)``."""
    if len(a) == 0 or len(b) == 0:
        raise EmptyCloud("Hausdorff distance needs two non-empty clouds")
    return _directed(a.features(metric), b.features(metric), 1)


def hausdorff_rho(a: ShapeCloud, b: ShapeCloud, metric: RhoMetric) -> float:
    """Hausdorff distance between shape clouds under the truncated metric.

    The untruncated value differs by at most ``metric.uncertainty``.
    """
    if len(a) == 0 or len(b) == 0:
        raise EmptyCloud("Hausdorff distance needs two non-empty clouds")
    fa, fb = a.features(metric), b.features(metric)
    return max(_directed(fa, fb, 1), _directed(fb, fa, 1))


def rho_diameter(c: ShapeCloud, metric: RhoMetric, chunk: int = 1024) -> float:
    """Largest pairwise distance inside a cloud (its internal spread)."""
    if len(c) == 0:
        raise EmptyCloud("empty cloud has no diameter")
    f = c.features(metric)
    best = 0.0
    for start in range(0, f.shape[0], chunk):
        best = max(best, float(cdist(f[start : start + chunk], f, "cityblock").max()))
    return best


def coarsen_cloud(c: ShapeCloud, big_k: int) -> ShapeCloud:
    """Coarsen every point of ``c`` onto the ``K``-grid.

    If a point is the quotient of a partition ``f_1..f_k`` of the underlying
    measure, its coarsening is the quotient of the ``K``-partition
    ``g_r = k * sum_i |I_i ∩ I_r^K| f_i``; it therefore lies in the K-shape.
    Evaluated in floating point (the exact path is :func:`grid.coarsen`).
    """
    points = []
    for p in c.points:
        k = p.resolution
        if k == big_k:
            points.append(p)
            continue
        b = overlap_numerators(k, big_k) / big_k
        q = b.T @ p.masses @ b
        points.append(GridMeasure((q + q.T) / 2))
    prov = c.provenance or tuple({} for _ in c.points)
    return ShapeCloud(tuple(points), tuple({**d, "coarsened_to": big_k} for d in prov), dict(c.params))


def regularity_gap(
    m: GridMeasure,
    big_k: int,
    cloud: ShapeCloud,
    metric: RhoMetric,
    max_refine: int | None = None,
    samples: int | None = None,
    seed: int | None = None,
    coarsened: bool = True,
) -> float:
    """Distance from a shape cloud of ``m`` to an embedded ``K``-shape cloud of ``m``.

    The K-side cloud is ``build_kshape(m, K)`` with the budgets recorded in
    ``cloud.params`` (so it is drawn from the same streams as the shape
    cloud), together with, when ``coarsened`` is set, the coarsening of every
    point of ``cloud`` onto the K-grid (see :func:`coarsen_cloud`). ``cloud``
    must have been built from ``m`` for those points to be K-shape members.
    """
    params = cloud.params
    sub = build_kshape(
        m,
        big_k,
        max_refine if max_refine is not None else params.get("max_refine", 2),
        samples if samples is not None else params.get("samples", 500),
        seed if seed is not None else params.get("seed", 0),
        hard_cap=params.get("hard_cap", HARD_CAP),
    ).to_shape()
    if coarsened:
        extra = coarsen_cloud(cloud, big_k)
        sub = ShapeCloud(sub.points + extra.points, sub.provenance + extra.provenance, sub.params)
    return hausdorff_rho(cloud, sub, metric)
