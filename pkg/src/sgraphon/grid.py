"""Grid measures (step s-graphons), graphs, and the truncated weak-topology metric.

A grid measure at resolution ``k`` is the measure on the unit square that is
uniform inside every cell ``I_i x I_j`` and puts mass ``masses[i, j]`` on it,
where ``I_i = [(i-1)/k, i/k)`` and the last interval is closed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from sgraphon.errors import EmptyEdgeSet, InvalidInput

MASS_TOL = 1e-12
RENORMALIZE_TOL = 1e-9
SYMMETRY_TOL = 1e-12
DEFAULT_DEPTH = 64


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GridMeasure:
    """Step s-graphon given by a ``k x k`` matrix of cell masses.

    Inputs whose total mass is off by more than 1e-12 but at most 1e-9 are
    renormalized; larger deviations, negative entries and asymmetry beyond
    1e-12 raise :class:`InvalidInput`. Slightly asymmetric input is replaced
    by its symmetric part.
    """

    masses: np.ndarray

    def __post_init__(self) -> None:
        m = np.array(self.masses, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
            raise InvalidInput(f"masses must be a non-empty square matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise InvalidInput("masses must be finite")
        if np.any(m < 0):
            raise InvalidInput("masses must be non-negative")
        asym = float(np.max(np.abs(m - m.T)))
        if asym > SYMMETRY_TOL:
            raise InvalidInput(f"masses must be symmetric (max asymmetry {asym:.3g})")
        if asym > 0:
            m = (m + m.T) / 2
        total = math.fsum(m.ravel())
        dev = abs(total - 1.0)
        if dev > RENORMALIZE_TOL:
            raise InvalidInput(f"total mass must be 1 (got {total!r})")
        if dev > MASS_TOL:
            m = m / total
        object.__setattr__(self, "masses", _frozen(m))

    @property
    def resolution(self) -> int:
        return self.masses.shape[0]

    @property
    def density(self) -> np.ndarray:
        """Radon-Nikodym derivative w.r.t. Lebesgue measure on each cell."""
        return self.masses * self.resolution**2

    @classmethod
    def uniform(cls, k: int = 1) -> "GridMeasure":
        if k < 1:
            raise InvalidInput("resolution must be positive")
        return cls(np.full((k, k), 1.0 / (k * k)))

    def permuted(self, perm: Sequence[int]) -> "GridMeasure":
        """Relabel cells: cell ``(a, b)`` moves to ``(perm[a], perm[b])``."""
        return GridMeasure(permute_matrix(self.masses, perm))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GridMeasure):
            return NotImplemented
        return self.masses.shape == other.masses.shape and bool(np.array_equal(self.masses, other.masses))

    def __hash__(self) -> int:
        return hash((self.masses.shape, self.masses.tobytes()))

    def __repr__(self) -> str:
        return f"GridMeasure(resolution={self.resolution})"


def permute_matrix(a: np.ndarray, perm: Sequence[int]) -> np.ndarray:
    perm = _check_perm(perm, a.shape[0])
    out = np.empty_like(a)
    out[np.ix_(perm, perm)] = a
    return out


def _check_perm(perm: Sequence[int], n: int) -> np.ndarray:
    p = np.asarray(perm, dtype=np.int64)
    if p.shape != (n,) or not np.array_equal(np.sort(p), np.arange(n)):
        raise InvalidInput(f"not a permutation of 0..{n - 1}")
    return p


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on vertices ``1..n``; edges stored as sorted pairs."""

    n: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        if self.n < 1:
            raise InvalidInput("a graph needs at least one vertex")
        norm = set()
        for e in self.edges:
            u, v = (int(x) for x in e)
            if u == v:
                raise InvalidInput(f"self-loop at vertex {u}")
            if not (1 <= u <= self.n and 1 <= v <= self.n):
                raise InvalidInput(f"edge ({u}, {v}) out of range 1..{self.n}")
            norm.add((min(u, v), max(u, v)))
        object.__setattr__(self, "edges", frozenset(norm))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        return cls(n, frozenset(tuple(e) for e in edges))

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        for u, v in self.edges:
            a[u - 1, v - 1] = a[v - 1, u - 1] = 1.0
        return a

    def permuted(self, perm: Sequence[int]) -> "Graph":
        """Relabel vertex ``v`` (1-based) as ``perm[v - 1] + 1``; ``perm`` is 0-based."""
        p = _check_perm(perm, self.n)
        return Graph(self.n, frozenset((int(p[u - 1]) + 1, int(p[v - 1]) + 1) for u, v in self.edges))

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)


def embed_graph(g: Graph) -> GridMeasure:
    """Adjacency matrix normalized by its l1-norm, as a measure at resolution ``n``."""
    if not g.edges:
        raise EmptyEdgeSet("graph embedding requires a non-empty edge set")
    return GridMeasure(g.adjacency() / (2 * len(g.edges)))


def refine(m: GridMeasure, r: int) -> GridMeasure:
    """Same measure on the ``r*k`` grid: every cell split into ``r*r`` equal subcells."""
    if r < 1:
        raise InvalidInput("refinement factor must be >= 1")
    if r == 1:
        return m
    sub = m.masses / (r * r)
    return GridMeasure(np.repeat(np.repeat(sub, r, axis=0), r, axis=1))


def overlap_numerators(k: int, big_k: int) -> np.ndarray:
    """Integer matrix ``A`` with ``A[i, r] / (k * K)`` = length of ``I_i^k`` intersected with ``I_r^K``."""
    i = np.arange(1, k + 1)[:, None]
    r = np.arange(1, big_k + 1)[None, :]
    hi = np.minimum(i * big_k, r * k)
    lo = np.maximum((i - 1) * big_k, (r - 1) * k)
    return np.maximum(0, hi - lo)


def coarsen(m: GridMeasure, big_k: int) -> GridMeasure:
    """Push a resolution-``k`` measure onto the ``K``-grid.

    ``N(r, s) = k^2 sum_{i,j} a_ir a_js M(i, j)`` with ``a_ir`` the overlap
    length of ``I_i^k`` and ``I_r^K``. Every K-cell receives exactly the mass
    the input puts on it. Entries are evaluated in rational arithmetic and
    rounded once, so the result is the correctly rounded exact value.
    """
    if big_k < 1:
        raise InvalidInput("target resolution must be >= 1")
    k = m.resolution
    if big_k == k:
        return m
    # k * a_ir = num[i, r] / K
    num = overlap_numerators(k, big_k)
    support = [np.nonzero(num[:, r])[0] for r in range(big_k)]
    masses = m.masses
    out = np.empty((big_k, big_k))
    denom = big_k * big_k
    for r in range(big_k):
        for s in range(r, big_k):
            acc = Fraction(0)
            for i in support[r]:
                wi = int(num[i, r])
                for j in support[s]:
                    x = masses[i, j]
                    if x:
                        acc += Fraction(x) * (wi * int(num[j, s]))
            out[r, s] = out[s, r] = float(acc / denom)
    return GridMeasure(out)


def cell_mass(m: GridMeasure, x0: Fraction, x1: Fraction, y0: Fraction, y1: Fraction) -> Fraction:
    """Exact mass of the rectangle ``[x0, x1] x [y0, y1]`` under ``m``."""
    k = m.resolution
    total = Fraction(0)
    for i in range(k):
        lx = min(x1, Fraction(i + 1, k)) - max(x0, Fraction(i, k))
        if lx <= 0:
            continue
        for j in range(k):
            ly = min(y1, Fraction(j + 1, k)) - max(y0, Fraction(j, k))
            if ly <= 0:
                continue
            total += Fraction(m.masses[i, j]) * k * k * lx * ly
    return total


# --------------------------------------------------------------------------
# Truncated weak-topology metric
# --------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _level_index(depth: int) -> tuple[tuple[int, int, int], ...]:
    """``(L, a, b)`` for test functions 2..depth (function 1 is the constant)."""
    out: list[tuple[int, int, int]] = []
    level = 1
    while len(out) < depth - 1:
        nodes = 2**level + 1
        for a in range(nodes):
            for b in range(nodes):
                out.append((level, a, b))
                if len(out) == depth - 1:
                    break
            if len(out) == depth - 1:
                break
        level += 1
    return tuple(out)


def hat(level: int, a: int, x: np.ndarray) -> np.ndarray:
    """One-dimensional hat function centred at node ``a / 2**level``."""
    return np.maximum(0.0, 1.0 - np.abs(np.asarray(x, dtype=np.float64) * 2**level - a))


@lru_cache(maxsize=256)
def _cell_hat_means(level: int, k: int) -> np.ndarray:
    """``C[a, i] = k * integral of hat(level, a) over I_i``, shape ``(2**level + 1, k)``.

    The grid is cut at every cell edge and every dyadic node; on each piece
    every hat is affine, so length times midpoint value is its exact integral.
    """
    cuts = np.union1d(np.arange(k + 1) / k, np.arange(2**level + 1) / 2**level)
    lengths = np.diff(cuts)
    mids = (cuts[:-1] + cuts[1:]) / 2
    cells = np.minimum((mids * k).astype(np.int64), k - 1)
    nodes = np.arange(2**level + 1)
    vals = np.maximum(0.0, 1.0 - np.abs(mids[None, :] * 2**level - nodes[:, None])) * lengths[None, :]
    out = np.zeros((nodes.size, k))
    for c in range(k):
        out[:, c] = vals[:, cells == c].sum(axis=1)
    out *= k
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class RhoMetric:
    """Weak-topology metric truncated to its first ``depth`` test functions.

    ``h_1`` is the constant 1. The remaining functions run through levels
    ``L = 1, 2, ...``; level ``L`` contributes the tensor products
    ``hat(L, a)(x) * hat(L, b)(y)`` for ``a, b = 0..2**L`` in lexicographic
    order. Term ``j`` has weight ``2**-j``, so the dropped tail of the series
    is worth at most ``2**-depth``.
    """

    depth: int = DEFAULT_DEPTH

    def __post_init__(self) -> None:
        if self.depth < 1:
            raise InvalidInput("metric depth must be >= 1")

    @property
    def uncertainty(self) -> float:
        return 2.0**-self.depth

    @property
    def weights(self) -> np.ndarray:
        return 2.0 ** -np.arange(1, self.depth + 1, dtype=np.float64)

    def term(self, j: int) -> tuple[int, int, int] | None:
        """``(L, a, b)`` of test function ``j`` (1-based); ``None`` for the constant."""
        if not 1 <= j <= self.depth:
            raise IndexError(f"test function index {j} outside 1..{self.depth}")
        return None if j == 1 else _level_index(self.depth)[j - 2]

    def evaluate(self, j: int, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        t = self.term(j)
        x = np.asarray(x, dtype=np.float64)
        if t is None:
            return np.ones(np.broadcast(x, y).shape)
        level, a, b = t
        return hat(level, a, x) * hat(level, b, y)

    @property
    def max_level(self) -> int:
        idx = _level_index(self.depth)
        return idx[-1][0] if idx else 0

    def features(self, masses: np.ndarray) -> np.ndarray:
        """Integrals of ``h_1..h_depth`` against one or a stack of mass matrices.

        ``masses`` has shape ``(k, k)`` or ``(n, k, k)``; the result has shape
        ``(depth,)`` or ``(n, depth)``.
        """
        stack = np.asarray(masses, dtype=np.float64)
        single = stack.ndim == 2
        if single:
            stack = stack[None]
        n, k = stack.shape[0], stack.shape[1]
        out = np.empty((n, self.depth))
        out[:, 0] = stack.sum(axis=(1, 2))
        idx = _level_index(self.depth)
        pos = 1
        level = 1
        while pos < self.depth:
            c = _cell_hat_means(level, k)
            g = c @ stack @ c.T  # (n, nodes, nodes)
            count = min((2**level + 1) ** 2, self.depth - pos)
            out[:, pos : pos + count] = g.reshape(n, -1)[:, :count]
            assert idx[pos - 1][0] == level
            pos += count
            level += 1
        return out[0] if single else out

    def scaled_features(self, masses: np.ndarray) -> np.ndarray:
        """Features times weights: rho is the l1 distance between these vectors."""
        return self.features(masses) * self.weights


def integrate_test_function(m: GridMeasure, j: int, metric: RhoMetric) -> float:
    """Exact integral of test function ``j`` (1-based) against ``m``."""
    t = metric.term(j)
    if t is None:
        return math.fsum(m.masses.ravel())
    level, a, b = t
    c = _cell_hat_means(level, m.resolution)
    return float(c[a] @ m.masses @ c[b])


def rho_distance(a: GridMeasure, b: GridMeasure, metric: RhoMetric) -> float:
    """Truncated metric ``sum_j 2**-j |int h_j da - int h_j db|``.

    The true (untruncated) distance lies within ``metric.uncertainty`` above.
    """
    fa = metric.scaled_features(a.masses)
    fb = metric.scaled_features(b.masses)
    return math.fsum(np.abs(fa - fb))
