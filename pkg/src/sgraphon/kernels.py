"""Fairly distributed step kernels, fractional partitions and their actions on grid measures.

A step kernel at resolution ``m`` takes the value ``m * S[i, j]`` on cell
``I_i x I_j``; it is fairly distributed exactly when ``S`` is doubly
stochastic. A fractional partition is an ``m x k`` matrix ``P`` whose column
``i`` holds the cell values of the function ``f_i``; the constraints
``sum_i f_i = 1`` and ``int f_i = 1/k`` become unit row sums and column sums
``m / k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Iterator, Sequence

import numpy as np

from sgraphon.errors import (
    HardModeInfeasible,
    InvalidInput,
    NonConvergence,
    ResolutionGuard,
    ResolutionMismatch,
)
from sgraphon.grid import GridMeasure, _check_perm, refine
from sgraphon.rng import stream

CONSTRAINT_TOL = 1e-10
MAX_SWEEPS = 10_000
POLISH_SWEEPS = 200
MAX_RESOLUTION = 4096


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FDKernel:
    """Doubly stochastic ``m x m`` weight matrix of a fairly distributed step kernel."""

    weights: np.ndarray

    def __post_init__(self) -> None:
        s = np.asarray(self.weights, dtype=np.float64)
        if s.ndim != 2 or s.shape[0] != s.shape[1] or s.shape[0] == 0:
            raise InvalidInput(f"kernel weights must be a non-empty square matrix, got {s.shape}")
        if not np.all(np.isfinite(s)) or np.any(s < 0):
            raise InvalidInput("kernel weights must be finite and non-negative")
        dev = max(np.max(np.abs(s.sum(axis=1) - 1)), np.max(np.abs(s.sum(axis=0) - 1)))
        if dev > CONSTRAINT_TOL:
            raise InvalidInput(f"kernel weights are not doubly stochastic (deviation {dev:.3g})")
        object.__setattr__(self, "weights", _readonly(s))

    @property
    def resolution(self) -> int:
        return self.weights.shape[0]

    def refined(self, r: int) -> "FDKernel":
        """Same kernel on the ``r*m`` grid: each entry becomes an ``r x r`` block of ``S / r``."""
        if r == 1:
            return self
        return FDKernel(np.repeat(np.repeat(self.weights / r, r, axis=0), r, axis=1))


@dataclass(frozen=True, eq=False)
class FractionalPartition:
    """``m x k`` matrix with unit row sums and column sums ``m / k``."""

    weights: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.weights, dtype=np.float64)
        if p.ndim != 2 or 0 in p.shape:
            raise InvalidInput(f"partition weights must be a non-empty matrix, got {p.shape}")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise InvalidInput("partition weights must be finite and non-negative")
        m, k = p.shape
        row_dev = np.max(np.abs(p.sum(axis=1) - 1))
        col_dev = np.max(np.abs(p.sum(axis=0) - m / k))
        if row_dev > CONSTRAINT_TOL or col_dev > CONSTRAINT_TOL * m:
            raise InvalidInput(
                f"not a fractional partition (row deviation {row_dev:.3g}, column deviation {col_dev:.3g})"
            )
        object.__setattr__(self, "weights", _readonly(p))

    @property
    def rows(self) -> int:
        return self.weights.shape[0]

    @property
    def parts(self) -> int:
        return self.weights.shape[1]

    @classmethod
    def uniform(cls, m: int, k: int) -> "FractionalPartition":
        return cls(np.full((m, k), 1.0 / k))

    @classmethod
    def from_labels(cls, labels: Sequence[int], k: int) -> "FractionalPartition":
        return cls(one_hot(np.asarray(labels), k))

    def refined(self, r: int) -> "FractionalPartition":
        """Replicate every row ``r`` times (the same functions on a finer grid)."""
        return self if r == 1 else FractionalPartition(np.repeat(self.weights, r, axis=0))

    def permuted(self, perm: Sequence[int]) -> "FractionalPartition":
        """Move row ``a`` to position ``perm[a]``."""
        return FractionalPartition(permute_rows(self.weights, perm))


def permute_rows(a: np.ndarray, perm: Sequence[int]) -> np.ndarray:
    p = _check_perm(perm, a.shape[-2])
    out = np.empty_like(a)
    out[..., p, :] = a
    return out


def one_hot(labels: np.ndarray, k: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros(labels.shape + (k,))
    np.put_along_axis(out, labels[..., None], 1.0, axis=-1)
    return out


def common_resolution(*sizes: int) -> int:
    lcm = math.lcm(*sizes)
    if lcm > MAX_RESOLUTION:
        raise ResolutionGuard(
            f"common resolution {lcm} exceeds {MAX_RESOLUTION}; coarsen the inputs first"
        )
    return lcm


def pushforward(f: FDKernel, m: GridMeasure) -> GridMeasure:
    """Cell masses of the measure with density ``phi(f, mu)``: ``S^T M S`` on the common grid."""
    res = common_resolution(f.resolution, m.resolution)
    s = f.refined(res // f.resolution).weights
    big = refine(m, res // m.resolution).masses
    out = s.T @ big @ s
    return GridMeasure((out + out.T) / 2)


def quotient(p: FractionalPartition, m: GridMeasure) -> np.ndarray:
    """Quotient matrix ``P^T M P``: entry ``(i, j)`` integrates ``f_i(x) f_j(y)`` against ``m``.

    Every entry is a correctly rounded sum (``math.fsum``) of the products
    ``P[a, i] * M[a, b] * P[b, j]``, so the result does not depend on the order
    of the rows: relabelling vertices consistently in ``P`` and ``M`` gives
    bit-identical output. Only the upper triangle is summed; it is mirrored.
    """
    if p.rows != m.resolution:
        raise ResolutionMismatch(
            f"partition has {p.rows} rows but the measure has resolution {m.resolution}"
        )
    w = p.weights
    masses = m.masses
    k = p.parts
    out = np.empty((k, k))
    for i in range(k):
        left = w[:, i, None] * masses
        for j in range(i, k):
            out[i, j] = out[j, i] = math.fsum((left * w[None, :, j]).ravel())
    return out


def quotient_batch(partitions: np.ndarray, masses: np.ndarray, chunk: int = 2048) -> np.ndarray:
    """Vectorised quotients for a stack ``(n, m, k)`` of partition weights.

    Agrees with :func:`quotient` up to floating-point summation order; the
    output is symmetrised exactly.
    """
    partitions = np.asarray(partitions, dtype=np.float64)
    n = partitions.shape[0]
    k = partitions.shape[2]
    out = np.empty((n, k, k))
    for start in range(0, n, chunk):
        p = partitions[start : start + chunk]
        q = np.swapaxes(p, 1, 2) @ (masses @ p)
        out[start : start + chunk] = (q + np.swapaxes(q, 1, 2)) / 2
    return out


def hard_quotient_batch(labels: np.ndarray, masses: np.ndarray, k: int, chunk: int = 2048) -> np.ndarray:
    """Quotients of 0/1 partitions given as label rows ``(n, m)``."""
    labels = np.asarray(labels, dtype=np.int64)
    out = np.empty((labels.shape[0], k, k))
    for start in range(0, labels.shape[0], chunk):
        out[start : start + chunk] = quotient_batch(one_hot(labels[start : start + chunk], k), masses, chunk)
    return out


def kernel_to_partition(f: FDKernel) -> FractionalPartition:
    """A doubly stochastic ``S`` is itself a fractional partition with ``k = m``."""
    return FractionalPartition(f.weights)


def _scale(x: np.ndarray, col_target: float) -> np.ndarray:
    """Alternate column/row scaling to unit row sums and column sums ``col_target``.

    Each sweep ends with an exact row normalisation. Once the column residual
    is below ``CONSTRAINT_TOL * max(1, col_target)`` the sweeps continue
    (at most ``POLISH_SWEEPS`` more) until the residual stops shrinking, so
    that products with the result keep identities to ~1e-15.
    """
    scale = max(1.0, col_target)
    tol = CONSTRAINT_TOL * scale
    floor = 64 * np.finfo(np.float64).eps * scale * max(1, x.shape[0])
    for _ in range(MAX_SWEEPS):
        x = x * (col_target / x.sum(axis=0))[None, :]
        x = x / x.sum(axis=1)[:, None]
        res = np.max(np.abs(x.sum(axis=0) - col_target))
        if res < tol:
            break
    else:
        raise NonConvergence(f"matrix scaling did not reach tolerance in {MAX_SWEEPS} sweeps")
    for _ in range(POLISH_SWEEPS):
        if res <= floor:
            break
        y = x * (col_target / x.sum(axis=0))[None, :]
        y = y / y.sum(axis=1)[:, None]
        new = np.max(np.abs(y.sum(axis=0) - col_target))
        if new >= res:
            break
        x, res = y, new
    return x


def sample_doubly_stochastic(m: int, seed: int, stream_key: Sequence[int] = ()) -> FDKernel:
    """Sinkhorn-scaled ``exp`` of standard Gaussian noise; deterministic in ``(m, seed, stream_key)``."""
    if m < 1:
        raise InvalidInput("kernel size must be >= 1")
    rng = stream(seed, *stream_key)
    x = np.exp(rng.standard_normal((m, m)))
    return FDKernel(_scale(x, 1.0))


def sample_fractional_partition(
    m: int, k: int, seed: int, mode: str = "soft", stream_key: Sequence[int] = ()
) -> FractionalPartition:
    """Random fractional partition of ``m`` rows into ``k`` parts.

    ``soft`` scales positive noise to the partition constraints; ``hard``
    assigns rows to ``k`` groups of ``m / k`` via a Fisher-Yates shuffle,
    filling groups in index order.
    """
    if m < 1 or k < 1:
        raise InvalidInput("m and k must be >= 1")
    rng = stream(seed, *stream_key)
    if mode == "hard":
        return FractionalPartition.from_labels(random_balanced_labels(m, k, rng), k)
    if mode != "soft":
        raise InvalidInput(f"unknown sampler mode {mode!r}")
    x = np.exp(rng.standard_normal((m, k)))
    return FractionalPartition(_scale(x, m / k))


def random_balanced_labels(m: int, k: int, rng: np.random.Generator) -> np.ndarray:
    if m % k:
        raise HardModeInfeasible(f"hard partitions need k | m (m={m}, k={k})")
    order = rng.permutation(m)
    labels = np.empty(m, dtype=np.int64)
    labels[order] = np.arange(m) // (m // k)
    return labels


def count_balanced(m: int, k: int) -> int:
    """Number of labelled assignments of ``m`` rows into ``k`` groups of ``m / k``."""
    if m % k:
        return 0
    size = m // k
    return math.factorial(m) // math.factorial(size) ** k


def enumerate_balanced_labels(m: int, k: int) -> Iterator[np.ndarray]:
    """All balanced label vectors, in lexicographic order of group member sets."""
    if m % k:
        raise HardModeInfeasible(f"hard partitions need k | m (m={m}, k={k})")
    size = m // k
    labels = np.empty(m, dtype=np.int64)

    def rec(group: int, free: tuple[int, ...]) -> Iterator[np.ndarray]:
        if group == k - 1:
            labels[list(free)] = group
            yield labels.copy()
            return
        for chosen in combinations(free, size):
            labels[list(chosen)] = group
            rest = tuple(x for x in free if x not in chosen)
            yield from rec(group + 1, rest)

    yield from rec(0, tuple(range(m)))
