"""Self-verification suite: exact identities checked on built-in and random instances.

Every check returns a :class:`CheckResult`; :func:`run_all` stops at nothing
and reports all of them, in a fixed order, so the first failure is well
defined.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from sgraphon.grid import Graph, GridMeasure, RhoMetric, coarsen, embed_graph, refine, rho_distance
from sgraphon.kernels import (
    FractionalPartition,
    kernel_to_partition,
    pushforward,
    quotient,
    sample_doubly_stochastic,
    sample_fractional_partition,
)
from sgraphon.rng import stream


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    cases: int
    worst: float
    tolerance: float
    seconds: float = 0.0

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag} {self.name}: {self.cases} cases, worst {self.worst:.3g} (tol {self.tolerance:g}), {self.seconds:.2f}s"


def random_measure(rng: np.random.Generator, k: int) -> GridMeasure:
    x = rng.random((k, k)) * (rng.random((k, k)) < 0.7)
    x = x + x.T
    if x.sum() == 0:
        x[0, 0] = 1.0
    return GridMeasure(x / x.sum())


def random_graph(rng: np.random.Generator, n: int) -> Graph:
    while True:
        mask = rng.random((n, n)) < rng.uniform(0.2, 0.8)
        edges = {(i + 1, j + 1) for i in range(n) for j in range(i + 1, n) if mask[i, j]}
        if edges:
            return Graph(n, frozenset(edges))


def random_partition(rng: np.random.Generator, m: int, k: int, seed: int, key: tuple) -> FractionalPartition:
    mode = "hard" if m % k == 0 and rng.random() < 0.5 else "soft"
    return sample_fractional_partition(m, k, seed, mode, key)


def cell_masses_geometric(m: GridMeasure, big_k: int) -> np.ndarray:
    """Mass of ``m`` on every cell of the ``K``-grid by explicit rectangle intersection."""
    k = m.resolution
    lo = np.arange(k) / k
    hi = np.arange(1, k + 1) / k
    out = np.zeros((big_k, big_k))
    dens = m.density
    for r in range(big_k):
        wx = np.clip(np.minimum(hi, (r + 1) / big_k) - np.maximum(lo, r / big_k), 0, None)
        for s in range(big_k):
            wy = np.clip(np.minimum(hi, (s + 1) / big_k) - np.maximum(lo, s / big_k), 0, None)
            out[r, s] = math.fsum((dens * np.outer(wx, wy)).ravel())
    return out


def _timed(name: str, tol: float, fn: Callable[[], tuple[int, float]]) -> CheckResult:
    t0 = time.perf_counter()
    cases, worst = fn()
    return CheckResult(name, worst <= tol, cases, worst, tol, time.perf_counter() - t0)


def check_total_mass(pool: list[GridMeasure]) -> CheckResult:
    def run() -> tuple[int, float]:
        return len(pool), max(abs(math.fsum(m.masses.ravel()) - 1.0) for m in pool)

    return _timed("total-mass", 1e-12, run)


def check_coarsen(seed: int, cases: int = 100) -> CheckResult:
    def run() -> tuple[int, float]:
        worst = 0.0
        for c in range(cases):
            rng = stream(seed, 1, c)
            m = random_measure(rng, int(rng.integers(1, 17)))
            big_k = int(rng.integers(1, 17))
            n = coarsen(m, big_k)
            worst = max(worst, float(np.max(np.abs(n.masses - cell_masses_geometric(m, big_k)))))
        return cases, worst

    return _timed("coarsen-cell-mass", 1e-10, run)


def check_pushforward(seed: int, cases: int = 100) -> CheckResult:
    def run() -> tuple[int, float]:
        worst = 0.0
        for c in range(cases):
            rng = stream(seed, 2, c)
            f = sample_doubly_stochastic(int(rng.integers(1, 9)), seed, (2, c))
            m = random_measure(rng, int(rng.integers(1, 9)))
            out = pushforward(f, m)
            # the constructor symmetrises, so inspect the raw product as well
            res = out.resolution
            s = f.refined(res // f.resolution).weights
            raw = s.T @ refine(m, res // m.resolution).masses @ s
            worst = max(
                worst,
                abs(math.fsum(raw.ravel()) - 1.0),
                float(np.max(np.abs(raw - raw.T))),
                abs(math.fsum(out.masses.ravel()) - 1.0),
            )
        return cases, worst

    return _timed("pushforward-mass-symmetry", 1e-12, run)


def check_quotient_membership(seed: int, cases: int = 1000) -> CheckResult:
    def run() -> tuple[int, float]:
        worst = 0.0
        for c in range(cases):
            rng = stream(seed, 3, c)
            m = random_measure(rng, int(rng.integers(1, 13)))
            k = int(rng.integers(1, 7))
            q = quotient(random_partition(rng, m.resolution, k, seed, (3, c)), m)
            neg = max(0.0, -float(q.min()))
            worst = max(worst, neg, float(np.max(np.abs(q - q.T))), abs(math.fsum(q.ravel()) - 1.0))
        return cases, worst

    return _timed("quotient-mk-star", 1e-12, run)


def check_bridge(seed: int, cases: int = 1000) -> CheckResult:
    def run() -> tuple[int, float]:
        worst = 0.0
        for c in range(cases):
            rng = stream(seed, 4, c)
            size = int(rng.integers(1, 11))
            f = sample_doubly_stochastic(size, seed, (4, c))
            m = random_measure(rng, size)
            diff = quotient(kernel_to_partition(f), m) - pushforward(f, m).masses
            worst = max(worst, float(np.max(np.abs(diff))))
        return cases, worst

    return _timed("kernel-partition-bridge", 1e-12, run)


def check_uniform_collapse(seed: int, cases: int = 1000) -> CheckResult:
    def run() -> tuple[int, float]:
        worst = 0.0
        for c in range(cases):
            rng = stream(seed, 5, c)
            size = int(rng.integers(1, 17))
            k = int(rng.integers(1, 7))
            q = quotient(random_partition(rng, size, k, seed, (5, c)), GridMeasure.uniform(size))
            worst = max(worst, float(np.max(np.abs(q - 1.0 / (k * k)))))
        return cases, worst

    return _timed("uniform-collapse", 1e-12, run)


def check_refinement(seed: int, cases: int = 100) -> CheckResult:
    metric = RhoMetric(24)

    def run() -> tuple[int, float]:
        worst = 0.0
        for c in range(cases):
            rng = stream(seed, 6, c)
            m = random_measure(rng, int(rng.integers(1, 9)))
            worst = max(worst, rho_distance(m, refine(m, int(rng.integers(1, 5))), metric))
        return cases, worst

    return _timed("refinement-invariance", 1e-10, run)


def check_permutation(seed: int, cases: int = 20) -> CheckResult:
    def run() -> tuple[int, float]:
        worst = 0.0
        for c in range(cases):
            rng = stream(seed, 7, c)
            g = random_graph(rng, int(rng.integers(2, 13)))
            perm = rng.permutation(g.n)
            k = int(rng.integers(1, 5))
            p = random_partition(rng, g.n, k, seed, (7, c))
            lhs = quotient(p.permuted(perm), embed_graph(g.permuted(perm)))
            rhs = quotient(p, embed_graph(g))
            worst = max(worst, float(np.max(np.abs(lhs - rhs))))
        return cases, worst

    return _timed("permutation-equivariance", 0.0, run)


def builtin_measures() -> list[GridMeasure]:
    k2 = embed_graph(Graph(2, frozenset({(1, 2)})))
    k3 = embed_graph(Graph(3, frozenset({(1, 2), (1, 3), (2, 3)})))
    star = embed_graph(Graph(4, frozenset({(1, 2), (1, 3), (1, 4)})))
    return [GridMeasure.uniform(1), GridMeasure.uniform(3), k2, k3, star, coarsen(k2, 3)]


def corrupt(m: GridMeasure, factor: float = 1.01) -> GridMeasure:
    """Scale the masses of ``m`` without validation (development aid for the suite)."""
    bad = object.__new__(GridMeasure)
    object.__setattr__(bad, "masses", m.masses * factor)
    return bad


def run_all(seed: int = 0, corrupt_mass: bool = False) -> list[CheckResult]:
    pool = builtin_measures()
    if corrupt_mass:
        pool[2] = corrupt(pool[2])
    return [
        check_total_mass(pool),
        check_coarsen(seed),
        check_pushforward(seed),
        check_quotient_membership(seed),
        check_bridge(seed),
        check_uniform_collapse(seed),
        check_refinement(seed),
        check_permutation(seed),
    ]
