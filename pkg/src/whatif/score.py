"""Decomposable Gaussian BIC computed from sufficient statistics.

Lower is better. The local score of node y with parent set P is

    n * ln(RSS / n) + penalty_multiplier * (|P| + 2) * ln(n)

where RSS / n is the ML residual variance of the linear regression of y on P
(|P| coefficients, an intercept and a noise variance make up the parameter count).
"""
from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import _accel
from .graph import Dag, is_acyclic
from .ingest import Dataset

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SufficientStats:
    n: int
    covariance: np.ndarray
    means: np.ndarray
    underdetermined: bool = False  # n < p + 1: scores may be degenerate

    @property
    def p(self) -> int:
        return self.covariance.shape[0]


def compute_stats(data: Dataset) -> SufficientStats:
    """ML (divide-by-n) covariance and column means of a complete dataset."""
    if not data.complete:
        raise ValueError("compute_stats requires complete data")
    x = data.values
    means = x.mean(axis=0)
    centered = x - means
    cov = centered.T @ centered / data.n
    cov = (cov + cov.T) / 2
    cov.setflags(write=False)
    means.setflags(write=False)
    if data.n < data.p + 1:
        log.warning("n=%d < p+1=%d: local scores may be degenerate", data.n, data.p + 1)
    return SufficientStats(data.n, cov, means, underdetermined=data.n < data.p + 1)


class ScoreContext:
    """Sufficient statistics plus a memo of local scores keyed by (node, parent set).

    Lookups are lock-free; insertion is serialized. Two threads racing on the
    same key compute identical values, so either write is fine.
    """

    def __init__(self, stats: SufficientStats, penalty_multiplier: float = 1.0, trace=None):
        self.stats = stats
        self.penalty_multiplier = float(penalty_multiplier)
        self.memo: dict[tuple[int, frozenset[int]], float] = {}
        self.degenerate: set[tuple[int, frozenset[int]]] = set()
        self._lock = threading.Lock()
        self._trace = trace
        self._log_n = math.log(stats.n)

    @classmethod
    def from_data(cls, data: Dataset, penalty_multiplier: float = 1.0) -> "ScoreContext":
        return cls(compute_stats(data), penalty_multiplier)

    @property
    def n(self) -> int:
        return self.stats.n

    @property
    def p(self) -> int:
        return self.stats.p

    def compute_local(self, node: int, parents: frozenset[int]) -> tuple[float, bool]:
        """Fresh (unmemoized) local score and degeneracy flag."""
        var, degenerate = _accel.residual_variance(
            self.stats.covariance, node, np.array(sorted(parents), dtype=np.int64)
        )
        n = self.stats.n
        value = n * math.log(var) + self.penalty_multiplier * (len(parents) + 2) * self._log_n
        return value, degenerate

    def local(self, node: int, parents: Iterable[int]) -> float:
        parents = frozenset(parents)
        key = (node, parents)
        value = self.memo.get(key)
        if value is not None:
            return value
        if node in parents:
            raise ValueError(f"node {node} cannot be its own parent")
        if not 0 <= node < self.p or any(not 0 <= q < self.p for q in parents):
            raise ValueError("node index out of range")
        value, degenerate = self.compute_local(node, parents)
        with self._lock:
            self.memo[key] = value
            if degenerate:
                self.degenerate.add(key)
        if self._trace is not None:
            self._trace(f"{node}|{','.join(map(str, sorted(parents)))}|{value!r}")
        return value


def local_bic(ctx: ScoreContext, node: int, parents: Iterable[int]) -> float:
    return ctx.local(node, parents)


def global_bic(ctx: ScoreContext, g: Dag) -> float:
    if g.p != ctx.p:
        raise ValueError(f"graph has {g.p} nodes, statistics have {ctx.p}")
    if not is_acyclic(g):
        raise ValueError("global_bic requires an acyclic graph")
    return sum(ctx.local(j, g.parents[j]) for j in range(g.p))


def delta_score(ctx: ScoreContext, node: int, old_parents: Iterable[int], new_parents: Iterable[int]) -> float:
    """local(new) - local(old); negative is an improvement."""
    old_parents, new_parents = frozenset(old_parents), frozenset(new_parents)
    if old_parents == new_parents:
        if node in old_parents:
            raise ValueError(f"node {node} cannot be its own parent")
        return 0.0
    return ctx.local(node, new_parents) - ctx.local(node, old_parents)
