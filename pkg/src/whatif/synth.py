"""Synthetic linear-Gaussian SCMs, Likert discretization and recovery metrics."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .graph import Dag, Pdag, cpdag_from_dag, topological_order
from .ingest import Dataset, VariableSpec

DEFAULT_CUTPOINTS = (-1.5, -0.9, -0.3, 0.3, 0.9, 1.5)


@dataclass(frozen=True, eq=False)
class Scm:
    graph: Dag
    weights: Mapping[tuple[int, int], float]
    noise_std: np.ndarray

    def __post_init__(self):
        edges = set(self.graph.edges)
        if set(self.weights) - edges:
            raise ValueError("weights given for edges not in the graph")
        noise = np.broadcast_to(np.asarray(self.noise_std, dtype=np.float64), (self.graph.p,)).copy()
        if np.any(noise <= 0):
            raise ValueError("noise_std must be positive")
        object.__setattr__(self, "noise_std", noise)

    @property
    def p(self) -> int:
        return self.graph.p

    def weight_matrix(self) -> np.ndarray:
        w = np.zeros((self.p, self.p))
        for (i, j), v in self.weights.items():
            w[i, j] = v
        return w

    def covariance(self) -> np.ndarray:
        """Analytic covariance (I - W)^-T diag(noise^2) (I - W)^-1."""
        inv = np.linalg.inv(np.eye(self.p) - self.weight_matrix())
        return inv.T @ np.diag(self.noise_std**2) @ inv


def random_dag(p: int, expected_degree: float, seed) -> Dag:
    """Random topological order; each forward pair gets an edge with probability degree/(p-1)."""
    if p < 1 or expected_degree < 0:
        raise ValueError("need p >= 1 and expected_degree >= 0")
    rng = np.random.default_rng(seed)
    order = rng.permutation(p)
    if p == 1:
        return Dag.empty(1)
    prob = min(1.0, expected_degree / (p - 1))
    draws = rng.random((p, p))
    edges = [
        (int(order[a]), int(order[b]))
        for a in range(p)
        for b in range(a + 1, p)
        if draws[a, b] < prob
    ]
    return Dag.from_edges(p, edges)


def random_scm(dag: Dag, seed, weight_range: tuple[float, float] = (0.5, 1.0), noise_std: float = 1.0) -> Scm:
    """Edge weights uniform on +-[lo, hi] with random sign."""
    rng = np.random.default_rng(seed)
    lo, hi = weight_range
    weights = {}
    for e in dag.edges:
        weights[e] = float(rng.uniform(lo, hi) * rng.choice((-1.0, 1.0)))
    return Scm(dag, weights, np.full(dag.p, noise_std))


def chain_scm(p: int, weight: float, noise_std: float = 1.0) -> Scm:
    dag = Dag.from_edges(p, [(k, k + 1) for k in range(p - 1)])
    return Scm(dag, {(k, k + 1): weight for k in range(p - 1)}, np.full(p, noise_std))


def sample(scm: Scm, n: int, seed, names: Sequence[str] | None = None) -> Dataset:
    """Ancestral sampling: each node is its weighted parents plus Gaussian noise."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((n, scm.p)) * scm.noise_std
    x = np.zeros((n, scm.p))
    for j in topological_order(scm.graph):
        col = noise[:, j].copy()
        for i in sorted(scm.graph.parents[j]):
            col += scm.weights.get((i, j), 0.0) * x[:, i]
        x[:, j] = col
    names = list(names) if names is not None else [f"X{j}" for j in range(scm.p)]
    specs = tuple(VariableSpec(nm, "numeric", "synthetic") for nm in names)
    return Dataset(x, np.zeros_like(x, dtype=bool), specs)


def likertize(data: Dataset, cutpoints: Sequence[float] = DEFAULT_CUTPOINTS) -> Dataset:
    """Map each value to its bin index + 1 (1..7) given six ascending cutpoints."""
    cuts = np.asarray(cutpoints, dtype=np.float64)
    if cuts.shape != (6,) or np.any(np.diff(cuts) <= 0):
        raise ValueError("need six strictly ascending cutpoints")
    if not data.complete:
        raise ValueError("likertize requires complete data")
    binned = np.searchsorted(cuts, data.values, side="right") + 1.0
    specs = tuple(VariableSpec(s.name, "likert7", s.category) for s in data.specs)
    return Dataset(binned, np.zeros_like(binned, dtype=bool), specs, provenance=data.provenance)


@dataclass(frozen=True)
class RecoveryMetrics:
    shd: int
    skeleton_precision: float
    skeleton_recall: float
    orientation_accuracy: float


def recovery_metrics(truth: Dag, estimate: Pdag) -> RecoveryMetrics:
    """Compare the true CPDAG with an estimated one.

    SHD counts node pairs whose edge status (absent, ->, <-, --) differs.
    Orientation accuracy is over pairs directed in both graphs.
    """
    if truth.p != estimate.p:
        raise ValueError(f"size mismatch: truth has {truth.p} nodes, estimate {estimate.p}")
    ref = cpdag_from_dag(truth)
    shd = 0
    tp = n_ref = n_est = 0
    both_directed = agree = 0
    for i in range(ref.p):
        for j in range(i + 1, ref.p):
            a, b = ref.edge_mark(i, j), estimate.edge_mark(i, j)
            shd += a != b
            n_ref += a != ""
            n_est += b != ""
            tp += a != "" and b != ""
            if a in ("->", "<-") and b in ("->", "<-"):
                both_directed += 1
                agree += a == b
    return RecoveryMetrics(
        shd=shd,
        skeleton_precision=tp / n_est if n_est else 1.0,
        skeleton_recall=tp / n_ref if n_ref else 1.0,
        orientation_accuracy=agree / both_directed if both_directed else 1.0,
    )
