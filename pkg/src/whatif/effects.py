"""Post-discovery analytics: associated/independent partition, causal hierarchy
and intervention effects estimated by resampled high/low-group contrasts."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _accel
from .errors import DegenerateSplitError
from .graph import Pdag, ancestors, consistent_extension, descendants, topological_order
from .ingest import Dataset


@dataclass(frozen=True)
class Partition:
    associated: frozenset[int]
    independent: frozenset[int]

    def to_dict(self, names: Sequence[str]) -> dict:
        return {
            "associated": [names[i] for i in sorted(self.associated)],
            "independent": [names[i] for i in sorted(self.independent)],
        }


def partition_variables(g: Pdag) -> Partition:
    """Nodes with at least one edge are associated, isolated nodes independent."""
    assoc = frozenset(i for i in range(g.p) if g.degree(i) > 0)
    return Partition(assoc, frozenset(range(g.p)) - assoc)


@dataclass(frozen=True)
class Hierarchy:
    depth: tuple[int, ...]
    ancestry_score: tuple[int, ...]  # |descendants| - |ancestors|
    most_ancestor: int | None
    most_descendant: int | None
    ambiguous: bool  # undirected edges were resolved by the deterministic extension

    def to_dict(self, names: Sequence[str]) -> dict:
        return {
            "most_ancestor": None if self.most_ancestor is None else names[self.most_ancestor],
            "most_descendant": None if self.most_descendant is None else names[self.most_descendant],
            "orientation_ambiguous": self.ambiguous,
            "ancestry_score_definition": "|descendants| - |ancestors| in the deterministic consistent extension",
            "nodes": [
                {"name": names[i], "depth": self.depth[i], "ancestry_score": self.ancestry_score[i]}
                for i in range(len(self.depth))
            ],
        }


def hierarchy(g: Pdag) -> Hierarchy:
    dag = consistent_extension(g)
    depth = [0] * g.p
    for v in topological_order(dag):
        for c in dag.children[v]:
            depth[c] = max(depth[c], depth[v] + 1)
    score = [len(descendants(dag, i)) - len(ancestors(dag, i)) for i in range(g.p)]
    connected = [i for i in range(g.p) if g.degree(i) > 0]
    most_anc = min(connected, key=lambda i: (-score[i], i)) if connected else None
    most_desc = min(connected, key=lambda i: (score[i], i)) if connected else None
    return Hierarchy(tuple(depth), tuple(score), most_anc, most_desc, bool(g.undirected))


@dataclass
class EffectConfig:
    high_threshold: float = 5.0
    low_threshold: float = 3.0
    resamples: int = 1000
    subsample: int | None = None  # per-group draw size cap
    seed: int = 0


@dataclass(frozen=True, eq=False)
class EffectReport:
    """Mean differences (high group minus low group) in the data's own units.

    Intervals are 2.5/97.5 percentiles over the balanced resamples, widened
    if needed so they always contain the full-split point estimate.
    """

    target: int
    per_variable_effect: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    mean_abs_effect: float
    n_high: int
    n_low: int
    resamples: int
    subsample: int

    def to_dict(self, names: Sequence[str]) -> dict:
        return {
            "target": names[self.target],
            "mean_abs_effect": self.mean_abs_effect,
            "n_high": self.n_high,
            "n_low": self.n_low,
            "resamples": self.resamples,
            "subsample": self.subsample,
            "effects": [
                {
                    "variable": names[i],
                    "effect": float(self.per_variable_effect[i]),
                    "ci_low": float(self.ci_low[i]),
                    "ci_high": float(self.ci_high[i]),
                }
                for i in range(len(names))
                if i != self.target
            ],
        }


def _split(column: np.ndarray, cfg: EffectConfig) -> tuple[np.ndarray, np.ndarray]:
    hi_t, lo_t = cfg.high_threshold, cfg.low_threshold
    if hi_t == lo_t:
        raise ValueError("high and low thresholds must differ")
    if hi_t > lo_t:
        return column >= hi_t, column <= lo_t
    # swapped thresholds: the "high" group sits at the lower end
    return column <= hi_t, column >= lo_t


def estimate_intervention(data: Dataset, target: int, cfg: EffectConfig | None = None) -> EffectReport:
    """Contrast all variables between the high and low response groups of ``target``.

    Each resample draws ``min(n_high, n_low, cfg.subsample)`` rows from each
    group without replacement. The generator is seeded with ``cfg.seed + target``.
    """
    cfg = cfg or EffectConfig()
    if not data.complete:
        raise ValueError("estimate_intervention requires complete data")
    if data.specs[target].kind != "likert7":
        raise ValueError(f"target {data.specs[target].name!r} is not a likert7 variable")
    if cfg.resamples < 1:
        raise ValueError("resamples must be >= 1")
    col = data.values[:, target]
    if np.all(col == col[0]):
        if cfg.low_threshold < col[0] < cfg.high_threshold or cfg.high_threshold < col[0] < cfg.low_threshold:
            raise DegenerateSplitError(
                f"degenerate split on {data.specs[target].name!r}: high and low groups are both empty"
            )
        raise ValueError(f"target {data.specs[target].name!r} has zero variance")
    hi_mask, lo_mask = _split(col, cfg)
    empty = [nm for nm, mask in (("high", hi_mask), ("low", lo_mask)) if not mask.any()]
    if empty:
        raise DegenerateSplitError(
            f"degenerate split on {data.specs[target].name!r}: {' and '.join(empty)} group empty"
        )
    hi_vals = data.values[hi_mask]
    lo_vals = data.values[lo_mask]
    n_hi, n_lo = len(hi_vals), len(lo_vals)
    m = min(n_hi, n_lo, cfg.subsample or n_hi)

    rng = np.random.default_rng(cfg.seed + target)
    # the group at the upper end of the scale is always drawn first, so
    # swapping the thresholds reuses the same draws with roles reversed
    upper_first = cfg.high_threshold > cfg.low_threshold
    n_first, n_second = (n_hi, n_lo) if upper_first else (n_lo, n_hi)
    first = np.empty((cfg.resamples, m), dtype=np.int64)
    second = np.empty((cfg.resamples, m), dtype=np.int64)
    for r in range(cfg.resamples):
        first[r] = np.sort(rng.choice(n_first, m, replace=False))
        second[r] = np.sort(rng.choice(n_second, m, replace=False))
    idx_hi, idx_lo = (first, second) if upper_first else (second, first)
    diffs = _accel.resample_mean_diffs(hi_vals, lo_vals, idx_hi, idx_lo)

    effect = hi_vals.mean(axis=0) - lo_vals.mean(axis=0)
    ci_low = np.minimum(np.percentile(diffs, 2.5, axis=0), effect)
    ci_high = np.maximum(np.percentile(diffs, 97.5, axis=0), effect)
    others = np.arange(data.p) != target
    mean_abs = float(np.mean(np.abs(effect[others]))) if others.any() else 0.0
    for arr in (effect, ci_low, ci_high):
        arr.setflags(write=False)
    return EffectReport(target, effect, ci_low, ci_high, mean_abs, n_hi, n_lo, cfg.resamples, m)


@dataclass(frozen=True)
class RankedTarget:
    node: int
    report: EffectReport | None
    error: str | None = None


def rank_interventions(data: Dataset, g: Pdag, cfg: EffectConfig | None = None) -> list[RankedTarget]:
    """Estimate every associated likert7 variable and rank by mean absolute effect.

    Failed targets are kept (with their error message) after the ranked ones.
    """
    cfg = cfg or EffectConfig()
    if g.p != data.p:
        raise ValueError(f"graph has {g.p} nodes but data has {data.p} variables")
    part = partition_variables(g)
    targets = [i for i in sorted(part.associated) if data.specs[i].kind == "likert7"]
    if not targets:
        warnings.warn("no associated likert7 variables: nothing to rank", stacklevel=2)
        return []
    ok, failed = [], []
    for t in targets:
        try:
            ok.append(RankedTarget(t, estimate_intervention(data, t, cfg)))
        except (DegenerateSplitError, ValueError) as exc:
            failed.append(RankedTarget(t, None, str(exc)))
    ok.sort(key=lambda r: (-r.report.mean_abs_effect, r.node))
    return ok + failed
