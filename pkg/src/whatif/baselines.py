"""Descriptive ("what-is") baselines: correlation screening and one-sample
t-tests of each Likert item against the scale's neutral point."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .ingest import Dataset

STAR_CUTS = ((0.001, "***"), (0.01, "**"), (0.05, "*"))


@dataclass(frozen=True, eq=False)
class CorrelationScreen:
    method: str
    variables: tuple[int, ...]  # dataset column of each matrix row
    matrix: np.ndarray
    threshold: float
    strong_pairs: tuple[tuple[int, int, float], ...]  # dataset indices, |r| descending
    zero_variance: tuple[int, ...] = ()


def _ranks(x: np.ndarray) -> np.ndarray:
    return np.column_stack([rankdata(x[:, j], method="average") for j in range(x.shape[1])])


def correlation_matrix(x: np.ndarray, method: str = "pearson") -> tuple[np.ndarray, list[int]]:
    """Pairwise coefficients of the columns of ``x``; zero-variance columns get 0 off the diagonal."""
    if method not in ("pearson", "spearman"):
        raise ValueError(f"unknown correlation method {method!r}")
    x = np.asarray(x, dtype=np.float64)
    if method == "spearman":
        x = _ranks(x)
    centered = x - x.mean(axis=0)
    std = np.sqrt((centered**2).mean(axis=0))
    flat = [j for j in range(x.shape[1]) if std[j] <= 1e-12 * max(1.0, np.abs(x[:, j]).max(initial=0.0))]
    safe = std.copy()
    safe[flat] = 1.0
    z = centered / safe
    z[:, flat] = 0.0
    r = np.clip(z.T @ z / x.shape[0], -1.0, 1.0)
    r = (r + r.T) / 2
    np.fill_diagonal(r, 1.0)
    return r, flat


def correlation_screen(data: Dataset, method: str = "pearson", threshold: float = 0.5) -> CorrelationScreen:
    """Correlate the likert7/numeric columns and list pairs with |r| above ``threshold``."""
    if not data.complete:
        raise ValueError("correlation_screen requires complete data")
    cols = [j for j, s in enumerate(data.specs) if s.kind in ("likert7", "numeric")]
    r, flat = correlation_matrix(data.values[:, cols], method)
    pairs = []
    for a in range(len(cols)):
        for b in range(a + 1, len(cols)):
            if abs(r[a, b]) > threshold:
                pairs.append((cols[a], cols[b], float(r[a, b])))
    pairs.sort(key=lambda t: (-abs(t[2]), t[0], t[1]))
    r.setflags(write=False)
    return CorrelationScreen(method, tuple(cols), r, threshold, tuple(pairs), tuple(cols[j] for j in flat))


def _betacf(a: float, b: float, x: float) -> float:
    # modified Lentz evaluation of the incomplete-beta continued fraction
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = tiny if abs(d) < tiny else d
    d = 1.0 / d
    h = d
    for m in range(1, 1000):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h


def betainc_regularized(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    log_front = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_two_sided_p(t: float, df: float) -> float:
    """Two-sided tail probability of Student's t with ``df`` degrees of freedom."""
    if math.isinf(t):
        return 0.0
    return min(1.0, betainc_regularized(df / 2.0, 0.5, df / (df + t * t)))


def stars_for(p_value: float) -> str:
    for cut, mark in STAR_CUTS:
        if p_value < cut:
            return mark
    return ""


@dataclass(frozen=True)
class NeutralTest:
    variable: int
    effect_size: float  # mean - neutral, in scale units
    t_statistic: float
    p_value: float
    stars: str
    n: int
    degenerate: bool = False


def neutral_test(data: Dataset, variable: int, neutral: float = 4.0) -> NeutralTest:
    """One-sample two-sided t-test of the column mean against ``neutral``."""
    col = data.values[:, variable]
    col = col[~data.missing[:, variable]]
    n = col.size
    if n < 3:
        raise ValueError(f"neutral_test needs n >= 3, got {n}")
    mean = float(col.mean())
    effect = mean - neutral
    sd = float(col.std(ddof=1))
    if sd == 0.0:
        if effect == 0.0:
            return NeutralTest(variable, 0.0, 0.0, 1.0, "", n, degenerate=True)
        return NeutralTest(variable, effect, math.copysign(math.inf, effect), 0.0, "***", n, degenerate=True)
    t = effect / (sd / math.sqrt(n))
    p = t_two_sided_p(t, n - 1)
    return NeutralTest(variable, effect, t, p, stars_for(p), n)


def neutral_tests(data: Dataset, neutral: float = 4.0, bonferroni: bool = False) -> list[NeutralTest]:
    """Test every likert7 column; sorted by effect size ascending (most negative first)."""
    cols = [j for j, s in enumerate(data.specs) if s.kind == "likert7"]
    out = [neutral_test(data, j, neutral) for j in cols]
    if bonferroni and out:
        m = len(out)
        out = [
            NeutralTest(r.variable, r.effect_size, r.t_statistic, min(1.0, r.p_value * m), stars_for(min(1.0, r.p_value * m)), r.n, r.degenerate)
            for r in out
        ]
    return sorted(out, key=lambda r: (r.effect_size, r.variable))


def strong_pairs_table(screen: CorrelationScreen, names: Sequence[str]) -> list[list[str]]:
    rows = [["variable_a", "variable_b", "r"]]
    rows += [[names[a], names[b], f"{r:.6f}"] for a, b, r in screen.strong_pairs]
    return rows


def neutral_table(tests: Sequence[NeutralTest], names: Sequence[str]) -> list[list[str]]:
    rows = [["variable", "n", "effect_size", "t", "p_value", "stars"]]
    for r in tests:
        rows.append([names[r.variable], str(r.n), f"{r.effect_size:.6f}", f"{r.t_statistic:.6f}", f"{r.p_value:.6g}", r.stars])
    return rows
