"""Independent brute-force oracles used by the test suite.

None of these call into the routines they check: d-separation is decided by
enumerating every simple path, BIC by least squares on the raw rows, and
Markov equivalence by comparing skeletons and v-structures directly.
"""
from __future__ import annotations

import itertools
import math

import numpy as np


def edges_acyclic(p, edges):
    children = {i: [] for i in range(p)}
    for a, b in edges:
        children[a].append(b)
    state = [0] * p  # 0 new, 1 on stack, 2 done

    def visit(v):
        state[v] = 1
        for c in children[v]:
            if state[c] == 1 or (state[c] == 0 and not visit(c)):
                return False
        state[v] = 2
        return True

    return all(state[v] == 2 or visit(v) for v in range(p))


def all_dags(p):
    """Every DAG on p labelled nodes as a frozenset of directed edges."""
    pairs = list(itertools.combinations(range(p), 2))
    out = []
    for marks in itertools.product((0, 1, 2), repeat=len(pairs)):
        edges = []
        for (a, b), m in zip(pairs, marks):
            if m == 1:
                edges.append((a, b))
            elif m == 2:
                edges.append((b, a))
        if edges_acyclic(p, edges):
            out.append(frozenset(edges))
    return out


def descendants_of(p, edges, v):
    out, stack = set(), [v]
    while stack:
        u = stack.pop()
        for a, b in edges:
            if a == u and b not in out:
                out.add(b)
                stack.append(b)
    return out


def simple_paths(p, edges, x, y):
    """All simple undirected paths from x to y in the skeleton."""
    nbrs = {i: set() for i in range(p)}
    for a, b in edges:
        nbrs[a].add(b)
        nbrs[b].add(a)
    paths = []

    def walk(path):
        v = path[-1]
        if v == y:
            paths.append(list(path))
            return
        for w in sorted(nbrs[v]):
            if w not in path:
                path.append(w)
                walk(path)
                path.pop()

    walk([x])
    return paths


def path_blocked(edges, path, z, desc):
    for k in range(1, len(path) - 1):
        a, m, b = path[k - 1], path[k], path[k + 1]
        collider = (a, m) in edges and (b, m) in edges
        if collider:
            if m not in z and not (desc[m] & z):
                return True
        elif m in z:
            return True
    return False


def brute_d_separated(p, edges, x, y, z, paths=None, desc=None):
    edges = set(edges)
    z = set(z)
    if desc is None:
        desc = {v: descendants_of(p, edges, v) for v in range(p)}
    if paths is None:
        paths = simple_paths(p, edges, x, y)
    return all(path_blocked(edges, path, z, desc) for path in paths)


def v_structures_of(p, edges):
    edges = set(edges)
    adj = {(a, b) for a, b in edges} | {(b, a) for a, b in edges}
    out = set()
    for m in range(p):
        pa = sorted(a for a, b in edges if b == m)
        for a, b in itertools.combinations(pa, 2):
            if (a, b) not in adj:
                out.add((a, m, b))
    return frozenset(out)


def class_key(p, edges):
    """Markov equivalence class signature: skeleton plus v-structures."""
    skel = frozenset((min(a, b), max(a, b)) for a, b in edges)
    return skel, v_structures_of(p, edges)


class OlsBic:
    """Gaussian BIC by explicit least squares on the raw rows (memoized per family)."""

    def __init__(self, x: np.ndarray):
        self.x = np.asarray(x, dtype=float)
        self.n = self.x.shape[0]
        self._memo = {}

    def rss(self, node, parents):
        parents = tuple(sorted(parents))
        y = self.x[:, node]
        design = np.column_stack([np.ones(self.n)] + [self.x[:, q] for q in parents])
        coef, *_ = np.linalg.lstsq(design, y, rcond=None)
        resid = y - design @ coef
        return float(resid @ resid)

    def local(self, node, parents):
        key = (node, frozenset(parents))
        if key not in self._memo:
            rss = self.rss(node, parents)
            self._memo[key] = self.n * math.log(rss / self.n) + (len(parents) + 2) * math.log(self.n)
        return self._memo[key]

    def total(self, p, edges):
        return sum(self.local(j, {a for a, b in edges if b == j}) for j in range(p))


def exhaustive_best_class(x: np.ndarray, dags=None):
    """(class key, score) of the BIC-minimal Markov equivalence class, plus the runner-up gap."""
    p = x.shape[1]
    dags = dags if dags is not None else all_dags(p)
    bic = OlsBic(x)
    best = {}
    for edges in dags:
        key = class_key(p, edges)
        s = bic.total(p, edges)
        best[key] = min(best.get(key, math.inf), s)
    ranked = sorted(best.items(), key=lambda kv: kv[1])
    gap = ranked[1][1] - ranked[0][1] if len(ranked) > 1 else math.inf
    return ranked[0][0], ranked[0][1], gap


def pdag_class_key(g):
    """Class signature of a CPDAG estimate (skeleton plus its directed v-structures)."""
    skel = frozenset({(min(a, b), max(a, b)) for a, b in g.directed} | set(g.undirected))
    adj = set(skel) | {(b, a) for a, b in skel}
    out = set()
    for m in range(g.p):
        pa = sorted(a for a, b in g.directed if b == m)
        for a, b in itertools.combinations(pa, 2):
            if (a, b) not in adj:
                out.add((a, m, b))
    return skel, frozenset(out)


def brute_pearson(x, i, j):
    a, b = x[:, i], x[:, j]
    n = len(a)
    ma, mb = sum(a) / n, sum(b) / n
    sab = sum((u - ma) * (v - mb) for u, v in zip(a, b))
    saa = sum((u - ma) ** 2 for u in a)
    sbb = sum((v - mb) ** 2 for v in b)
    if saa == 0 or sbb == 0:
        return 0.0
    return sab / math.sqrt(saa * sbb)


def brute_midranks(col):
    order = sorted(range(len(col)), key=lambda k: col[k])
    ranks = [0.0] * len(col)
    k = 0
    while k < len(order):
        m = k
        while m + 1 < len(order) and col[order[m + 1]] == col[order[k]]:
            m += 1
        avg = (k + m) / 2 + 1
        for t in range(k, m + 1):
            ranks[order[t]] = avg
        k = m + 1
    return ranks
