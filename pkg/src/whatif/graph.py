"""DAG / CPDAG structures and the graph algorithms the search and analytics need.

Nodes are dense integer indices matching dataset column order. Ties are always
broken by ascending node index so every routine is deterministic.
"""
from __future__ import annotations

import heapq
import json
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

from .errors import GraphError, InconsistentGraphError


@dataclass(frozen=True)
class Dag:
    """Directed graph stored as per-node parent sets.

    Construction does not enforce acyclicity (``is_acyclic`` must be able to
    answer ``False``); routines that need a DAG check it themselves.
    """

    p: int
    parents: tuple[frozenset[int], ...]

    def __post_init__(self):
        parents = tuple(frozenset(ps) for ps in self.parents)
        if len(parents) != self.p:
            raise GraphError("parents must list one set per node")
        for j, ps in enumerate(parents):
            for i in ps:
                if not 0 <= i < self.p:
                    raise GraphError(f"node {i} out of range")
                if i == j:
                    raise GraphError(f"self-loop at node {j}")
        object.__setattr__(self, "parents", parents)

    @classmethod
    def from_edges(cls, p: int, edges: Iterable[tuple[int, int]]) -> "Dag":
        parents: list[set[int]] = [set() for _ in range(p)]
        for i, j in edges:
            if not (0 <= i < p and 0 <= j < p):
                raise GraphError(f"edge ({i}, {j}) out of range")
            parents[j].add(i)
        return cls(p, tuple(frozenset(s) for s in parents))

    @classmethod
    def empty(cls, p: int) -> "Dag":
        return cls(p, tuple(frozenset() for _ in range(p)))

    @cached_property
    def edges(self) -> tuple[tuple[int, int], ...]:
        return tuple(sorted((i, j) for j in range(self.p) for i in self.parents[j]))

    @cached_property
    def children(self) -> tuple[frozenset[int], ...]:
        ch: list[set[int]] = [set() for _ in range(self.p)]
        for i, j in self.edges:
            ch[i].add(j)
        return tuple(frozenset(s) for s in ch)

    def adjacent(self, i: int, j: int) -> bool:
        return i in self.parents[j] or j in self.parents[i]


@dataclass(frozen=True)
class Pdag:
    """Partially directed graph: directed pairs ``(i, j)`` mean i -> j; undirected pairs are stored with i < j."""

    p: int
    directed: frozenset[tuple[int, int]] = frozenset()
    undirected: frozenset[tuple[int, int]] = frozenset()

    def __post_init__(self):
        directed = frozenset((int(a), int(b)) for a, b in self.directed)
        undirected = frozenset((min(a, b), max(a, b)) for a, b in self.undirected)
        seen: set[tuple[int, int]] = set()
        for a, b in list(directed) + list(undirected):
            if a == b:
                raise GraphError(f"self-loop at node {a}")
            if not (0 <= a < self.p and 0 <= b < self.p):
                raise GraphError(f"edge ({a}, {b}) out of range")
            key = (min(a, b), max(a, b))
            if key in seen:
                raise GraphError(f"pair {key} appears more than once")
            seen.add(key)
        object.__setattr__(self, "directed", directed)
        object.__setattr__(self, "undirected", undirected)

    @classmethod
    def from_dag(cls, g: Dag) -> "Pdag":
        return cls(g.p, frozenset(g.edges))

    @cached_property
    def parents(self) -> tuple[frozenset[int], ...]:
        pa: list[set[int]] = [set() for _ in range(self.p)]
        for a, b in self.directed:
            pa[b].add(a)
        return tuple(frozenset(s) for s in pa)

    @cached_property
    def children(self) -> tuple[frozenset[int], ...]:
        ch: list[set[int]] = [set() for _ in range(self.p)]
        for a, b in self.directed:
            ch[a].add(b)
        return tuple(frozenset(s) for s in ch)

    @cached_property
    def neighbors(self) -> tuple[frozenset[int], ...]:
        """Undirected neighbours."""
        ne: list[set[int]] = [set() for _ in range(self.p)]
        for a, b in self.undirected:
            ne[a].add(b)
            ne[b].add(a)
        return tuple(frozenset(s) for s in ne)

    @cached_property
    def adjacents(self) -> tuple[frozenset[int], ...]:
        return tuple(self.parents[i] | self.children[i] | self.neighbors[i] for i in range(self.p))

    def adjacent(self, i: int, j: int) -> bool:
        return j in self.adjacents[i]

    def degree(self, i: int) -> int:
        return len(self.adjacents[i])

    def edge_mark(self, i: int, j: int) -> str:
        """One of ``"->"``, ``"<-"``, ``"--"`` or ``""`` for the pair (i, j)."""
        if (i, j) in self.directed:
            return "->"
        if (j, i) in self.directed:
            return "<-"
        if (min(i, j), max(i, j)) in self.undirected:
            return "--"
        return ""

    @property
    def n_edges(self) -> int:
        return len(self.directed) + len(self.undirected)


def _check_node(p: int, x: int) -> None:
    if not 0 <= x < p:
        raise GraphError(f"node {x} out of range [0, {p})")


def topological_order(g: Dag) -> list[int]:
    """Kahn's algorithm, smallest ready index first. Raises on a cycle."""
    indeg = [len(ps) for ps in g.parents]
    ready = [i for i in range(g.p) if indeg[i] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        v = heapq.heappop(ready)
        order.append(v)
        for c in g.children[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                heapq.heappush(ready, c)
    if len(order) != g.p:
        raise GraphError("graph contains a directed cycle")
    return order


def is_acyclic(g: Dag) -> bool:
    try:
        topological_order(g)
    except GraphError:
        return False
    return True


def _closure(start: int, step) -> set[int]:
    seen: set[int] = set()
    stack = list(step(start))
    while stack:
        v = stack.pop()
        if v not in seen:
            seen.add(v)
            stack.extend(step(v))
    return seen


def ancestors(g: Dag, x: int) -> set[int]:
    _check_node(g.p, x)
    out = _closure(x, lambda v: g.parents[v])
    out.discard(x)
    return out


def descendants(g: Dag, x: int) -> set[int]:
    _check_node(g.p, x)
    out = _closure(x, lambda v: g.children[v])
    out.discard(x)
    return out


def d_separated(g: Dag, x: Iterable[int], y: Iterable[int], z: Iterable[int]) -> bool:
    """Decide whether ``z`` d-separates ``x`` from ``y`` by reachability.

    Walks (node, direction) states from ``x``: a non-conditioned node passes
    the trail through in both directions, a collider only passes it when it
    or one of its descendants is in ``z``.
    """
    x, y, z = set(x), set(y), set(z)
    for v in x | y | z:
        _check_node(g.p, v)
    if x & y or x & z or y & z:
        raise GraphError("x, y and z must be pairwise disjoint")
    if not x or not y:
        return True
    # z together with its ancestors: the nodes at which a collider is active
    active = set(z)
    stack = list(z)
    while stack:
        v = stack.pop()
        for u in g.parents[v]:
            if u not in active:
                active.add(u)
                stack.append(u)
    UP, DOWN = 0, 1  # arrived from a child / from a parent
    visited: set[tuple[int, int]] = set()
    queue = deque((s, UP) for s in sorted(x))
    while queue:
        v, direction = queue.popleft()
        if (v, direction) in visited:
            continue
        visited.add((v, direction))
        if v not in z and v in y:
            return False
        if direction == UP and v not in z:
            queue.extend((u, UP) for u in g.parents[v])
            queue.extend((c, DOWN) for c in g.children[v])
        elif direction == DOWN:
            if v not in z:
                queue.extend((c, DOWN) for c in g.children[v])
            if v in active:
                queue.extend((u, UP) for u in g.parents[v])
    return True


def v_structures(g: Dag | Pdag) -> set[tuple[int, int, int]]:
    """Triples (a, c, b) with a -> c <- b, a < b and a, b nonadjacent (directed edges only)."""
    out = set()
    for c in range(g.p):
        pa = sorted(g.parents[c])
        for k, a in enumerate(pa):
            for b in pa[k + 1 :]:
                if not g.adjacent(a, b):
                    out.add((a, c, b))
    return out


def skeleton(g: Dag | Pdag) -> frozenset[tuple[int, int]]:
    if isinstance(g, Dag):
        return frozenset((min(a, b), max(a, b)) for a, b in g.edges)
    return frozenset({(min(a, b), max(a, b)) for a, b in g.directed} | g.undirected)


def cpdag_from_dag(g: Dag) -> Pdag:
    """Completed PDAG of the Markov equivalence class of ``g``."""
    if not is_acyclic(g):
        raise GraphError("cpdag_from_dag requires an acyclic graph")
    compelled = set()
    for a, c, b in v_structures(g):
        compelled.add((a, c))
        compelled.add((b, c))
    undirected = {(min(a, b), max(a, b)) for a, b in g.edges if (a, b) not in compelled}
    return meek_close(Pdag(g.p, frozenset(compelled), frozenset(undirected)))


def _meek_orients(g: Pdag, a: int, b: int) -> bool:
    """Whether the four orientation rules force a -> b for undirected a -- b."""
    adj = g.adjacents
    # R1: c -> a, c and b nonadjacent
    for c in g.parents[a]:
        if c != b and b not in adj[c]:
            return True
    # R2: a -> c -> b
    if g.children[a] & g.parents[b]:
        return True
    # R3: a -- c -> b, a -- d -> b, c and d nonadjacent
    cands = sorted(g.neighbors[a] & g.parents[b])
    for k, c in enumerate(cands):
        for d in cands[k + 1 :]:
            if d not in adj[c]:
                return True
    # R4: a -- d, d -> c -> b, a adjacent to c, d and b nonadjacent
    for d in g.neighbors[a]:
        if d == b or b in adj[d]:
            continue
        for c in g.children[d]:
            if c != a and b in g.children[c] and c in adj[a]:
                return True
    return False


def meek_close(g: Pdag) -> Pdag:
    """Apply the four orientation-propagation rules until nothing changes."""
    if not is_acyclic(Dag.from_edges(g.p, g.directed)):
        raise InconsistentGraphError("directed part of the PDAG already has a cycle")
    current = g
    changed = True
    while changed:
        changed = False
        for a, b in sorted(current.undirected):
            fwd = _meek_orients(current, a, b)
            back = _meek_orients(current, b, a)
            if fwd and back:
                raise InconsistentGraphError(f"edge {a} -- {b} is forced in both directions")
            if fwd or back:
                edge = (a, b) if fwd else (b, a)
                current = Pdag(
                    current.p,
                    current.directed | {edge},
                    current.undirected - {(a, b)},
                )
                changed = True
    if not is_acyclic(Dag.from_edges(current.p, current.directed)):
        raise InconsistentGraphError("orientation propagation produced a directed cycle")
    return current


def consistent_extension(g: Pdag) -> Dag:
    """A DAG with the PDAG's skeleton and orientations and no new v-structures.

    Repeatedly removes a sink whose undirected neighbours are adjacent to all
    its other adjacents, choosing the highest eligible index, so earlier
    indices end up earlier in the resulting topological order.
    """
    remaining = set(range(g.p))
    children = [set(s) for s in g.children]
    neighbors = [set(s) for s in g.neighbors]
    adj = [set(s) for s in g.adjacents]
    oriented = set(g.directed)
    while remaining:
        chosen = None
        for x in sorted(remaining, reverse=True):
            if children[x]:
                continue
            if all(adj[x] - {y} <= adj[y] for y in neighbors[x]):
                chosen = x
                break
        if chosen is None:
            raise InconsistentGraphError("PDAG admits no consistent extension")
        for y in neighbors[chosen]:
            oriented.add((y, chosen))
            neighbors[y].discard(chosen)
        for v in adj[chosen]:
            adj[v].discard(chosen)
            children[v].discard(chosen)
        remaining.discard(chosen)
    return Dag.from_edges(g.p, oriented)


def _dot_quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'


def to_dot(g: Pdag, names: Sequence[str], header: str = "") -> str:
    """DOT digraph; undirected edges carry ``dir=none``."""
    if len(names) != g.p:
        raise GraphError(f"expected {g.p} names, got {len(names)}")
    lines = []
    if header:
        lines.append(f"// {header}")
    lines.append("digraph causal {")
    lines.append("  node [shape=box];")
    for i, name in enumerate(names):
        lines.append(f"  n{i} [label={_dot_quote(name)}];")
    for a, b in sorted(g.directed):
        lines.append(f"  n{a} -> n{b};")
    for a, b in sorted(g.undirected):
        lines.append(f"  n{a} -> n{b} [dir=none];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def graph_to_dict(g: Pdag, names: Sequence[str]) -> dict:
    if len(names) != g.p:
        raise GraphError(f"expected {g.p} names, got {len(names)}")
    return {
        "nodes": list(names),
        "directed": [[names[a], names[b]] for a, b in sorted(g.directed)],
        "undirected": [[names[a], names[b]] for a, b in sorted(g.undirected)],
    }


def graph_from_dict(doc: dict) -> tuple[Pdag, list[str]]:
    names = list(doc["nodes"])
    index = {nm: i for i, nm in enumerate(names)}
    if len(index) != len(names):
        raise GraphError("duplicate node names in graph dump")
    try:
        directed = {(index[a], index[b]) for a, b in doc.get("directed", [])}
        undirected = {(index[a], index[b]) for a, b in doc.get("undirected", [])}
    except KeyError as exc:
        raise GraphError(f"edge references unknown node {exc}") from exc
    return Pdag(len(names), frozenset(directed), frozenset(undirected)), names


def to_json(g: Pdag, names: Sequence[str]) -> str:
    return json.dumps(graph_to_dict(g, names), indent=2, ensure_ascii=False) + "\n"


def from_json(text: str) -> tuple[Pdag, list[str]]:
    return graph_from_dict(json.loads(text))
