"""Greedy Equivalence Search over CPDAG states.

The forward phase applies the best valid Insert(x, y, T) operator until none
improves the BIC by more than ``epsilon``; the backward phase then does the
same with Delete(x, y, H). Every state is kept as a completed PDAG.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

from .graph import Dag, Pdag, consistent_extension, cpdag_from_dag
from .ingest import Dataset
from .score import ScoreContext, global_bic

log = logging.getLogger(__name__)

EPSILON = 1e-9
SUBSET_CAP = 12


@dataclass(frozen=True)
class Move:
    kind: str  # "insert" or "delete"
    x: int
    y: int
    subset: tuple[int, ...]  # T for insert, H for delete; sorted
    delta: float

    @property
    def tie_key(self) -> tuple:
        return (self.x, self.y, len(self.subset), self.subset)


@dataclass(frozen=True)
class SearchState:
    graph: Pdag
    score: float
    iteration: int = 0
    phase: str = "forward"


@dataclass
class GesOptions:
    penalty_multiplier: float = 1.0
    max_iter: int | None = None  # default 10 * p**2
    epsilon: float = EPSILON
    subset_cap: int = SUBSET_CAP
    debug: bool = False  # re-score every applied move from scratch


@dataclass
class TraceEntry:
    phase: str
    move: Move
    score: float  # cumulative score after the move


@dataclass
class SearchTrace:
    initial_score: float
    entries: list[TraceEntry] = field(default_factory=list)
    truncated: bool = False
    cap_hits: int = 0

    @property
    def final_score(self) -> float:
        return self.entries[-1].score if self.entries else self.initial_score

    def to_lines(self, names: Sequence[str]) -> list[str]:
        lines = []
        for e in self.entries:
            m = e.move
            subset = ",".join(names[i] for i in m.subset)
            lines.append(f"{e.phase}|{m.kind}|{names[m.x]}|{names[m.y]}|{subset}|{m.delta!r}|{e.score!r}")
        return lines


def _is_clique(g: Pdag, nodes: Sequence[int]) -> bool:
    adj = g.adjacents
    return all(b in adj[a] for a, b in itertools.combinations(nodes, 2))


def _semi_directed_path(g: Pdag, start: int, target: int, blocked: frozenset[int]) -> bool:
    """Is there a path start ~> target along undirected or forward-directed edges avoiding ``blocked``?"""
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        for w in itertools.chain(g.children[v], g.neighbors[v]):
            if w == target:
                return True
            if w not in seen and w not in blocked:
                seen.add(w)
                stack.append(w)
    return False


def _subsets(pool: frozenset[int], cap: int, grow: Callable[[frozenset[int]], float] | None = None) -> Iterator[tuple[int, ...]]:
    """All subsets of ``pool`` by (size, lexicographic); above ``cap`` elements,
    only the empty set, singletons and a greedily grown chain (best ``grow`` score first)."""
    items = sorted(pool)
    if len(items) <= cap:
        for k in range(len(items) + 1):
            yield from itertools.combinations(items, k)
        return
    log.info("subset cap hit: %d candidates > %d, using greedy growth", len(items), cap)
    yield ()
    for it in items:
        yield (it,)
    if grow is None:
        return
    current: list[int] = []
    left = list(items)
    while left:
        best = min(left, key=lambda v: (grow(frozenset(current + [v])), v))
        current.append(best)
        left.remove(best)
        if len(current) >= 2:
            yield tuple(sorted(current))


def _insert_candidates(state: SearchState, ctx: ScoreContext, cap: int):
    """Insert operators passing the clique condition, with deltas; path condition unchecked."""
    g = state.graph
    out = []
    for y in range(g.p):
        ne_y = g.neighbors[y]
        pa_y = g.parents[y]
        for x in range(g.p):
            if x == y or g.adjacent(x, y):
                continue
            na = ne_y & g.adjacents[x]
            t0 = ne_y - g.adjacents[x]

            def grow(t, na=na, pa_y=pa_y, x=x, y=y):
                s = na | t | pa_y
                return ctx.local(y, s | {x}) - ctx.local(y, s)

            for t in _subsets(t0, cap, grow):
                s = na | frozenset(t)
                if not _is_clique(g, sorted(s)):
                    continue
                base = s | pa_y
                delta = ctx.local(y, base | {x}) - ctx.local(y, base)
                out.append((Move("insert", x, y, t, delta), s))
    return out


def enumerate_insertions(state: SearchState, ctx: ScoreContext, cap: int = SUBSET_CAP) -> list[Move]:
    """All valid Insert(x, y, T) moves, ordered by (x, y, |T|, T)."""
    moves = [
        m
        for m, s in _insert_candidates(state, ctx, cap)
        if not _semi_directed_path(state.graph, m.y, m.x, s)
    ]
    return sorted(moves, key=lambda m: m.tie_key)


def enumerate_deletions(state: SearchState, ctx: ScoreContext, cap: int = SUBSET_CAP) -> list[Move]:
    """All valid Delete(x, y, H) moves, ordered by (x, y, |H|, H)."""
    g = state.graph
    moves = []
    for y in range(g.p):
        pa_y = g.parents[y]
        for x in sorted(pa_y | g.neighbors[y]):
            na = g.neighbors[y] & g.adjacents[x]

            def grow(h, na=na, pa_y=pa_y, x=x, y=y):
                base = (na - h) | pa_y
                return ctx.local(y, base - {x}) - ctx.local(y, base | {x})

            for h in _subsets(na, cap, grow):
                rest = na - frozenset(h)
                if not _is_clique(g, sorted(rest)):
                    continue
                base = rest | pa_y
                delta = ctx.local(y, base - {x}) - ctx.local(y, base | {x})
                moves.append(Move("delete", x, y, h, delta))
    return sorted(moves, key=lambda m: m.tie_key)


def select_best(moves: Sequence[Move], epsilon: float = EPSILON) -> Move | None:
    """Lowest delta; moves within ``epsilon`` of it tie and are broken by (x, y, |S|, S)."""
    if not moves:
        return None
    best = min(m.delta for m in moves)
    return min((m for m in moves if m.delta <= best + epsilon), key=lambda m: m.tie_key)


def _best_insertion(state: SearchState, ctx: ScoreContext, options: GesOptions) -> Move | None:
    # same answer as select_best(enumerate_insertions(...)) but checks the
    # path condition only for moves that could still win
    cands = sorted(_insert_candidates(state, ctx, options.subset_cap), key=lambda c: (c[0].delta, c[0].tie_key))
    winners: list[Move] = []
    for m, s in cands:
        if winners and m.delta > winners[0].delta + options.epsilon:
            break
        if not _semi_directed_path(state.graph, m.y, m.x, s):
            winners.append(m)
    return min(winners, key=lambda m: m.tie_key) if winners else None


def complete(g: Pdag) -> Pdag:
    """Completed PDAG of the class represented by ``g``."""
    return cpdag_from_dag(consistent_extension(g))


def apply_move(state: SearchState, m: Move, ctx: ScoreContext | None = None, debug: bool = False) -> SearchState:
    """Apply the operator's edge edits and re-complete the PDAG.

    With ``debug`` (and a context) the new state is re-scored from scratch and
    must match the incremental score within 1e-6.
    """
    g = state.graph
    directed = set(g.directed)
    undirected = set(g.undirected)

    def und(a, b):
        return (min(a, b), max(a, b))

    if m.kind == "insert":
        directed.add((m.x, m.y))
        for t in m.subset:
            undirected.discard(und(t, m.y))
            directed.add((t, m.y))
    elif m.kind == "delete":
        directed.discard((m.x, m.y))
        undirected.discard(und(m.x, m.y))
        for h in m.subset:
            if und(m.y, h) in undirected:
                undirected.discard(und(m.y, h))
                directed.add((m.y, h))
            if und(m.x, h) in undirected:
                undirected.discard(und(m.x, h))
                directed.add((m.x, h))
    else:
        raise ValueError(f"unknown move kind {m.kind!r}")
    edited = Pdag(g.p, frozenset(directed), frozenset(undirected))
    try:
        new_graph = complete(edited)
    except Exception as exc:  # an enumerated move must always be applicable
        raise RuntimeError(f"internal invariant violated applying {m}: {exc}") from exc
    new = SearchState(new_graph, state.score + m.delta, state.iteration + 1, state.phase)
    if debug and ctx is not None:
        fresh = global_bic(ctx, consistent_extension(new_graph))
        if abs(fresh - new.score) > 1e-6:
            raise RuntimeError(f"incremental score {new.score!r} != recomputed {fresh!r} after {m}")
    return new


def initial_state(ctx: ScoreContext) -> SearchState:
    empty = Pdag(ctx.p)
    return SearchState(empty, global_bic(ctx, Dag.empty(ctx.p)))


def search(ctx: ScoreContext, options: GesOptions | None = None) -> tuple[Pdag, SearchTrace]:
    """Run both phases from the empty graph on a prepared score context."""
    options = options or GesOptions()
    p = ctx.p
    max_iter = options.max_iter if options.max_iter is not None else 10 * p * p
    state = initial_state(ctx)
    trace = SearchTrace(initial_score=state.score)
    for phase in ("forward", "backward"):
        state = SearchState(state.graph, state.score, state.iteration, phase)
        while True:
            if state.iteration >= max_iter:
                trace.truncated = True
                log.warning("iteration cap %d reached in %s phase", max_iter, phase)
                return state.graph, trace
            if phase == "forward":
                best = _best_insertion(state, ctx, options)
            else:
                best = select_best(enumerate_deletions(state, ctx, options.subset_cap), options.epsilon)
            if best is None or best.delta >= -options.epsilon:
                break
            state = apply_move(state, best, ctx, debug=options.debug)
            trace.entries.append(TraceEntry(phase, best, state.score))
    return state.graph, trace


def run_ges(data: Dataset, options: GesOptions | None = None) -> tuple[Pdag, SearchTrace]:
    """Learn a CPDAG from complete (ideally standardized) data."""
    options = options or GesOptions()
    if not data.complete:
        raise ValueError("run_ges requires complete data")
    if data.p < 2:
        raise ValueError("run_ges needs at least two variables")
    if not data.standardized:
        log.info("running GES on unstandardized data")
    ctx = ScoreContext.from_data(data, options.penalty_multiplier)
    return search(ctx, options)
