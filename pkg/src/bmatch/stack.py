"""Primal-dual stack matching: near-feasible, greedy-marking, and feasible runs.

The push phase repeatedly computes a maximal matching under reduced
per-layer capacities ⌈ε·b(v)⌉, pushes it as a stack layer, raises the dual
value of each matched endpoint by δ(e) = (w(e) − y_u/b(u) − y_v/b(v))/2,
and deletes every live edge that became *weakly covered* — dual load at or
above w(e)/(3+2ε).  Popping layers LIFO then builds the solution: a layer
edge is included while both endpoints still have budget, and a node that
runs out takes its lower stacked edges down with it.  Degrees can exceed
b(v) by at most the one layer that crossed the line, hence the ⌈(1+ε)b(v)⌉
bound.

The feasible variant never lets an inclusion cross b(v): a layer edge whose
endpoint would be pushed past its budget becomes *overflow* instead, and
after the pop finishes the overflow pool is re-admitted through maximal
"sublayers" restricted to edges whose frozen δ is not dominated by an
endpoint-sharing pool edge with δ(f) > (1+ε)δ(e).

Dual values are never stored per node; they are recomputed as the sum of
frozen δ over a node's stacked edges, which keeps every round's decision a
function of locally visible edge records plus the one summary each
neighbour ships.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

from .engine import Engine, RoundLedger
from .graph import (
    BipartiteGraph,
    EdgeKey,
    EdgeRecord,
    EdgeState,
    Matching,
    NodeId,
    approx_ge,
    is_feasible,
    matching_value,
    violation_metric,
)
from .maximal import run_maximal_views
from .protocol import (
    EdgeView,
    budget_left,
    collect,
    make_stream,
    restated,
    run_stage,
    views_from_graph,
)

E = EdgeState.IN_GRAPH
M = EdgeState.IN_MAXIMAL
S = EdgeState.STACKED
R = EdgeState.REMOVED
I = EdgeState.IN_SOLUTION


@dataclass(frozen=True)
class StackParams:
    """Slackness ε and the safety cap on push iterations."""

    epsilon: float
    max_push_rounds: int = 200

    def __post_init__(self) -> None:
        if not (self.epsilon > 0):
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.max_push_rounds < 1:
            raise ValueError("max_push_rounds must be at least 1")


@dataclass(frozen=True)
class DualState:
    """Dual values y(v); absent nodes are at zero."""

    y: Mapping[NodeId, float]

    def __post_init__(self) -> None:
        bad = {v: x for v, x in self.y.items() if x < 0}
        if bad:
            raise ValueError(f"negative dual values: {bad}")

    def value(self, v: NodeId) -> float:
        return self.y.get(v, 0.0)

    def total(self) -> float:
        return sum(self.y.values())


@dataclass(frozen=True)
class LayeredStack:
    """Disjoint layers of edge keys, in push order (last = top of stack)."""

    layers: tuple[frozenset[EdgeKey], ...]

    def __post_init__(self) -> None:
        seen: set[EdgeKey] = set()
        for layer in self.layers:
            if layer & seen:
                raise ValueError(f"layers overlap on {sorted(layer & seen)}")
            seen |= layer

    def __len__(self) -> int:
        return len(self.layers)

    def __bool__(self) -> bool:
        return any(self.layers)

    def layer_of(self) -> dict[EdgeKey, int]:
        return {key: t for t, layer in enumerate(self.layers) for key in layer}


def delta(e: EdgeRecord, y: DualState, g: BipartiteGraph) -> float:
    """Dual increment an inclusion of ``e`` would pay each endpoint."""
    u, v = e.key
    return (e.weight - y.value(u) / g.capacity(u) - y.value(v) / g.capacity(v)) / 2.0


def is_weakly_covered(e: EdgeRecord, y: DualState, g: BipartiteGraph, epsilon: float) -> bool:
    u, v = e.key
    load = y.value(u) / g.capacity(u) + y.value(v) / g.capacity(v)
    return approx_ge(load, e.weight / (3.0 + 2.0 * epsilon))


def layer_capacity(epsilon: float, b: int) -> int:
    """⌈ε·b⌉ with a relative guard against float noise just above an integer."""
    x = epsilon * b
    return max(1, math.ceil(x - 1e-9 * max(1.0, abs(x))))


# ---- push rounds ----


def _dual_summary(node: NodeId, incident: Sequence[EdgeView]) -> float:
    """This node's dual value: the sum of frozen δ over its stacked edges."""
    return sum(ev.delta for ev in incident if ev.state is S)


def _dual_update_merge(t: int):
    def merge(node, msgs, mine, my_y):
        out = []
        for m in msgs:
            ev = m.edge
            if ev.state is not M:
                out.append(ev)
                continue
            ys = [0.0, 0.0]
            ys[m.sender_slot] = m.summary
            ys[1 - m.sender_slot] = my_y
            d = (ev.weight - ys[0] / ev.b[0] - ys[1] / ev.b[1]) / 2.0
            # a matched edge whose dual constraint is already met has nothing
            # to pay; it is covered, not stacked
            out.append(restated(ev, S, layer=t, delta=d) if d > 0.0 else restated(ev, R))
        return out

    return merge


def _cover_delete_merge(epsilon: float):
    threshold = 3.0 + 2.0 * epsilon

    def merge(node, msgs, mine, my_y):
        out = []
        for m in msgs:
            ev = m.edge
            if ev.state is not E:
                out.append(ev)
                continue
            ys = [0.0, 0.0]
            ys[m.sender_slot] = m.summary
            ys[1 - m.sender_slot] = my_y
            load = ys[0] / ev.b[0] + ys[1] / ev.b[1]
            out.append(restated(ev, R) if approx_ge(load, ev.weight / threshold) else ev)
        return out

    return merge


def _push(
    engine: Engine, g: BipartiteGraph, params: StackParams, marking: str
) -> tuple[dict[EdgeKey, EdgeView], int]:
    """Run push iterations to exhaustion; returns final views and layer count."""
    views = views_from_graph(g)
    caps = {v: layer_capacity(params.epsilon, g.capacity(v)) for v in g.nodes}
    t = 0
    while True:
        live = {k: ev for k, ev in views.items() if ev.state is E}
        if not live:
            return views, t
        if t >= params.max_push_rounds:
            w = [ev.weight for ev in live.values()]
            raise RuntimeError(
                f"push did not converge within {t} iterations: {len(live)} live "
                f"edges remain (weights {min(w):g}..{max(w):g}, "
                f"epsilon={params.epsilon}); raise max_push_rounds if the "
                f"weight spread genuinely needs more layers"
            )
        sub = {
            k: EdgeView(key=k, weight=ev.weight, b=ev.b,
                        cap=(caps[k[0]], caps[k[1]]))
            for k, ev in live.items()
        }
        matched_views, _ = run_maximal_views(engine, sub, marking=marking, prefix="push-")
        matched = [k for k, ev in matched_views.items() if ev.state is M]
        if not matched:
            raise RuntimeError("a maximal matching of a nonempty live graph came back empty")
        for k in matched:
            views[k] = restated(views[k], M)
        stream = make_stream(views.values())
        stream = run_stage(
            engine, stream, "push-dual-update", _dual_update_merge(t), summarize=_dual_summary
        )
        stream = run_stage(
            engine, stream, "push-cover-delete", _cover_delete_merge(params.epsilon),
            summarize=_dual_summary,
        )
        # covered edges are gone for good: drop them so later rounds only
        # ship edges that still carry information
        views = {k: ev for k, ev in collect(stream).items() if ev.state is not R}
        t += 1


def _stack_from_views(views: Mapping[EdgeKey, EdgeView], num_layers: int) -> LayeredStack:
    layers: list[set[EdgeKey]] = [set() for _ in range(num_layers)]
    for key, ev in views.items():
        if ev.state is S:
            layers[ev.layer].add(key)
    return LayeredStack(tuple(frozenset(layer) for layer in layers))


def _duals_from_views(views: Mapping[EdgeKey, EdgeView]) -> DualState:
    y: dict[NodeId, float] = {}
    for key, ev in views.items():
        if ev.state is S or ev.state is I:
            y[key[0]] = y.get(key[0], 0.0) + ev.delta
            y[key[1]] = y.get(key[1], 0.0) + ev.delta
    return DualState(y)


def push_phase(
    g: BipartiteGraph,
    params: StackParams,
    marking_strategy: str = "random",
    seed: int = 0,
    *,
    engine: Engine | None = None,
) -> tuple[LayeredStack, DualState, list[RoundLedger]]:
    """Build the layered stack and final duals; also reports round ledgers."""
    eng = engine if engine is not None else Engine(seed=seed)
    start = len(eng.ledgers)
    views, t = _push(eng, g, params, marking_strategy)
    return _stack_from_views(views, t), _duals_from_views(views), list(eng.ledgers[start:])


# ---- pop rounds (capacity violations allowed up to the top layer) ----


def _budget_summary(node: NodeId, incident: Sequence[EdgeView]) -> int:
    return budget_left(node, incident)


def _pop_merge(t: int):
    def merge(node, msgs, mine, my_rem):
        out = []
        for m in msgs:
            ev = m.edge
            if ev.state is not S:
                out.append(ev)
                continue
            rems = [0, 0]
            rems[m.sender_slot] = m.summary
            rems[1 - m.sender_slot] = my_rem
            if ev.layer == t:
                # both endpoints still hold budget: take the edge, even if
                # this layer collectively oversubscribes one of them
                out.append(restated(ev, I) if rems[0] >= 1 and rems[1] >= 1 else restated(ev, R))
            elif rems[0] <= 0 or rems[1] <= 0:
                out.append(restated(ev, R))
            else:
                out.append(ev)
        return out

    return merge


def _pop_rounds(
    engine: Engine, views: dict[EdgeKey, EdgeView], num_layers: int
) -> dict[EdgeKey, EdgeView]:
    current = views
    for t in reversed(range(num_layers)):
        if not current:
            break
        stream = make_stream(current.values())
        stream = run_stage(engine, stream, "pop", _pop_merge(t), summarize=_budget_summary)
        current = {k: ev for k, ev in collect(stream).items() if ev.state is not R}
    return current


def pop_phase(
    stack: LayeredStack,
    g: BipartiteGraph,
    params: StackParams,
    *,
    engine: Engine | None = None,
) -> Matching:
    """Pop ``stack`` over ``g``'s capacities and return the included edges."""
    del params  # the pop rounds need no slack parameters; kept for interface parity
    eng = engine if engine is not None else Engine(seed=0)
    views: dict[EdgeKey, EdgeView] = {}
    for t, layer in enumerate(stack.layers):
        for key in layer:
            rec = g.edge(key)
            b = (g.capacity(key[0]), g.capacity(key[1]))
            views[key] = EdgeView(key=key, weight=rec.weight, b=b, cap=b, state=S, layer=t)
    final = _pop_rounds(eng, views, len(stack.layers))
    return Matching.from_edges(g, [k for k, ev in final.items() if ev.state is I])


# ---- feasible pop: overflow pool plus sublayers ----


def _eligibility_merge(node, msgs, mine, my_rem):
    out = []
    for m in msgs:
        ev = m.edge
        if ev.state is not S:
            out.append(ev)
            continue
        rems = [0, 0]
        rems[m.sender_slot] = m.summary
        rems[1 - m.sender_slot] = my_rem
        if rems[0] <= 0 or rems[1] <= 0:
            out.append(restated(ev, R))
        else:
            out.append(ev)
    return out


def _resolve_summary(t: int):
    def summarize(node: NodeId, incident: Sequence[EdgeView]) -> tuple[int, int]:
        tentative = sum(1 for ev in incident if ev.state is S and ev.layer == t)
        return (tentative, budget_left(node, incident))

    return summarize


def _resolve_merge(t: int):
    def merge(node, msgs, mine, my_summary):
        my_tent, my_rem = my_summary
        my_exceeded = my_tent > my_rem
        out = []
        for m in msgs:
            ev = m.edge
            if ev.state is not S:
                out.append(ev)
                continue
            o_tent, o_rem = m.summary
            exceeded = my_exceeded or o_tent > o_rem
            if ev.layer == t:
                out.append(restated(ev, R if exceeded else I))
            else:
                # a node that overflowed loses its lower stacked edges too;
                # its remaining budget is reserved for the overflow pool
                out.append(restated(ev, R) if exceeded else ev)
        return out

    return merge


def _undominated(pool: Mapping[EdgeKey, float], epsilon: float) -> list[EdgeKey]:
    by_node: dict[NodeId, list[EdgeKey]] = {}
    for key in pool:
        by_node.setdefault(key[0], []).append(key)
        by_node.setdefault(key[1], []).append(key)
    out = []
    for key, d in pool.items():
        bar = (1.0 + epsilon) * d
        dominated = any(
            pool[f] > bar
            for node in key
            for f in by_node[node]
            if f != key
        )
        if not dominated:
            out.append(key)
    return sorted(out)


def _feasible_pop(
    engine: Engine,
    g: BipartiteGraph,
    params: StackParams,
    views: dict[EdgeKey, EdgeView],
    num_layers: int,
) -> tuple[dict[EdgeKey, EdgeView], int]:
    pool: dict[EdgeKey, EdgeView] = {}
    current = views
    for t in reversed(range(num_layers)):
        if not current:
            break
        stream = make_stream(current.values())
        stream = run_stage(
            engine, stream, "pop-eligibility", _eligibility_merge,
            summarize=_budget_summary,
        )
        eligible = collect(stream)
        stream = run_stage(
            engine, stream, "pop-resolve", _resolve_merge(t),
            summarize=_resolve_summary(t),
        )
        resolved = collect(stream)
        # an edge that was still eligible but got knocked out by its own
        # layer's oversubscription is overflow: it keeps its frozen delta
        # and competes again in the sublayer stage
        for key, ev in eligible.items():
            if ev.state is S and ev.layer == t and resolved[key].state is R:
                pool[key] = ev
        current = {k: ev for k, ev in resolved.items() if ev.state is not R}

    rem = {v: g.capacity(v) for v in g.nodes}
    for key, ev in current.items():
        if ev.state is I:
            rem[key[0]] -= 1
            rem[key[1]] -= 1
    if any(r < 0 for r in rem.values()):
        raise RuntimeError("pop over-included despite the overflow rule; protocol bug")

    def prune() -> None:
        for key in [k for k in pool if rem[k[0]] < 1 or rem[k[1]] < 1]:
            del pool[key]

    prune()
    safety = 2 * len(pool) + 8
    iterations = 0
    while pool:
        if iterations >= safety:
            raise RuntimeError(
                f"feasibility sublayers failed to drain the overflow pool "
                f"({len(pool)} edges left after {iterations} iterations)"
            )
        candidates = _undominated({k: ev.delta for k, ev in pool.items()}, params.epsilon)
        if not candidates:
            raise RuntimeError("dominance filter emptied a nonempty overflow pool")
        sub = {
            k: EdgeView(key=k, weight=g.weight(k),
                        b=(g.capacity(k[0]), g.capacity(k[1])),
                        cap=(rem[k[0]], rem[k[1]]))
            for k in candidates
        }
        matched_views, _ = run_maximal_views(engine, sub, marking="random", prefix="feasible-")
        for k, ev in sorted(matched_views.items()):
            if ev.state is not M:
                continue
            current[k] = restated(pool[k], I)
            rem[k[0]] -= 1
            rem[k[1]] -= 1
            del pool[k]
        prune()
        iterations += 1
    return current, iterations


# ---- the three public algorithms ----


@dataclass(frozen=True)
class StackStats:
    push_iterations: int
    rounds_total: int
    rounds_by_phase: Mapping[str, int]
    value: float
    violation: float
    feasibility_iterations: int = 0


def _run(
    g: BipartiteGraph,
    params: StackParams,
    seed: int,
    marking: str,
    engine: Engine | None,
    feasible: bool,
) -> tuple[Matching, StackStats]:
    eng = engine if engine is not None else Engine(seed=seed)
    start = len(eng.ledgers)
    views, t = _push(eng, g, params, marking)
    if feasible:
        final, fiters = _feasible_pop(eng, g, params, views, t)
    else:
        final = _pop_rounds(eng, views, t)
        fiters = 0
    m = Matching.from_edges(g, [k for k, ev in final.items() if ev.state is I])
    ledgers = eng.ledgers[start:]
    phases = Counter(l.phase_label for l in ledgers)
    stats = StackStats(
        push_iterations=t,
        rounds_total=len(ledgers),
        rounds_by_phase=dict(phases),
        value=matching_value(m, g),
        violation=violation_metric(m, g),
        feasibility_iterations=fiters,
    )
    return m, stats


def stack_mr(
    g: BipartiteGraph, params: StackParams, seed: int = 0, *, engine: Engine | None = None
) -> tuple[Matching, StackStats]:
    """Stack matching with uniform-random marking; degree ≤ ⌈(1+ε)b(v)⌉."""
    return _run(g, params, seed, "random", engine, feasible=False)


def stack_greedy_mr(
    g: BipartiteGraph, params: StackParams, seed: int = 0, *, engine: Engine | None = None
) -> tuple[Matching, StackStats]:
    """Same scheme, but marking prefers the heaviest live edges."""
    return _run(g, params, seed, "greedy", engine, feasible=False)


def stack_mr_feasible(
    g: BipartiteGraph, params: StackParams, seed: int = 0, *, engine: Engine | None = None
) -> tuple[Matching, StackStats]:
    """Strictly feasible stack matching (overflow edges re-admitted in sublayers)."""
    m, stats = _run(g, params, seed, "random", engine, feasible=True)
    if not is_feasible(m, g):
        raise RuntimeError("feasible variant produced an infeasible matching; protocol bug")
    return m, stats
