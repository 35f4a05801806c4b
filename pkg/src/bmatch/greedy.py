"""Half-approximate greedy matching, centralized and in proposal rounds.

Both forms walk edges in one shared total order — weight descending, then
canonical edge key — and that shared order is what makes the distributed
version work at all: each node proposes its top residual-many live edges,
an edge is taken when both endpoints propose it, and with any tie broken
the same way everywhere the globally heaviest live edge is always mutual.
Every intermediate state is a feasible matching (the anytime property);
the per-round value trace this module returns is the basis of the
convergence reports.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping, Sequence

from .engine import Engine
from .graph import (
    BipartiteGraph,
    EdgeKey,
    EdgeState,
    GraphError,
    Matching,
    NodeId,
    Side,
    edge_order_key,
)
from .protocol import (
    EdgeView,
    StageMsg,
    budget_left,
    collect,
    make_stream,
    restated,
    run_stage,
    views_from_graph,
)

E = EdgeState.IN_GRAPH
I = EdgeState.IN_SOLUTION
R = EdgeState.REMOVED

DEFAULT_MAX_ROUNDS = 1_000_000


def greedy_centralized(g: BipartiteGraph) -> Matching:
    """Scan edges heaviest-first, taking each one both endpoints can afford."""
    residual = {v: g.capacity(v) for v in g.nodes}
    chosen = []
    for rec in sorted(g.edges(), key=lambda r: edge_order_key(r.key, r.weight)):
        u, v = rec.key
        if residual[u] > 0 and residual[v] > 0:
            chosen.append(rec.key)
            residual[u] -= 1
            residual[v] -= 1
    return Matching.from_edges(g, chosen)


def greedy_mr_round(
    g: BipartiteGraph, residual: Mapping[NodeId, int]
) -> tuple[list[EdgeKey], dict[NodeId, int]]:
    """One proposal round over the live graph ``g`` under ``residual``.

    Pure reference form of the distributed round: every node puts forward
    its best residual-many incident edges, mutual proposals win.  Returns
    the included keys (sorted) and the decremented residuals.
    """
    proposals: dict[NodeId, set[EdgeKey]] = {}
    for v in g.nodes:
        quota = residual.get(v, 0)
        if quota <= 0:
            proposals[v] = set()
            continue
        ranked = sorted(
            (rec for rec in g.adjacency(v)),
            key=lambda rec: edge_order_key(rec.key, rec.weight),
        )
        proposals[v] = {rec.key for rec in ranked[:quota]}
    included = sorted(
        rec.key
        for rec in g.edges()
        if rec.key in proposals[rec.key[0]] and rec.key in proposals[rec.key[1]]
    )
    updated = dict(residual)
    for key in included:
        for v in key:
            updated[v] = updated.get(v, 0) - 1
    return included, updated


def _propose(node: NodeId, incident: Sequence[EdgeView], rng: Any) -> dict[EdgeKey, bool]:
    quota = budget_left(node, incident)
    if quota <= 0:
        return {}
    live = [ev for ev in incident if ev.state is E]
    ranked = sorted(live, key=lambda ev: edge_order_key(ev.key, ev.weight))
    return {ev.key: True for ev in ranked[:quota]}


def _greedy_merge(
    node: NodeId,
    msgs: Sequence[StageMsg],
    mine: Mapping[EdgeKey, Any],
    _summary: Any,
) -> list[EdgeView]:
    out = []
    for m in msgs:
        ev = m.edge
        if ev.state is E and bool(m.decision) and ev.key in mine:
            out.append(restated(ev, I))
        else:
            out.append(ev)
    return out


def _purge_saturated(views: dict[EdgeKey, EdgeView]) -> dict[EdgeKey, EdgeView]:
    """Retire live edges at saturated nodes (the between-rounds filter).

    A node's saturation becomes common knowledge only after the round that
    filled it, so the removal happens at the round boundary rather than
    inside the merge.
    """
    left: dict[NodeId, int] = {}
    for key, ev in views.items():
        for slot, v in enumerate(key):
            left.setdefault(v, ev.b[slot])
        if ev.state is I:
            left[key[0]] -= 1
            left[key[1]] -= 1
    out = dict(views)
    for key, ev in views.items():
        if ev.state is E and (left[key[0]] <= 0 or left[key[1]] <= 0):
            out[key] = restated(ev, R)
    return out


@dataclass(frozen=True)
class GreedyTracePoint:
    round_index: int
    value: float
    included_edges: int


def greedy_mr(
    g: BipartiteGraph,
    seed: int = 0,
    *,
    engine: Engine | None = None,
    max_rounds: int = DEFAULT_MAX_ROUNDS,
) -> tuple[Matching, list[GreedyTracePoint]]:
    """Run proposal rounds to fixpoint; returns the matching and value trace."""
    eng = engine if engine is not None else Engine(seed=seed)
    views = views_from_graph(g)
    trace: list[GreedyTracePoint] = []
    rnd = 0
    while any(ev.state is E for ev in views.values()):
        if rnd >= max_rounds:
            raise RuntimeError(f"greedy rounds exceeded the cap of {max_rounds}")
        stream = make_stream(views.values())
        stream = run_stage(eng, stream, "greedy-round", _greedy_merge, decide=_propose)
        updated = collect(stream)
        included = sorted(k for k, ev in updated.items() if ev.state is I)
        if len(included) <= (trace[-1].included_edges if trace else 0):
            raise RuntimeError(
                "a greedy round made no progress; the shared tie order should "
                "always make the heaviest live edge mutual"
            )
        purged = _purge_saturated(updated)
        # retired edges never come back; stop shipping them
        views = {k: ev for k, ev in purged.items() if ev.state is not R}
        value = sum(views[k].weight for k in included)
        trace.append(GreedyTracePoint(rnd, value, len(included)))
        rnd += 1
    m = Matching.from_edges(g, [k for k, ev in views.items() if ev.state is I])
    return m, trace


def worst_case_path(k: int, w0: float = 1.0, growth: float = 2.0) -> BipartiteGraph:
    """Path of ``k`` edges with geometrically increasing weights, all b ≡ 1.

    The instance that forces cascading proposal rounds: every inner node
    prefers its heavier edge, so inclusions trickle down from the heavy end
    two edges per round.
    """
    if k < 2:
        raise GraphError(f"path needs at least 2 edges, got {k}")
    if w0 <= 0 or growth <= 1:
        raise GraphError("weights must start positive and strictly increase")

    def node(i: int) -> NodeId:
        return NodeId(Side.ITEM if i % 2 == 0 else Side.CONSUMER, i // 2)

    edges = [(node(i), node(i + 1), w0 * growth**i) for i in range(k)]
    return BipartiteGraph(edges, capacities=1)
