"""Shared scaffolding for the edge-state rounds the matching algorithms use.

All three algorithm families (maximal matching, stack matching, greedy)
speak the same dialect over the engine:

* between rounds the graph lives as node records — each node paired with
  its incident edge views, every edge appearing under both endpoints with
  identical state;
* a round's mapper makes the node's local decision and ships, per incident
  edge, exactly one message to the *opposite* endpoint (so a round emits
  exactly two pairs per edge in the stream — one in each direction);
* the reducer reconstructs the node's own decision by replaying it — the
  counter-based RNG guarantees the replay lands on the same draws — and
  merges the two resulting views of every edge into the next consistent
  record.

Node-level quantities a neighbour cannot derive locally (residual capacity,
dual value) ride along on the messages as the sender's summary.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Any, Callable, Iterable, Mapping, Sequence

from .engine import Engine, ProtocolViolation, keyed_rng
from .graph import BipartiteGraph, EdgeKey, EdgeState, NodeId

LIVE = EdgeState.IN_GRAPH


@dataclass(frozen=True, slots=True)
class EdgeView:
    """One edge as carried through the rounds.

    ``b`` holds the endpoints' original capacities (dual arithmetic divides
    by these); ``cap`` the capacities of the sub-protocol currently running
    (the stack push phase hands the maximal-matching rounds reduced layer
    capacities).  Tuple positions follow the canonical endpoint order of
    ``key``.
    """

    key: EdgeKey
    weight: float
    b: tuple[int, int]
    cap: tuple[int, int]
    state: EdgeState = LIVE
    layer: int = -1
    delta: float = 0.0
    marks: tuple[bool, bool] = (False, False)

    def slot(self, node: NodeId) -> int:
        if node == self.key[0]:
            return 0
        if node == self.key[1]:
            return 1
        raise ProtocolViolation(f"{node} not an endpoint of {self.key}")

    def other(self, node: NodeId) -> NodeId:
        return self.key[1 - self.slot(node)]


@dataclass(frozen=True, slots=True)
class StageMsg:
    """What one endpoint ships to the other about one edge."""

    edge: EdgeView
    sender_slot: int
    decision: Any
    summary: Any


#: decide(node, incident_views, rng) -> {edge key: decision payload}
Decide = Callable[[NodeId, Sequence[EdgeView], Any], Mapping[EdgeKey, Any]]
#: summarize(node, incident_views) -> shippable node summary
Summarize = Callable[[NodeId, Sequence[EdgeView]], Any]
#: merge(node, msgs, my_decisions, my_summary) -> new incident views
Merge = Callable[[NodeId, Sequence[StageMsg], Mapping[EdgeKey, Any], Any], Sequence[EdgeView]]


def _no_decision(node: NodeId, views: Sequence[EdgeView], rng: Any) -> dict:
    return {}


def _no_summary(node: NodeId, views: Sequence[EdgeView]) -> None:
    return None


def make_stream(views: Iterable[EdgeView]) -> list[tuple[NodeId, tuple[EdgeView, ...]]]:
    """Lay edge views out as node records (each edge under both endpoints)."""
    per_node: dict[NodeId, list[EdgeView]] = {}
    for ev in views:
        per_node.setdefault(ev.key[0], []).append(ev)
        per_node.setdefault(ev.key[1], []).append(ev)
    return [
        (node, tuple(sorted(incident, key=lambda ev: ev.key)))
        for node, incident in sorted(per_node.items())
    ]


def collect(stream: Sequence[tuple[NodeId, tuple[EdgeView, ...]]]) -> dict[EdgeKey, EdgeView]:
    """Fold node records back to one view per edge, checking consistency.

    The dual-view invariant: after any round, the copy stored under the
    first endpoint must equal the copy under the second.  Divergence means a
    stage's merge rule was not symmetric — fail loudly rather than let the
    algorithms drift.
    """
    seen: dict[EdgeKey, EdgeView] = {}
    counts: dict[EdgeKey, int] = {}
    for node, incident in stream:
        for ev in incident:
            counts[ev.key] = counts.get(ev.key, 0) + 1
            if counts[ev.key] > 2:
                raise ProtocolViolation(f"edge {ev.key} appears under more than two nodes")
            prior = seen.get(ev.key)
            if prior is None:
                seen[ev.key] = ev
            elif prior != ev:
                raise ProtocolViolation(f"divergent views of edge {ev.key}: {prior} vs {ev}")
    for key, n in counts.items():
        if n != 2:
            raise ProtocolViolation(f"edge {key} appears under {n} node(s), expected 2")
    return seen


def run_stage(
    engine: Engine,
    stream: Sequence[tuple[NodeId, tuple[EdgeView, ...]]],
    phase_label: str,
    merge: Merge,
    decide: Decide = _no_decision,
    summarize: Summarize = _no_summary,
) -> list[tuple[NodeId, tuple[EdgeView, ...]]]:
    """One protocol round: decide map-side, ship one message per direction,
    replay + merge reduce-side.  Returns the next node-record stream."""
    round_index = engine.next_round_index
    seed = engine.seed
    active = _count_live(stream)

    def mapper(node: NodeId, incident: tuple[EdgeView, ...]):
        decisions = decide(node, incident, keyed_rng(seed, round_index, node))
        summary = summarize(node, incident)
        out = []
        for ev in incident:
            out.append(
                (ev.other(node), StageMsg(ev, ev.slot(node), decisions.get(ev.key), summary))
            )
        return out

    def reducer(node: NodeId, msgs: Sequence[StageMsg]):
        incident = tuple(sorted((m.edge for m in msgs), key=lambda ev: ev.key))
        mine = decide(node, incident, keyed_rng(seed, round_index, node))
        summary = summarize(node, incident)
        ordered = sorted(msgs, key=lambda m: m.edge.key)
        views = merge(node, ordered, mine, summary)
        return [(node, tuple(sorted(views, key=lambda ev: ev.key)))]

    return engine.round(mapper, reducer, stream, phase_label, active_edges=active)


def _count_live(stream: Sequence[tuple[NodeId, tuple[EdgeView, ...]]]) -> int:
    live: set[EdgeKey] = set()
    for _, incident in stream:
        for ev in incident:
            if ev.state is LIVE:
                live.add(ev.key)
    return len(live)


# ---- construction and bookkeeping helpers used by the drivers ----


def views_from_graph(
    g: BipartiteGraph,
    cap_of: Callable[[NodeId], int] | None = None,
) -> dict[EdgeKey, EdgeView]:
    """Fresh live views of every edge; ``cap_of`` overrides sub-run capacity."""
    cap_fn = cap_of or g.capacity
    views: dict[EdgeKey, EdgeView] = {}
    for rec in g.edges():
        key = rec.key
        views[key] = EdgeView(
            key=key,
            weight=rec.weight,
            b=(g.capacity(key[0]), g.capacity(key[1])),
            cap=(cap_fn(key[0]), cap_fn(key[1])),
        )
    return views


def in_state(views: Iterable[EdgeView], state: EdgeState) -> list[EdgeView]:
    return [ev for ev in views if ev.state is state]


def split_by_state(
    views: Mapping[EdgeKey, EdgeView]
) -> dict[EdgeState, dict[EdgeKey, EdgeView]]:
    out: dict[EdgeState, dict[EdgeKey, EdgeView]] = {}
    for key, ev in views.items():
        out.setdefault(ev.state, {})[key] = ev
    return out


def restated(ev: EdgeView, state: EdgeState, **changes: Any) -> EdgeView:
    return replace(ev, state=state, **changes)


def residual(node: NodeId, incident: Sequence[EdgeView], counted: EdgeState) -> int:
    """Sub-run residual capacity at ``node``: cap minus edges in ``counted``."""
    cap = None
    used = 0
    for ev in incident:
        slot = ev.slot(node)
        cap = ev.cap[slot] if cap is None else cap
        if ev.state is counted:
            used += 1
    return (cap or 0) - used


def budget_left(node: NodeId, incident: Sequence[EdgeView]) -> int:
    """Remaining original capacity at ``node``: b minus included edges."""
    b = None
    used = 0
    for ev in incident:
        slot = ev.slot(node)
        b = ev.b[slot] if b is None else b
        if ev.state is EdgeState.IN_SOLUTION:
            used += 1
    return (b or 0) - used
