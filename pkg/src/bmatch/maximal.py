"""Randomized distributed maximal b-matching, four rounds per iteration.

One iteration = marking, selection, matching, cleanup:

* **marking** — every node with residual capacity r marks min(⌈r/2⌉, live
  degree) of its live edges: a uniform sample by default, the top-weight
  edges in ``greedy`` mode.
* **selection** — every node picks up to max(⌊r/2⌋, 1) edges *marked by the
  opposite endpoint*, uniformly; a pick makes the edge selected.
* **matching** — a node with r residual slots keeps at most r of its
  selected edges (random drop beyond that); an edge is matched only when
  both endpoints kept it, otherwise it returns to the live pool.
* **cleanup** — a node whose residual hits zero deletes its remaining live
  edges; everyone else clears leftover marks.

Iterations repeat until no live edge remains, which makes the union of the
per-iteration matchings maximal by construction.  The expected iteration
count is polylogarithmic in the node count, but a single iteration can
stall (e.g. a 4-cycle of nodes marking "the wrong way round"), so the
driver carries a generous safety cap instead of assuming progress.
"""

from __future__ import annotations

from typing import Any, Mapping, Sequence

from .engine import Engine, sample_k, unify_edge_views
from .graph import BipartiteGraph, EdgeKey, EdgeState, Matching, NodeId
from .protocol import (
    EdgeView,
    StageMsg,
    collect,
    make_stream,
    residual,
    restated,
    run_stage,
    views_from_graph,
)

E = EdgeState.IN_GRAPH
K = EdgeState.MARKED
F = EdgeState.SELECTED
M = EdgeState.IN_MAXIMAL
D = EdgeState.DELETED

MARKING_STRATEGIES = ("random", "greedy")

DEFAULT_MAX_ITERATIONS = 10_000


def _live(incident: Sequence[EdgeView]) -> list[EdgeView]:
    return [ev for ev in incident if ev.state is E]


def _slots_left(node: NodeId, incident: Sequence[EdgeView]) -> int:
    return residual(node, incident, M)


# ---- marking ----


def _mark_random(node: NodeId, incident: Sequence[EdgeView], rng: Any) -> dict[EdgeKey, bool]:
    live = _live(incident)
    r = _slots_left(node, incident)
    k = min((r + 1) // 2, len(live))
    if k <= 0:
        return {}
    return {key: True for key in sample_k(rng, [ev.key for ev in live], k)}


def _mark_greedy(node: NodeId, incident: Sequence[EdgeView], rng: Any) -> dict[EdgeKey, bool]:
    live = _live(incident)
    r = _slots_left(node, incident)
    k = min((r + 1) // 2, len(live))
    if k <= 0:
        return {}
    ranked = sorted(live, key=lambda ev: (-ev.weight, ev.key))
    return {ev.key: True for ev in ranked[:k]}


def _marking_merge(
    node: NodeId,
    msgs: Sequence[StageMsg],
    mine: Mapping[EdgeKey, Any],
    _summary: Any,
) -> list[EdgeView]:
    out = []
    for m in msgs:
        ev = m.edge
        if ev.state is not E:
            out.append(ev)
            continue
        marks = [False, False]
        marks[m.sender_slot] = bool(m.decision)
        marks[1 - m.sender_slot] = ev.key in mine
        merged = unify_edge_views(
            node,
            [(ev.key, K if marks[0] else E), (ev.key, K if marks[1] else E)],
        )
        state = merged[0][1]
        out.append(restated(ev, state, marks=(marks[0], marks[1])) if state is K else ev)
    return out


# ---- selection ----


def _select(node: NodeId, incident: Sequence[EdgeView], rng: Any) -> dict[EdgeKey, bool]:
    candidates = [
        ev.key
        for ev in incident
        if ev.state is K and ev.marks[1 - ev.slot(node)]
    ]
    if not candidates:
        return {}
    quota = max(_slots_left(node, incident) // 2, 1)
    return {key: True for key in sample_k(rng, candidates, min(quota, len(candidates)))}


def _selection_merge(
    node: NodeId,
    msgs: Sequence[StageMsg],
    mine: Mapping[EdgeKey, Any],
    _summary: Any,
) -> list[EdgeView]:
    out = []
    for m in msgs:
        ev = m.edge
        if ev.state is not K:
            out.append(ev)
            continue
        selected = bool(m.decision) or ev.key in mine
        out.append(restated(ev, F if selected else E, marks=(False, False)))
    return out


# ---- matching ----


def _keep(node: NodeId, incident: Sequence[EdgeView], rng: Any) -> dict[EdgeKey, bool]:
    proposed = [ev.key for ev in incident if ev.state is F]
    if not proposed:
        return {}
    r = max(_slots_left(node, incident), 0)
    if len(proposed) <= r:
        return {key: True for key in proposed}
    return {key: True for key in sample_k(rng, proposed, r)}


def _matching_merge(
    node: NodeId,
    msgs: Sequence[StageMsg],
    mine: Mapping[EdgeKey, Any],
    _summary: Any,
) -> list[EdgeView]:
    out = []
    for m in msgs:
        ev = m.edge
        if ev.state is not F:
            out.append(ev)
            continue
        out.append(restated(ev, M if (bool(m.decision) and ev.key in mine) else E))
    return out


# ---- cleanup ----


def _residual_summary(node: NodeId, incident: Sequence[EdgeView]) -> int:
    return _slots_left(node, incident)


def _cleanup_merge(
    node: NodeId,
    msgs: Sequence[StageMsg],
    _mine: Mapping[EdgeKey, Any],
    my_residual: Any,
) -> list[EdgeView]:
    out = []
    for m in msgs:
        ev = m.edge
        if ev.state is E and (my_residual <= 0 or m.summary <= 0):
            out.append(restated(ev, D))
        else:
            out.append(ev)
    return out


# ---- stage runners (exposed for stage-level tests) ----


def marking_round(engine, stream, *, marking: str = "random", prefix: str = "maximal-"):
    decide = _mark_greedy if marking == "greedy" else _mark_random
    return run_stage(engine, stream, prefix + "marking", _marking_merge, decide=decide)


def selection_round(engine, stream, *, prefix: str = "maximal-"):
    return run_stage(engine, stream, prefix + "selection", _selection_merge, decide=_select)


def matching_round(engine, stream, *, prefix: str = "maximal-"):
    return run_stage(engine, stream, prefix + "matching", _matching_merge, decide=_keep)


def cleanup_round(engine, stream, *, prefix: str = "maximal-"):
    return run_stage(
        engine, stream, prefix + "cleanup", _cleanup_merge, summarize=_residual_summary
    )


def run_maximal_views(
    engine: Engine,
    views: Mapping[EdgeKey, EdgeView],
    *,
    marking: str = "random",
    prefix: str = "maximal-",
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> tuple[dict[EdgeKey, EdgeView], int]:
    """Drive iterations until no live edge remains.

    Returns the surviving views (matched edges; deleted ones are dropped
    rather than carried, so each round ships only current edges) and the
    number of four-round iterations used.  Edges at zero-capacity endpoints
    can never match and are discarded up front, keeping the "residual 0
    implies no live edges" invariant from the first round.
    """
    if marking not in MARKING_STRATEGIES:
        raise ValueError(f"unknown marking strategy {marking!r}; expected one of {MARKING_STRATEGIES}")
    current = {
        key: ev
        for key, ev in views.items()
        if not (ev.state is E and (ev.cap[0] <= 0 or ev.cap[1] <= 0))
    }
    iterations = 0
    while any(ev.state is E for ev in current.values()):
        if iterations >= max_iterations:
            live = sum(1 for ev in current.values() if ev.state is E)
            raise RuntimeError(
                f"maximal matching still has {live} live edges after "
                f"{iterations} iterations; the random stages can stall but a "
                f"streak this long means a bug, not bad luck"
            )
        stream = make_stream(current.values())
        stream = marking_round(engine, stream, marking=marking, prefix=prefix)
        stream = selection_round(engine, stream, prefix=prefix)
        stream = matching_round(engine, stream, prefix=prefix)
        stream = cleanup_round(engine, stream, prefix=prefix)
        current = {k: ev for k, ev in collect(stream).items() if ev.state is not D}
        iterations += 1
    return current, iterations


def maximal_b_matching(
    g: BipartiteGraph,
    caps: Mapping[NodeId, int] | None = None,
    seed: int = 0,
    *,
    engine: Engine | None = None,
    marking: str = "random",
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> Matching:
    """Maximal b-matching of ``g`` under ``caps`` (default: graph capacities)."""
    if caps is not None:
        bad = {v: c for v, c in caps.items() if c < 0}
        if bad:
            raise ValueError(f"negative working capacities: {bad}")
    eng = engine if engine is not None else Engine(seed=seed)
    cap_of = None if caps is None else (lambda v: caps.get(v, g.capacity(v)))
    views = views_from_graph(g, cap_of)
    final, _ = run_maximal_views(
        eng, views, marking=marking, max_iterations=max_iterations
    )
    return Matching.from_edges(g, [k for k, ev in final.items() if ev.state is M])


def is_maximal(
    g: BipartiteGraph, m: Matching, caps: Mapping[NodeId, int] | None = None
) -> bool:
    """Brute-force maximality check: every excluded edge has a full endpoint."""

    def cap(v: NodeId) -> int:
        return caps.get(v, g.capacity(v)) if caps is not None else g.capacity(v)

    for rec in g.edges():
        if rec.key in m.edges:
            continue
        u, v = rec.key
        if m.degree_of(u) < cap(u) and m.degree_of(v) < cap(v):
            return False
    return True
