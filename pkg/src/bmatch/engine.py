"""Deterministic single-process MapReduce simulator.

The graph algorithms in this package are written as sequences of map/reduce
rounds, the way they would run on a real cluster.  The simulator keeps that
structure honest — all communication goes through emitted key/value pairs,
every round is metered — while guaranteeing bit-for-bit reproducibility:

* reduce groups are processed in ascending key order;
* values inside a group are ordered by a canonical encoding of the value,
  never by arrival order, so the partition count cannot influence results;
* randomness never comes from shared state — node-local decisions draw from
  a counter-based generator keyed by (seed, round index, node id), which
  makes a decision replayable anywhere the same inputs are visible.
"""

from __future__ import annotations

import dataclasses
import enum
import hashlib
import random
import struct
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

from .graph import EdgeKey, EdgeState, NodeId

Pair = tuple[Any, Any]
Mapper = Callable[[Any, Any], Iterable[Pair]]
Reducer = Callable[[Any, Sequence[Any]], Iterable[Pair]]


class MapReduceError(RuntimeError):
    """A mapper or reducer raised; carries the offending stage and key."""

    def __init__(self, phase: str, stage: str, key: Any, cause: BaseException) -> None:
        super().__init__(f"{phase}: {stage} failed on key {key!r}: {cause}")
        self.phase = phase
        self.stage = stage
        self.key = key
        self.cause = cause


class ProtocolViolation(RuntimeError):
    """An edge-state exchange broke the two-views-per-edge protocol."""


@dataclass
class RoundLedger:
    """Per-round accounting: identity, label, and communication volume."""

    round_index: int
    phase_label: str
    emitted_pairs: int = 0
    active_edges: int = 0


def canonical_encode(value: Any) -> str:
    """Deterministic string form of a message value, used as its sort key.

    Only determinism matters, not a meaningful order: two equal values must
    encode equally on every run and platform.  Covers the payload types the
    rounds actually emit (scalars, strings, enums, tuples/lists, sets,
    mappings, dataclasses); anything else is rejected rather than silently
    encoded by object identity.
    """
    if value is None:
        return "n"
    if isinstance(value, bool):
        return f"b{int(value)}"
    if isinstance(value, int):
        return f"i{value}"
    if isinstance(value, float):
        return f"f{value!r}"
    if isinstance(value, str):
        return f"s{len(value)}:{value}"
    if isinstance(value, enum.Enum):
        return f"e{type(value).__name__}.{value.name}"
    if isinstance(value, (tuple, list)):
        inner = ",".join(canonical_encode(v) for v in value)
        return f"t({inner})"
    if isinstance(value, (set, frozenset)):
        inner = ",".join(sorted(canonical_encode(v) for v in value))
        return f"x({inner})"
    if isinstance(value, dict):
        inner = ",".join(
            f"{k}={v}"
            for k, v in sorted((canonical_encode(k), canonical_encode(v)) for k, v in value.items())
        )
        return f"m({inner})"
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        inner = ",".join(
            canonical_encode(getattr(value, f.name)) for f in dataclasses.fields(value)
        )
        return f"d{type(value).__name__}({inner})"
    raise TypeError(f"cannot canonically encode {type(value).__name__}")


def keyed_rng(seed: int, round_index: int, node: Any) -> random.Random:
    """Independent RNG stream for one node in one round.

    Counter-based: the stream is a pure function of its key, so a decision
    made map-side can be replayed reduce-side (or on any worker) and land on
    identical draws.
    """
    token = f"{seed}|{round_index}|{canonical_encode(node)}".encode()
    digest = hashlib.blake2b(token, digest_size=8).digest()
    return random.Random(struct.unpack(">Q", digest)[0])


def sample_k(rng: random.Random, items: Sequence[Any], k: int) -> list[Any]:
    """Uniform sample of ``k`` items without replacement (partial shuffle).

    Implemented directly on ``rng.randrange`` so draws do not depend on the
    standard library's sampling internals staying put between versions.
    """
    pool = list(items)
    n = len(pool)
    k = min(max(k, 0), n)
    for i in range(k):
        j = rng.randrange(i, n)
        pool[i], pool[j] = pool[j], pool[i]
    return pool[:k]


def run_round(
    mapper: Mapper,
    reducer: Reducer,
    pairs: Sequence[Pair],
    ledger: RoundLedger,
    partitions: int = 1,
) -> list[Pair]:
    """Execute one map/shuffle/reduce round.

    Mappers and reducers must be pure: no hidden state, randomness only via
    seeds carried in the values (or derived from them).  The shuffle groups
    by key in ascending key order and presents each group's values sorted by
    :func:`canonical_encode`; ``ledger.emitted_pairs`` counts mapper output.
    The partition count only slices the map input and can never change the
    result — a property the test suite pins down.
    """
    if partitions < 1:
        raise ValueError("partitions must be >= 1")
    emitted: list[Pair] = []
    for p in range(partitions):
        for key, value in pairs[p::partitions]:
            try:
                out = list(mapper(key, value))
            except Exception as exc:  # surface the offending key
                raise MapReduceError(ledger.phase_label, "map", key, exc) from exc
            emitted.extend(out)
    ledger.emitted_pairs += len(emitted)

    groups: dict[Any, list[Any]] = {}
    for key, value in emitted:
        groups.setdefault(key, []).append(value)

    output: list[Pair] = []
    for key in sorted(groups):
        values = sorted(groups[key], key=canonical_encode)
        try:
            output.extend(reducer(key, values))
        except Exception as exc:
            raise MapReduceError(ledger.phase_label, "reduce", key, exc) from exc
    return output


@dataclass
class Engine:
    """Round sequencer: owns the seed, the partition count, and the ledgers."""

    seed: int = 0
    partitions: int = 1
    ledgers: list[RoundLedger] = field(default_factory=list)

    @property
    def next_round_index(self) -> int:
        return len(self.ledgers)

    def round(
        self,
        mapper: Mapper,
        reducer: Reducer,
        pairs: Sequence[Pair],
        phase_label: str,
        active_edges: int = 0,
    ) -> list[Pair]:
        ledger = RoundLedger(
            round_index=self.next_round_index,
            phase_label=phase_label,
            active_edges=active_edges,
        )
        self.ledgers.append(ledger)
        return run_round(mapper, reducer, pairs, ledger, self.partitions)

    def rounds_total(self) -> int:
        return len(self.ledgers)

    def rounds_by_phase(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for ledger in self.ledgers:
            counts[ledger.phase_label] = counts.get(ledger.phase_label, 0) + 1
        return counts


# ---- edge-view unification ----

_MAXIMAL_RANK = {
    EdgeState.IN_GRAPH: 0,
    EdgeState.MARKED: 1,
    EdgeState.SELECTED: 2,
    EdgeState.IN_MAXIMAL: 3,
    EdgeState.DELETED: 4,
}
_STACK_RANK = {
    EdgeState.IN_GRAPH: 0,
    EdgeState.STACKED: 1,
    EdgeState.IN_SOLUTION: 2,
    EdgeState.REMOVED: 3,
}


def unify_edge_views(
    node: NodeId,
    views: Iterable[tuple[EdgeKey, EdgeState]],
) -> list[tuple[EdgeKey, EdgeState]]:
    """Merge the per-endpoint views of each incident edge into one state.

    Each edge may contribute at most two views (its two endpoints).  A state
    set by a deciding endpoint beats the undecided ``IN_GRAPH``; when both
    endpoints decided, the fixed precedence D > M > F > K > E (maximal
    protocol family) resp. R > I > S > E (stack family) wins.  Mixing the
    two families on one edge, or seeing three or more views, is a protocol
    violation and aborts the round.
    """
    merged: dict[EdgeKey, EdgeState] = {}
    counts: dict[EdgeKey, int] = {}
    for key, state in views:
        counts[key] = counts.get(key, 0) + 1
        if counts[key] > 2:
            raise ProtocolViolation(f"at {node}: {counts[key]} views of edge {key[0]}-{key[1]}")
        if key not in merged:
            merged[key] = state
            continue
        merged[key] = _merge_two(node, key, merged[key], state)
    return sorted(merged.items())


def _merge_two(node: NodeId, key: EdgeKey, a: EdgeState, b: EdgeState) -> EdgeState:
    # Both views must come from one protocol family; IN_GRAPH belongs to both.
    if a in _MAXIMAL_RANK and b in _MAXIMAL_RANK:
        rank = _MAXIMAL_RANK
    elif a in _STACK_RANK and b in _STACK_RANK:
        rank = _STACK_RANK
    else:
        raise ProtocolViolation(
            f"at {node}: edge {key[0]}-{key[1]} mixes protocol families ({a.name}, {b.name})"
        )
    return a if rank[a] >= rank[b] else b
