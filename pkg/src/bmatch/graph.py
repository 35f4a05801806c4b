"""Bipartite graph model: nodes, weighted edges, capacities, matchings.

Item and consumer nodes share one id space through a side tag.  Edges are
undirected, carry a positive weight, and are identified by their canonically
ordered endpoint pair, which makes edge identity stable across every view of
the graph that the round-based algorithms construct.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum, IntEnum
from pathlib import Path
from typing import Iterable, Iterator, Mapping, NamedTuple


class GraphError(ValueError):
    """Raised for malformed graphs, edges, or matching lookups."""


#: Relative tolerance for every threshold comparison on edge weights,
#: similarities, and dual values.
REL_TOL = 1e-9


def approx_ge(a: float, b: float, rel: float = REL_TOL) -> bool:
    """``a >= b`` up to relative tolerance (ties count as reaching b)."""
    return a >= b - rel * max(abs(a), abs(b), 1.0)


def approx_le(a: float, b: float, rel: float = REL_TOL) -> bool:
    return b >= a - rel * max(abs(a), abs(b), 1.0)


class Side(IntEnum):
    """Which half of the bipartition a node belongs to."""

    ITEM = 0
    CONSUMER = 1


class NodeId(NamedTuple):
    side: Side
    index: int

    def __repr__(self) -> str:  # keep diagnostics short: item:3 / consumer:7
        return f"{self.side.name.lower()}:{self.index}"


class EdgeState(Enum):
    """Lifecycle states an edge moves through inside the round protocols.

    The first five belong to the maximal-matching protocol, the last three to
    the stack protocol; ``IN_GRAPH`` is shared as the live state.
    """

    IN_GRAPH = "E"
    MARKED = "K"
    SELECTED = "F"
    DELETED = "D"
    IN_MAXIMAL = "M"
    STACKED = "S"
    REMOVED = "R"
    IN_SOLUTION = "I"


#: States that may carry a stack layer annotation.
_LAYERED_STATES = frozenset({EdgeState.STACKED, EdgeState.IN_SOLUTION})

#: Edge identity: endpoint pair in canonical order (see :func:`edge_key`).
EdgeKey = tuple[NodeId, NodeId]


def edge_key(a: NodeId, b: NodeId) -> EdgeKey:
    """Canonical identity of the undirected edge ``{a, b}``.

    Endpoints are ordered by (side, index), so for a bipartite edge the item
    endpoint always comes first.
    """
    if a == b:
        raise GraphError(f"self-loop at {a}")
    return (a, b) if a < b else (b, a)


def edge_order_key(key: EdgeKey, weight: float) -> tuple:
    """Sort token realising the global edge total order.

    Weight descending, then item index ascending, then consumer index
    ascending — every node ranks edges the same way, which is what lets the
    distributed greedy rounds agree on proposal sets without communication.
    """
    return (-weight, key[0], key[1])


@dataclass(frozen=True)
class EdgeRecord:
    """One weighted edge with its protocol state.

    ``item``/``consumer`` hold the canonically ordered endpoints; for a
    bipartite edge these are the item-side and consumer-side nodes.  Test
    graphs that are deliberately non-bipartite simply use the two slots as
    "first" and "second" endpoint.
    """

    item: NodeId
    consumer: NodeId
    weight: float
    state: EdgeState = EdgeState.IN_GRAPH
    layer: int | None = None

    def __post_init__(self) -> None:
        if not (self.weight > 0.0):
            raise GraphError(f"edge weight must be positive, got {self.weight!r}")
        if (self.item, self.consumer) != edge_key(self.item, self.consumer):
            raise GraphError(f"endpoints not in canonical order: {self.item}, {self.consumer}")
        if self.layer is not None and self.state not in _LAYERED_STATES:
            raise GraphError(f"layer set on edge in state {self.state}")

    @property
    def key(self) -> EdgeKey:
        return (self.item, self.consumer)

    def other(self, node: NodeId) -> NodeId:
        if node == self.item:
            return self.consumer
        if node == self.consumer:
            return self.item
        raise GraphError(f"{node} is not an endpoint of {self.key}")


class BipartiteGraph:
    """Immutable node/edge structure with per-node degree capacities.

    Capacities are clamped to >= 1 at construction: a node that may take
    nothing contributes nothing to the problem, and downstream capacity
    arithmetic (layer sizing, residuals) relies on positivity.

    ``require_bipartite=False`` admits edges inside one side; the public
    loaders never use it, but small non-bipartite fixtures are useful for
    exercising the algorithms, which nowhere assume two-sidedness.
    """

    def __init__(
        self,
        edges: Iterable[tuple[NodeId, NodeId, float]],
        capacities: Mapping[NodeId, int] | int = 1,
        nodes: Iterable[NodeId] = (),
        require_bipartite: bool = True,
    ) -> None:
        self._edges: dict[EdgeKey, EdgeRecord] = {}
        self._adjacency: dict[NodeId, list[EdgeKey]] = {}
        node_set: set[NodeId] = set(nodes)
        for a, b, w in edges:
            if require_bipartite and a.side == b.side:
                raise GraphError(f"edge {a}-{b} joins two {a.side.name.lower()} nodes")
            key = edge_key(a, b)
            if key in self._edges:
                raise GraphError(f"parallel edge {key[0]}-{key[1]}")
            rec = EdgeRecord(key[0], key[1], float(w))
            self._edges[key] = rec
            node_set.add(a)
            node_set.add(b)
            self._adjacency.setdefault(a, []).append(key)
            self._adjacency.setdefault(b, []).append(key)
        self._nodes = frozenset(node_set)
        if isinstance(capacities, int):
            self._capacity = {v: max(1, capacities) for v in self._nodes}
        else:
            self._capacity = {v: max(1, int(capacities.get(v, 1))) for v in self._nodes}
        for adj in self._adjacency.values():
            adj.sort()

    # ---- read access ----

    @property
    def nodes(self) -> frozenset[NodeId]:
        return self._nodes

    def node_list(self) -> list[NodeId]:
        return sorted(self._nodes)

    def side_nodes(self, side: Side) -> list[NodeId]:
        return sorted(v for v in self._nodes if v.side == side)

    def capacity(self, v: NodeId) -> int:
        try:
            return self._capacity[v]
        except KeyError:
            raise GraphError(f"unknown node {v}") from None

    @property
    def num_edges(self) -> int:
        return len(self._edges)

    def edges(self) -> Iterator[EdgeRecord]:
        for key in sorted(self._edges):
            yield self._edges[key]

    def edge(self, key: EdgeKey) -> EdgeRecord:
        try:
            return self._edges[key]
        except KeyError:
            raise GraphError(f"no edge {key[0]}-{key[1]}") from None

    def has_edge(self, key: EdgeKey) -> bool:
        return key in self._edges

    def adjacency(self, v: NodeId) -> list[EdgeRecord]:
        return [self._edges[k] for k in self._adjacency.get(v, [])]

    def degree(self, v: NodeId) -> int:
        return len(self._adjacency.get(v, []))

    def weight(self, key: EdgeKey) -> float:
        return self.edge(key).weight


@dataclass(frozen=True)
class Matching:
    """A subset of the graph's edges plus the degree it induces."""

    edges: frozenset[EdgeKey]
    degree: Mapping[NodeId, int] = field(default_factory=dict)

    @classmethod
    def from_edges(cls, g: BipartiteGraph, keys: Iterable[EdgeKey]) -> "Matching":
        chosen = frozenset(keys)
        degree: dict[NodeId, int] = {}
        for key in chosen:
            if not g.has_edge(key):
                raise GraphError(f"matching references missing edge {key[0]}-{key[1]}")
            for v in key:
                degree[v] = degree.get(v, 0) + 1
        return cls(edges=chosen, degree=degree)

    def degree_of(self, v: NodeId) -> int:
        return self.degree.get(v, 0)

    def __len__(self) -> int:
        return len(self.edges)


def matching_value(m: Matching, g: BipartiteGraph) -> float:
    """Total weight of the matched edges (summed in canonical key order)."""
    return sum(g.weight(key) for key in sorted(m.edges))


def is_feasible(m: Matching, g: BipartiteGraph) -> bool:
    """True iff every node's matched degree is within its capacity."""
    return all(m.degree_of(v) <= g.capacity(v) for v in g.nodes)


def violation_metric(m: Matching, g: BipartiteGraph) -> float:
    """Mean relative capacity excess over all nodes of ``g``.

    Zero exactly when the matching is feasible; each node contributes
    max(degree - b(v), 0) / b(v).
    """
    if not g.nodes:
        return 0.0
    total = 0.0
    for v in g.nodes:
        over = m.degree_of(v) - g.capacity(v)
        if over > 0:
            total += over / g.capacity(v)
    return total / len(g.nodes)


# ---- tab-separated external formats ----


@dataclass
class EdgeListData:
    """Parsed edge-list file with the id->index mapping used to build it."""

    item_ids: list[str]
    consumer_ids: list[str]
    edges: list[tuple[int, int, float]]

    def node_of_item(self, idx: int) -> NodeId:
        return NodeId(Side.ITEM, idx)

    def node_of_consumer(self, idx: int) -> NodeId:
        return NodeId(Side.CONSUMER, idx)


def load_edge_list(path: str | Path) -> EdgeListData:
    """Read ``item_id<TAB>consumer_id<TAB>weight`` lines.

    Ids are interned in first-appearance order per side.  Blank lines and
    ``#`` comments are skipped; malformed rows and duplicate pairs raise
    :class:`GraphError` with the offending line number.
    """
    item_index: dict[str, int] = {}
    consumer_index: dict[str, int] = {}
    edges: list[tuple[int, int, float]] = []
    seen: set[tuple[int, int]] = set()
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise GraphError(f"{path}:{lineno}: expected 3 tab-separated fields, got {len(parts)}")
        item_id, consumer_id, weight_text = parts
        try:
            weight = float(weight_text)
        except ValueError:
            raise GraphError(f"{path}:{lineno}: bad weight {weight_text!r}") from None
        if not weight > 0.0:
            raise GraphError(f"{path}:{lineno}: weight must be positive, got {weight!r}")
        i = item_index.setdefault(item_id, len(item_index))
        c = consumer_index.setdefault(consumer_id, len(consumer_index))
        if (i, c) in seen:
            raise GraphError(f"{path}:{lineno}: duplicate edge {item_id!r}-{consumer_id!r}")
        seen.add((i, c))
        edges.append((i, c, weight))
    return EdgeListData(
        item_ids=list(item_index),
        consumer_ids=list(consumer_index),
        edges=edges,
    )


def load_capacities(path: str | Path, data: EdgeListData) -> dict[NodeId, int]:
    """Read ``node_id<TAB>side<TAB>capacity`` lines against an edge list."""
    item_pos = {name: i for i, name in enumerate(data.item_ids)}
    consumer_pos = {name: i for i, name in enumerate(data.consumer_ids)}
    caps: dict[NodeId, int] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise GraphError(f"{path}:{lineno}: expected 3 tab-separated fields, got {len(parts)}")
        node_id, side_text, cap_text = parts
        side_name = side_text.strip().lower()
        if side_name == "item":
            pos, side = item_pos, Side.ITEM
        elif side_name == "consumer":
            pos, side = consumer_pos, Side.CONSUMER
        else:
            raise GraphError(f"{path}:{lineno}: side must be 'item' or 'consumer', got {side_text!r}")
        if node_id not in pos:
            raise GraphError(f"{path}:{lineno}: unknown {side_name} id {node_id!r}")
        try:
            cap = int(cap_text)
        except ValueError:
            raise GraphError(f"{path}:{lineno}: bad capacity {cap_text!r}") from None
        node = NodeId(side, pos[node_id])
        if node in caps:
            raise GraphError(f"{path}:{lineno}: duplicate capacity for {node_id!r}")
        caps[node] = cap
    return caps


def build_graph(data: EdgeListData, capacities: Mapping[NodeId, int] | int = 1) -> BipartiteGraph:
    """Materialise a :class:`BipartiteGraph` from parsed edge-list data."""
    edges = [
        (NodeId(Side.ITEM, i), NodeId(Side.CONSUMER, c), w)
        for i, c, w in data.edges
    ]
    nodes = [NodeId(Side.ITEM, i) for i in range(len(data.item_ids))]
    nodes += [NodeId(Side.CONSUMER, c) for c in range(len(data.consumer_ids))]
    return BipartiteGraph(edges, capacities, nodes=nodes)


def write_matching(
    path: str | Path,
    m: Matching,
    g: BipartiteGraph,
    item_ids: list[str] | None = None,
    consumer_ids: list[str] | None = None,
    header: str | None = None,
) -> None:
    """Write a matching in the edge-list format, sorted by edge identity."""
    def label(v: NodeId) -> str:
        if v.side is Side.ITEM and item_ids is not None:
            return item_ids[v.index]
        if v.side is Side.CONSUMER and consumer_ids is not None:
            return consumer_ids[v.index]
        return repr(v)

    lines: list[str] = []
    if header:
        lines.append(f"# {header}")
    for key in sorted(m.edges):
        a, b = key
        lines.append(f"{label(a)}\t{label(b)}\t{g.weight(key)!r}")
    Path(path).write_text("\n".join(lines) + "\n")
