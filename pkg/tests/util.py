"""Shared instance generators for the test suite.

Weights drawn from ``randrange(1, 65) / 16`` are dyadic rationals, so sums
and halvings stay exact in binary floating point — approximation-ratio
assertions (value >= OPT/2 and friends) can then use plain comparisons
without tolerance fudging.
"""

from __future__ import annotations

import random

from bmatch.graph import BipartiteGraph, NodeId, Side
from bmatch.simjoin import Corpus, Document, TermVector


def item(i: int) -> NodeId:
    return NodeId(Side.ITEM, i)


def consumer(j: int) -> NodeId:
    return NodeId(Side.CONSUMER, j)


def dyadic(r: random.Random) -> float:
    return r.randrange(1, 65) / 16


def rand_bipartite(
    r: random.Random,
    max_nodes: int = 12,
    max_edges: int = 20,
    max_cap: int = 3,
    distinct_weights: bool = False,
) -> BipartiteGraph:
    """Small random bipartite instance with dyadic weights and caps <= max_cap."""
    ni = r.randint(1, max(1, max_nodes // 2))
    nc = r.randint(1, max(1, max_nodes - ni))
    pairs = [(i, j) for i in range(ni) for j in range(nc)]
    r.shuffle(pairs)
    k = r.randint(1, min(max_edges, len(pairs)))
    if distinct_weights:
        weights = [w / 16 for w in r.sample(range(1, 16 * k + 1), k)]
    else:
        weights = [dyadic(r) for _ in range(k)]
    edges = [(item(i), consumer(j), w) for (i, j), w in zip(pairs[:k], weights)]
    caps = {}
    for a, b, _ in edges:
        caps.setdefault(a, r.randint(1, max_cap))
        caps.setdefault(b, r.randint(1, max_cap))
    return BipartiteGraph(edges, caps)


def star(weights: list[float], center_cap: int, leaf_cap: int = 1) -> BipartiteGraph:
    """One consumer of capacity ``center_cap`` joined to len(weights) items."""
    edges = [(item(i), consumer(0), w) for i, w in enumerate(weights)]
    caps = {consumer(0): center_cap}
    caps.update({item(i): leaf_cap for i in range(len(weights))})
    return BipartiteGraph(edges, caps)


def path_graph(weights: list[float], caps: int | dict = 1) -> BipartiteGraph:
    """Path with alternating sides: node i is an item iff i is even."""

    def node(i: int) -> NodeId:
        return NodeId(Side.ITEM if i % 2 == 0 else Side.CONSUMER, i // 2)

    edges = [(node(i), node(i + 1), w) for i, w in enumerate(weights)]
    return BipartiteGraph(edges, caps)


def rand_corpus(
    r: random.Random,
    n_items: int = 8,
    n_consumers: int = 8,
    vocab: int = 12,
    max_count: int = 4,
) -> tuple[list[Document], list[Document]]:
    """Random raw-count documents ready for a similarity join."""

    def vector() -> TermVector:
        size = r.randint(0, min(6, vocab))
        terms = r.sample(range(vocab), size)
        return TermVector({t: r.randint(1, max_count) for t in terms})

    items = [Document(f"a{i}", Side.ITEM, vector()) for i in range(n_items)]
    consumers = [Document(f"v{j}", Side.CONSUMER, vector()) for j in range(n_consumers)]
    return items, consumers


def as_corpus(items: list[Document], consumers: list[Document], vocab: int) -> Corpus:
    dictionary = {f"t{t}": t for t in range(vocab)}
    return Corpus(tuple(items) + tuple(consumers), dictionary)


def gini(values: list[float]) -> float:
    """Gini coefficient; 0 for perfectly equal positive values."""
    xs = sorted(values)
    n = len(xs)
    total = sum(xs)
    if n == 0 or total == 0:
        return 0.0
    cum = 0.0
    for rank, x in enumerate(xs, 1):
        cum += rank * x
    return (2 * cum) / (n * total) - (n + 1) / n
