"""Exact reference solver for tiny instances.

Branch-and-bound over the edge list: edges are considered in weight-descending
order, and a branch is abandoned once even taking *all* remaining edges could
not beat the incumbent.  Exponential in the worst case, which is why the
instance size is gated — this exists to check the fast algorithms on small
inputs, not to compete with them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .graph import BipartiteGraph, Matching


class InstanceTooLarge(ValueError):
    """The instance exceeds what the exhaustive solver will attempt."""


@dataclass(frozen=True)
class OracleLimits:
    """Guard rails for :func:`exact_b_matching`.

    ``max_edges`` bounds the search tree depth (2^22 leaves before pruning);
    ``max_value_gap`` is the slack used when pruning against the incumbent,
    so branches that could at best tie within float noise are cut.
    """

    max_edges: int = 22
    max_value_gap: float = 1e-9


def exact_b_matching(
    g: BipartiteGraph, limits: OracleLimits = OracleLimits()
) -> tuple[Matching, float]:
    """Maximum-weight degree-constrained subgraph by exhaustive search.

    Returns the best matching and its value.  Ties are broken toward the
    first optimum found by the take-the-heavier-edge-first search order,
    which is deterministic for a given graph.  Raises
    :class:`InstanceTooLarge` beyond ``limits.max_edges`` edges.
    """
    records = sorted(g.edges(), key=lambda r: (-r.weight, r.key))
    if len(records) > limits.max_edges:
        raise InstanceTooLarge(
            f"{len(records)} edges exceeds the exhaustive-search cap of {limits.max_edges}"
        )

    # suffix[i] = total weight of records[i:], the optimistic bound.
    suffix = [0.0] * (len(records) + 1)
    for i in range(len(records) - 1, -1, -1):
        suffix[i] = suffix[i + 1] + records[i].weight

    residual = {v: g.capacity(v) for v in g.nodes}
    chosen: list = []
    best_keys: tuple = ()
    best_value = -math.inf

    def walk(i: int, value: float) -> None:
        nonlocal best_keys, best_value
        if value > best_value:
            best_keys = tuple(chosen)
            best_value = value
        if i == len(records) or value + suffix[i] <= best_value + limits.max_value_gap:
            return
        rec = records[i]
        if residual[rec.item] > 0 and residual[rec.consumer] > 0:
            residual[rec.item] -= 1
            residual[rec.consumer] -= 1
            chosen.append(rec.key)
            walk(i + 1, value + rec.weight)
            chosen.pop()
            residual[rec.item] += 1
            residual[rec.consumer] += 1
        walk(i + 1, value)

    walk(0, 0.0)
    return Matching.from_edges(g, best_keys), best_value
