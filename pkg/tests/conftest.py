import pytest

from bmatch.graph import BipartiteGraph, NodeId, Side


@pytest.fixture
def triangle() -> tuple[BipartiteGraph, NodeId, NodeId, NodeId]:
    """The 3-cycle where greedy lands exactly at half the optimum (+0.1).

    u and z are items with unit capacity, v a consumer with capacity 2;
    the u-z edge is slightly heavier than the two v edges, so heaviest-first
    takes u-z (1.1) and blocks the optimal pair {uv, vz} (2.0).  The u-z
    edge makes the graph non-bipartite, hence require_bipartite=False.
    """
    u = NodeId(Side.ITEM, 0)
    z = NodeId(Side.ITEM, 1)
    v = NodeId(Side.CONSUMER, 0)
    g = BipartiteGraph(
        [(u, v, 1.0), (v, z, 1.0), (z, u, 1.1)],
        {u: 1, z: 1, v: 2},
        require_bipartite=False,
    )
    return g, u, v, z
