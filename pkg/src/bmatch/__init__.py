"""Weighted b-matching of items to consumers on a deterministic MapReduce simulator."""

from .graph import (
    BipartiteGraph,
    EdgeRecord,
    EdgeState,
    GraphError,
    Matching,
    NodeId,
    Side,
    edge_key,
    is_feasible,
    matching_value,
    violation_metric,
)
from .engine import Engine, ProtocolViolation, keyed_rng
from .greedy import greedy_centralized, greedy_mr, worst_case_path
from .maximal import is_maximal, maximal_b_matching
from .oracle import InstanceTooLarge, OracleLimits, exact_b_matching
from .simjoin import (
    Corpus,
    Document,
    SimJoinError,
    TermVector,
    candidate_edges,
    naive_join,
    tfidf_weight,
)
from .stack import StackParams, StackStats, stack_greedy_mr, stack_mr, stack_mr_feasible
from .capacity import SynthSpec, parse_synth_spec, synth_dataset
from .text import ingest_text_corpus, porter_stem

__all__ = [
    "BipartiteGraph",
    "Corpus",
    "Document",
    "EdgeRecord",
    "EdgeState",
    "Engine",
    "GraphError",
    "InstanceTooLarge",
    "Matching",
    "NodeId",
    "OracleLimits",
    "ProtocolViolation",
    "Side",
    "SimJoinError",
    "StackParams",
    "StackStats",
    "SynthSpec",
    "TermVector",
    "candidate_edges",
    "edge_key",
    "exact_b_matching",
    "greedy_centralized",
    "greedy_mr",
    "ingest_text_corpus",
    "is_feasible",
    "is_maximal",
    "keyed_rng",
    "matching_value",
    "maximal_b_matching",
    "naive_join",
    "parse_synth_spec",
    "porter_stem",
    "stack_greedy_mr",
    "stack_mr",
    "stack_mr_feasible",
    "synth_dataset",
    "tfidf_weight",
    "violation_metric",
    "worst_case_path",
]
