"""Node capacities from activity/quality signals, and synthetic datasets.

Consumers earn capacity proportional to how active they are (α·n(u));
items receive the matching budget back under one of four models: spread
uniformly, in proportion to a quality score, in proportion to favourite
counts, or as a flat per-question allowance.  All results are rounded
half-up and clamped to at least 1 — a node with capacity 0 would simply
not be part of the problem.

Budget bookkeeping differs per model on purpose.  The uniform and quality
models split the integer budget B = Σ_u b(u) (capacities already rounded),
and their item totals stay within ±|T| of B.  The favourites and question
models follow the raw formulas, dividing the *real* budget Σ_u α·n(u)
before any rounding, so their totals can drift further once clamping kicks
in; callers who care should compare the two sums themselves.
"""

from __future__ import annotations

import math
import random
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Hashable, Mapping, Sequence

from .graph import BipartiteGraph, NodeId, Side
from .simjoin import Corpus, Document, TermVector, candidate_edges, tfidf_weight


def round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


@dataclass(frozen=True)
class ActivityProfile:
    """Raw per-node signals: consumer activity, item favourites or quality."""

    alpha: float
    activity: Mapping[Hashable, float]
    favorites: Mapping[Hashable, float] | None = None
    quality: Mapping[Hashable, float] | None = None

    def __post_init__(self) -> None:
        if not (self.alpha > 0):
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        bad = {u: n for u, n in self.activity.items() if n < 0}
        if bad:
            raise ValueError(f"negative activity counts: {bad}")

    def real_budget(self) -> float:
        """Σ_u α·n(u) before any rounding."""
        return self.alpha * sum(self.activity.values())


def consumer_capacity(profile: ActivityProfile, u: Hashable) -> int:
    return max(1, round_half_up(profile.alpha * profile.activity[u]))


def consumer_budget(profile: ActivityProfile) -> int:
    """B: the integer capacity mass handed out across all consumers."""
    return sum(consumer_capacity(profile, u) for u in profile.activity)


def item_capacity_uniform(profile: ActivityProfile, total_b: float, num_items: int) -> int:
    del profile  # uniform split needs no per-item signal
    if num_items <= 0:
        raise ValueError(f"need at least one item, got {num_items}")
    return max(1, round_half_up(total_b / num_items))


def item_capacity_quality(profile: ActivityProfile, t: Hashable, total_b: float) -> int:
    if profile.quality is None:
        raise ValueError("quality capacities requested but the profile has no quality scores")
    s = sum(profile.quality.values())
    if abs(s - 1.0) > 1e-9:
        raise ValueError(f"quality scores must be normalized to sum 1, got {s!r}")
    return max(1, round_half_up(profile.quality[t] * total_b))


def favorites_capacity(profile: ActivityProfile, p: Hashable) -> int:
    if profile.favorites is None:
        raise ValueError("favorites capacities requested but the profile has no favourite counts")
    total_f = sum(profile.favorites.values())
    if total_f <= 0:
        raise ValueError("favourite counts are all zero")
    return max(1, round_half_up(profile.favorites[p] * profile.real_budget() / total_f))


def question_capacity(profile: ActivityProfile, num_questions: int) -> int:
    if num_questions <= 0:
        raise ValueError(f"need at least one question, got {num_questions}")
    return max(1, round_half_up(profile.real_budget() / num_questions))


# ---- synthetic datasets ----

CAPACITY_MODELS = ("uniform", "quality", "favorites", "question")

_ZIPF_SHAPE = 1.2
_ACTIVITY_SCALE = 10.0


@dataclass(frozen=True)
class SynthSpec:
    items: int
    consumers: int
    vocab: int
    tags_per_doc: int
    sigma: float
    alpha: float = 1.0
    activity_exponent: float = 1.0
    capacity_model: str = "uniform"

    def __post_init__(self) -> None:
        for name in ("items", "consumers", "vocab", "tags_per_doc"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1, got {getattr(self, name)}")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.activity_exponent < 0:
            raise ValueError("activity_exponent must be non-negative")
        if self.capacity_model not in CAPACITY_MODELS:
            raise ValueError(
                f"capacity_model must be one of {CAPACITY_MODELS}, got {self.capacity_model!r}"
            )


_SPEC_FIELDS: dict[str, Any] = {
    "items": int,
    "consumers": int,
    "vocab": int,
    "tags_per_doc": int,
    "sigma": float,
    "alpha": float,
    "activity_exponent": float,
    "capacity_model": str,
}


def parse_synth_spec(path: str | Path) -> SynthSpec:
    """Read a key=value generator spec file."""
    values: dict[str, Any] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not sep or not key or not value:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        if key not in _SPEC_FIELDS:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ValueError(f"{path}:{lineno}: duplicate key {key!r}")
        try:
            values[key] = _SPEC_FIELDS[key](value)
        except ValueError:
            raise ValueError(f"{path}:{lineno}: bad value for {key}: {value!r}") from None
    missing = [k for k in ("items", "consumers", "vocab", "tags_per_doc", "sigma") if k not in values]
    if missing:
        raise ValueError(f"{path}: missing required keys: {', '.join(missing)}")
    return SynthSpec(**values)


def _activity_count(rank: int, exponent: float) -> int:
    return max(1, round_half_up(_ACTIVITY_SCALE * (rank + 1) ** (-exponent)))


def synth_dataset(spec: SynthSpec, seed: int) -> tuple[BipartiteGraph, Corpus]:
    """Tagged documents on both sides, joined at σ, with model capacities.

    Fully determined by (spec, seed): tags are drawn from a fixed-shape
    Zipf over the vocabulary, activity/quality/favourite signals decay
    polynomially in the node index (steeper with ``activity_exponent``).
    """
    rng = random.Random(f"synth|{seed}")
    vocab = range(spec.vocab)
    zipf = [1.0 / (r + 1) ** _ZIPF_SHAPE for r in vocab]
    dictionary = {f"tag{r}": r for r in vocab}

    def draw_document(doc_id: str, side: Side) -> Document:
        counts = Counter(rng.choices(vocab, weights=zipf, k=spec.tags_per_doc))
        return Document(doc_id, side, TermVector(counts))

    docs = [draw_document(f"t{i}", Side.ITEM) for i in range(spec.items)]
    docs += [draw_document(f"c{j}", Side.CONSUMER) for j in range(spec.consumers)]
    weighted = tfidf_weight(Corpus(tuple(docs), dictionary))

    item_docs = weighted.side_documents(Side.ITEM)
    consumer_docs = weighted.side_documents(Side.CONSUMER)
    edges = candidate_edges(item_docs, consumer_docs, spec.sigma)

    item_nodes = [NodeId(Side.ITEM, i) for i in range(spec.items)]
    consumer_nodes = [NodeId(Side.CONSUMER, j) for j in range(spec.consumers)]
    profile = ActivityProfile(
        alpha=spec.alpha,
        activity={u: _activity_count(j, spec.activity_exponent) for j, u in enumerate(consumer_nodes)},
        favorites={t: (i + 1) ** (-spec.activity_exponent) for i, t in enumerate(item_nodes)},
        quality=_normalized_quality(item_nodes),
    )
    caps: dict[NodeId, int] = {u: consumer_capacity(profile, u) for u in consumer_nodes}
    budget = consumer_budget(profile)
    if spec.capacity_model == "uniform":
        for t in item_nodes:
            caps[t] = item_capacity_uniform(profile, budget, spec.items)
    elif spec.capacity_model == "quality":
        for t in item_nodes:
            caps[t] = item_capacity_quality(profile, t, budget)
    elif spec.capacity_model == "favorites":
        for t in item_nodes:
            caps[t] = favorites_capacity(profile, t)
    else:
        for t in item_nodes:
            caps[t] = question_capacity(profile, spec.items)

    if spec.capacity_model in ("uniform", "quality"):
        item_total = sum(caps[t] for t in item_nodes)
        if abs(item_total - budget) > spec.items:
            raise RuntimeError(
                f"capacity conservation broke: items hold {item_total} against a "
                f"budget of {budget} with only {spec.items} items of rounding slack"
            )

    graph = BipartiteGraph(
        [(rec.item, rec.consumer, rec.weight) for rec in edges],
        capacities=caps,
        nodes=item_nodes + consumer_nodes,
    )
    return graph, weighted


def _normalized_quality(item_nodes: Sequence[NodeId]) -> dict[NodeId, float]:
    raw = [1.0 / (i + 1) for i in range(len(item_nodes))]
    total = sum(raw)
    return {t: r / total for t, r in zip(item_nodes, raw)}
