"""Threshold similarity join between the two document sides.

Items and consumers are sparse tf·idf vectors; the candidate edge set is
every cross-side pair whose dot product reaches the threshold σ, weighted
by that product.  The join runs as two rounds: an index round that posts
each item under a *prefix* of its terms, and a query round where consumers
probe every term they hold and each colliding pair is verified with the
full dot product.

The prefix is what keeps the index small without losing pairs: with terms
sorted by a fixed global order (document frequency descending, term id as
tiebreak), an item only needs to post enough leading terms that the rest
of its vector — even against the most favourable consumer weights — cannot
reach σ on its own.  Any qualifying pair therefore shares at least one
posted term, and the pair is emitted exactly once, at the shared posted
term that comes first in the global order.

Verification always recomputes the full dot product, so pruning bugs could
only ever lose candidates, never invent them — and losing candidates is
what the naive all-pairs oracle in this module is there to catch.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from .engine import Engine
from .graph import EdgeRecord, NodeId, Side, approx_ge


class SimJoinError(ValueError):
    """Bad corpus data or join parameters."""


class TermVector:
    """Sparse non-negative term weights; zero entries are never stored."""

    __slots__ = ("_entries",)

    def __init__(self, entries: Mapping[int, float] | Iterable[tuple[int, float]] = ()):
        items = entries.items() if isinstance(entries, Mapping) else entries
        data: dict[int, float] = {}
        for term, weight in items:
            w = float(weight)
            if w < 0:
                raise SimJoinError(f"negative weight {w} for term {term}")
            if w > 0:
                data[int(term)] = w
        self._entries = data

    def get(self, term: int, default: float = 0.0) -> float:
        return self._entries.get(term, default)

    def items(self) -> list[tuple[int, float]]:
        return sorted(self._entries.items())

    def support(self) -> frozenset[int]:
        return frozenset(self._entries)

    def total(self) -> float:
        return sum(w for _, w in self.items())

    def __len__(self) -> int:
        return len(self._entries)

    def __bool__(self) -> bool:
        return bool(self._entries)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, TermVector) and self._entries == other._entries

    def __repr__(self) -> str:
        inner = ", ".join(f"{t}:{w:g}" for t, w in self.items())
        return f"TermVector({{{inner}}})"


@dataclass(frozen=True)
class Document:
    doc_id: str
    side: Side
    vector: TermVector


@dataclass(frozen=True)
class Corpus:
    """Side-tagged documents over one shared term dictionary."""

    documents: tuple[Document, ...]
    dictionary: Mapping[str, int]

    def __post_init__(self) -> None:
        ids = [d.doc_id for d in self.documents]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise SimJoinError(f"duplicate document ids: {dupes}")
        valid = set(self.dictionary.values())
        if sorted(valid) != list(range(len(self.dictionary))):
            raise SimJoinError("term ids must be dense 0..V-1")
        for d in self.documents:
            stray = d.vector.support() - valid
            if stray:
                raise SimJoinError(f"document {d.doc_id} uses unknown term ids {sorted(stray)}")

    def __len__(self) -> int:
        return len(self.documents)

    def side_documents(self, side: Side) -> list[Document]:
        return [d for d in self.documents if d.side is side]

    def document_frequency(self) -> dict[int, int]:
        df: Counter[int] = Counter()
        for d in self.documents:
            df.update(d.vector.support())
        return dict(df)

    @classmethod
    def merged(cls, *parts: "Corpus") -> "Corpus":
        terms = sorted({t for p in parts for t in p.dictionary})
        mapping = {t: i for i, t in enumerate(terms)}
        docs: list[Document] = []
        for p in parts:
            inverse = {i: t for t, i in p.dictionary.items()}
            for d in p.documents:
                remapped = TermVector(
                    {mapping[inverse[t]]: w for t, w in d.vector.items()}
                )
                docs.append(Document(d.doc_id, d.side, remapped))
        return cls(tuple(docs), mapping)


def tfidf_weight(corpus: Corpus) -> Corpus:
    """Reweight raw counts to tf·idf with idf = ln(N / df).

    A term present in every document carries no signal (idf 0) and is
    dropped from the vectors entirely.
    """
    n = len(corpus.documents)
    if n == 0:
        raise SimJoinError("cannot weight an empty corpus")
    df = corpus.document_frequency()
    docs = []
    for d in corpus.documents:
        entries = {
            t: c * math.log(n / df[t])
            for t, c in d.vector.items()
            if df[t] < n
        }
        docs.append(Document(d.doc_id, d.side, TermVector(entries)))
    return Corpus(tuple(docs), corpus.dictionary)


def dot_similarity(a: TermVector, b: TermVector) -> float:
    """Dot product over the shared terms, summed in term-id order."""
    return sum(w * b.get(t) for t, w in a.items() if t in b.support())


def _check_sides(items: Sequence[Document], consumers: Sequence[Document]) -> None:
    for d in items:
        if d.side is not Side.ITEM:
            raise SimJoinError(f"document {d.doc_id} on the items side is tagged {d.side.name}")
    for d in consumers:
        if d.side is not Side.CONSUMER:
            raise SimJoinError(f"document {d.doc_id} on the consumers side is tagged {d.side.name}")


def naive_join(
    items: Sequence[Document], consumers: Sequence[Document], sigma: float
) -> list[EdgeRecord]:
    """All-pairs reference join: the ground truth candidate_edges must match."""
    if sigma <= 0:
        raise SimJoinError(f"sigma must be positive, got {sigma}")
    _check_sides(items, consumers)
    out = []
    for i, it in enumerate(items):
        for j, cons in enumerate(consumers):
            sim = dot_similarity(it.vector, cons.vector)
            if approx_ge(sim, sigma):
                out.append(EdgeRecord(NodeId(Side.ITEM, i), NodeId(Side.CONSUMER, j), sim))
    return out


#: safety margin on the prefix tail bound: the prefix is grown until the tail
#: alone stays below sigma by this relative cushion, covering the float error
#: of the later full-precision verification.
_PREFIX_MARGIN = 1e-6


def _global_order(
    items: Sequence[Document], consumers: Sequence[Document]
) -> dict[int, int]:
    """Rank of every term: document frequency descending, term id ascending."""
    df: Counter[int] = Counter()
    for d in list(items) + list(consumers):
        df.update(d.vector.support())
    ranked = sorted(df, key=lambda t: (-df[t], t))
    return {t: r for r, t in enumerate(ranked)}


def _prefix(vector: TermVector, rank: Mapping[int, int], max_opposite: Mapping[int, float], sigma: float) -> tuple[int, ...]:
    """Shortest head (in global order) whose tail cannot reach sigma alone."""
    terms = sorted(vector.support(), key=lambda t: rank[t])
    bound = [vector.get(t) * max_opposite.get(t, 0.0) for t in terms]
    cutoff = sigma * (1.0 - _PREFIX_MARGIN)
    tail = sum(bound)
    p = 0
    while p < len(terms) and tail >= cutoff:
        tail -= bound[p]
        p += 1
    return tuple(terms[:p])


def candidate_edges(
    items: Sequence[Document],
    consumers: Sequence[Document],
    sigma: float,
    *,
    engine: Engine | None = None,
) -> list[EdgeRecord]:
    """Exact threshold join as an index round plus a query/verify round."""
    if sigma <= 0:
        raise SimJoinError(f"sigma must be positive, got {sigma}")
    _check_sides(items, consumers)
    eng = engine if engine is not None else Engine(seed=0)
    rank = _global_order(items, consumers)
    max_consumer_weight: dict[int, float] = {}
    for d in consumers:
        for t, w in d.vector.items():
            if w > max_consumer_weight.get(t, 0.0):
                max_consumer_weight[t] = w

    def index_map(key, doc: Document) -> list:
        i = key[1]
        prefix = _prefix(doc.vector, rank, max_consumer_weight, sigma)
        vec = tuple(doc.vector.items())
        return [(t, ("post", i, prefix, vec)) for t in prefix]

    def index_reduce(term, posts):
        return [(term, ("index", tuple(posts)))]

    index_input = [(("item", i), d) for i, d in enumerate(items)]
    index_pairs = eng.round(index_map, index_reduce, index_input, "simjoin-index")

    def query_map(key, value) -> list:
        if isinstance(key, tuple) and key[0] == "consumer":
            j = key[1]
            doc: Document = value
            vec = tuple(doc.vector.items())
            return [(t, ("query", j, vec)) for t, _ in vec]
        return [(key, value)]

    def query_reduce(term, values):
        posts: list = []
        queries: list = []
        for v in values:
            if v[0] == "index":
                posts.extend(v[1])
            else:
                queries.append(v)
        out = []
        for _, i, prefix, ivec in posts:
            item_vector = TermVector(ivec)
            for _, j, cvec in queries:
                consumer_vector = TermVector(cvec)
                shared = [t for t in prefix if t in consumer_vector.support()]
                if not shared or min(shared, key=lambda t: rank[t]) != term:
                    continue
                sim = dot_similarity(item_vector, consumer_vector)
                if approx_ge(sim, sigma):
                    out.append(((i, j), sim))
        return out

    query_input = index_pairs + [(("consumer", j), d) for j, d in enumerate(consumers)]
    result = eng.round(query_map, query_reduce, query_input, "simjoin-query")
    return [
        EdgeRecord(NodeId(Side.ITEM, i), NodeId(Side.CONSUMER, j), sim)
        for (i, j), sim in sorted(result)
    ]


# ---- tokenized corpus files ----


def load_term_corpus(path: str | Path) -> Corpus:
    """Read `doc_id<TAB>side<TAB>term:count ...` lines into a raw-count corpus."""
    sides = {"item": Side.ITEM, "consumer": Side.CONSUMER}
    dictionary: dict[str, int] = {}
    docs: list[Document] = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise SimJoinError(f"{path}:{lineno}: expected doc_id<TAB>side<TAB>terms")
        doc_id, side_name, terms = fields
        try:
            side = sides[side_name.strip().lower()]
        except KeyError:
            raise SimJoinError(f"{path}:{lineno}: unknown side {side_name!r}") from None
        counts: Counter[int] = Counter()
        for token in terms.split():
            term, sep, count = token.rpartition(":")
            if not sep or not term:
                raise SimJoinError(f"{path}:{lineno}: malformed term entry {token!r}")
            try:
                c = int(count)
            except ValueError:
                raise SimJoinError(f"{path}:{lineno}: bad count in {token!r}") from None
            if c <= 0:
                raise SimJoinError(f"{path}:{lineno}: counts must be positive ({token!r})")
            if term not in dictionary:
                dictionary[term] = len(dictionary)
            counts[dictionary[term]] += c
        docs.append(Document(doc_id, side, TermVector(counts)))
    return Corpus(tuple(docs), dictionary)
