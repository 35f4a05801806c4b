"""Free-text ingestion: tokenize, drop stop words, stem, count.

The stemmer is a self-contained implementation of Porter's classic English
suffix-stripping algorithm — small enough to bundle, and keeping it local
means tokenization can never drift under us with a library upgrade, which
matters because term identity feeds straight into edge identity downstream.
"""

from __future__ import annotations

import re
from collections import Counter
from pathlib import Path

from .graph import Side
from .simjoin import Corpus, Document, SimJoinError, TermVector

STOP_WORDS = frozenset(
    """
    a about above after again against all am an and any are as at be because
    been before being below between both but by can did do does doing down
    during each few for from further had has have having he her here hers
    herself him himself his how i if in into is it its itself just me more
    most my myself no nor not now of off on once only or other our ours
    ourselves out over own same she should so some such than that the their
    theirs them themselves then there these they this those through to too
    under until up very was we were what when where which while who whom why
    will with you your yours yourself yourselves
    """.split()
)

_TOKEN_BOUNDARY = re.compile(r"[^a-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Lowercase, treat every non-alphanumeric character as a boundary."""
    return [tok for tok in _TOKEN_BOUNDARY.split(text.lower()) if tok]


# ---- Porter stemmer ----


def _is_consonant(word: str, i: int) -> bool:
    ch = word[i]
    if ch in "aeiou":
        return False
    if ch == "y":
        return i == 0 or not _is_consonant(word, i - 1)
    return True


def _measure(stem: str) -> int:
    """Number of vowel→consonant transitions: the m in [C](VC)^m[V]."""
    n = 0
    i = 0
    length = len(stem)
    while i < length and _is_consonant(stem, i):
        i += 1
    while i < length:
        while i < length and not _is_consonant(stem, i):
            i += 1
        if i >= length:
            break
        n += 1
        while i < length and _is_consonant(stem, i):
            i += 1
    return n


def _has_vowel(stem: str) -> bool:
    return any(not _is_consonant(stem, i) for i in range(len(stem)))


def _double_consonant(word: str) -> bool:
    return len(word) >= 2 and word[-1] == word[-2] and _is_consonant(word, len(word) - 1)


def _cvc(word: str) -> bool:
    return (
        len(word) >= 3
        and _is_consonant(word, len(word) - 3)
        and not _is_consonant(word, len(word) - 2)
        and _is_consonant(word, len(word) - 1)
        and word[-1] not in "wxy"
    )


_STEP2 = (
    ("ational", "ate"), ("tional", "tion"), ("enci", "ence"), ("anci", "ance"),
    ("izer", "ize"), ("abli", "able"), ("alli", "al"), ("entli", "ent"),
    ("eli", "e"), ("ousli", "ous"), ("ization", "ize"), ("ation", "ate"),
    ("ator", "ate"), ("alism", "al"), ("iveness", "ive"), ("fulness", "ful"),
    ("ousness", "ous"), ("aliti", "al"), ("iviti", "ive"), ("biliti", "ble"),
)

_STEP3 = (
    ("icate", "ic"), ("ative", ""), ("alize", "al"), ("iciti", "ic"),
    ("ical", "ic"), ("ful", ""), ("ness", ""),
)

_STEP4 = (
    "ement", "ance", "ence", "able", "ible", "ment", "ant", "ent", "ism",
    "ate", "iti", "ous", "ive", "ize", "ion", "al", "er", "ic", "ou",
)


def porter_stem(word: str) -> str:
    """Porter (1980) suffix stripping; words of length <= 2 pass through."""
    if len(word) <= 2:
        return word

    # Step 1a: plurals.
    if word.endswith("sses"):
        word = word[:-2]
    elif word.endswith("ies"):
        word = word[:-2]
    elif not word.endswith("ss") and word.endswith("s"):
        word = word[:-1]

    # Step 1b: -eed / -ed / -ing.
    if word.endswith("eed"):
        if _measure(word[:-3]) > 0:
            word = word[:-1]
    else:
        stripped = None
        if word.endswith("ed") and _has_vowel(word[:-2]):
            stripped = word[:-2]
        elif word.endswith("ing") and _has_vowel(word[:-3]):
            stripped = word[:-3]
        if stripped is not None:
            word = stripped
            if word.endswith(("at", "bl", "iz")):
                word += "e"
            elif _double_consonant(word) and word[-1] not in "lsz":
                word = word[:-1]
            elif _measure(word) == 1 and _cvc(word):
                word += "e"

    # Step 1c: terminal y.
    if word.endswith("y") and _has_vowel(word[:-1]):
        word = word[:-1] + "i"

    # Steps 2 and 3: double suffixes to single, longest suffix first.
    for table in (_STEP2, _STEP3):
        for suffix, replacement in sorted(table, key=lambda p: -len(p[0])):
            if word.endswith(suffix):
                stem = word[: -len(suffix)]
                if _measure(stem) > 0:
                    word = stem + replacement
                break

    # Step 4: strip residual suffixes from long stems.
    for suffix in sorted(_STEP4, key=len, reverse=True):
        if word.endswith(suffix):
            stem = word[: -len(suffix)]
            if _measure(stem) > 1 and (suffix != "ion" or stem.endswith(("s", "t"))):
                word = stem
            break

    # Step 5a: terminal e.
    if word.endswith("e"):
        m = _measure(word[:-1])
        if m > 1 or (m == 1 and not _cvc(word[:-1])):
            word = word[:-1]

    # Step 5b: -ll to -l on long stems.
    if word.endswith("ll") and _measure(word) > 1:
        word = word[:-1]
    return word


def terms_of(text: str) -> Counter:
    """Token counts after stop-word removal and stemming."""
    counts: Counter = Counter()
    for token in tokenize(text):
        if token in STOP_WORDS:
            continue
        counts[porter_stem(token)] += 1
    return counts


def ingest_text_corpus(path: str | Path, side: Side) -> Corpus:
    """Read ``doc_id<TAB>free text`` lines into a single-side corpus.

    A document whose text reduces to nothing (all stop words, or empty) is
    kept with an empty vector — it still exists as a node, it just cannot
    match anything.  Terms are interned in first-appearance order.
    """
    documents: list[Document] = []
    seen_ids: set[str] = set()
    dictionary: dict[str, int] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        doc_id, sep, text = raw.partition("\t")
        doc_id = doc_id.strip()
        if not sep or not doc_id:
            raise SimJoinError(f"{path}:{lineno}: expected doc_id<TAB>text")
        if doc_id in seen_ids:
            raise SimJoinError(f"{path}:{lineno}: duplicate document id {doc_id!r}")
        seen_ids.add(doc_id)
        counts = terms_of(text)
        vector = {dictionary.setdefault(term, len(dictionary)): float(n) for term, n in sorted(counts.items())}
        documents.append(Document(doc_id, side, TermVector(vector)))
    return Corpus(tuple(documents), dictionary)
