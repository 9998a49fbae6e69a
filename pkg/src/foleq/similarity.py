"""String similarity used to restrict atom-matching candidates.

The default backend is a character n-gram cosine over pooled 2- and 3-gram
counts.  Strings shorter than n contribute themselves as a single gram so
that every non-empty string is fully similar to itself.  The relatedness
threshold is inclusive: a score of exactly ``threshold`` counts as related.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache


@dataclass(frozen=True)
class SimilarityConfig:
    ngram_sizes: frozenset[int] = frozenset({2, 3})
    threshold: float = 0.6
    case_sensitive: bool = False

    def __post_init__(self):
        if not self.ngram_sizes:
            raise ValueError("ngram_sizes must be non-empty")
        if any(n < 1 for n in self.ngram_sizes):
            raise ValueError("ngram sizes must be >= 1")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must lie in [0, 1]")


DEFAULT_SIMILARITY = SimilarityConfig()


@lru_cache(maxsize=16384)
def levenshtein(a: str, b: str) -> int:
    """Edit distance with unit insert/delete/substitute costs."""
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            cost = 0 if ca == cb else 1
            current.append(min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + cost))
        previous = current
    return previous[-1]


def _gram_counts(text: str, sizes: frozenset[int]) -> Counter:
    counts: Counter = Counter()
    for n in sizes:
        if len(text) >= n:
            for i in range(len(text) - n + 1):
                counts[(n, text[i : i + n])] += 1
        elif text:
            counts[(n, text)] += 1
    return counts


# Cached entries are shared; callers must treat the returned counter as read-only.
@lru_cache(maxsize=8192)
def _gram_vector(text: str, sizes: frozenset[int]) -> tuple[Counter, float]:
    counts = _gram_counts(text, sizes)
    return counts, math.sqrt(sum(c * c for c in counts.values()))


def ngram_cosine(a: str, b: str, config: SimilarityConfig = DEFAULT_SIMILARITY) -> float:
    """Cosine of pooled character n-gram count vectors, in [0, 1]."""
    if not config.case_sensitive:
        a, b = a.lower(), b.lower()
    va, norm_a = _gram_vector(a, config.ngram_sizes)
    vb, norm_b = _gram_vector(b, config.ngram_sizes)
    if not va or not vb:
        return 0.0
    if len(vb) < len(va):
        va, vb = vb, va
    dot = sum(count * vb[gram] for gram, count in va.items())
    if dot == 0:
        return 0.0
    return dot / (norm_a * norm_b)


def is_related(a: str, b: str, config: SimilarityConfig = DEFAULT_SIMILARITY) -> bool:
    """True when the strings are similar enough to be matching candidates."""
    return ngram_cosine(a, b, config) >= config.threshold
