"""Corpus text statistics: word counts and Shannon entropies.

Tokenization is deliberately simple and reproducible: lowercase, split
on whitespace, strip leading/trailing punctuation per token, drop empty
tokens. Entropies are in bits and computed as

    H = log2(N) - (1/N) * sum(c * log2(c))

over token counts c (N = total tokens), which is exact for uniform and
single-token distributions.
"""

from __future__ import annotations

import math
import unicodedata
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .exceptions import InvalidInputError


@dataclass(frozen=True)
class CorpusStats:
    """Word-count and entropy summary of a caption corpus.

    Entropy fields are None when only the word-count pass has run.
    """

    max_words: int
    min_words: int
    avg_words: float
    unique_words: int
    histogram: dict[int, int]
    max_ent: float | None = None
    min_ent: float | None = None
    avg_ent: float | None = None
    all_ent: float | None = None


def _trim_punct(token: str) -> str:
    start, end = 0, len(token)
    while start < end and unicodedata.category(token[start]).startswith("P"):
        start += 1
    while end > start and unicodedata.category(token[end - 1]).startswith("P"):
        end -= 1
    return token[start:end]


def tokenize_caption(text: str) -> list[str]:
    """Lowercased whitespace tokens with boundary punctuation removed."""
    tokens = []
    for raw in text.lower().split():
        tok = _trim_punct(raw)
        if tok:
            tokens.append(tok)
    return tokens


def _entropy_from_counts(counts: Mapping[str, int]) -> float:
    # Canonical (sorted-token) accumulation keeps the result independent
    # of caption order.
    total = sum(counts.values())
    weighted = math.fsum(c * math.log2(c) for _, c in sorted(counts.items()))
    return math.log2(total) - weighted / total


def text_entropy(caption: str) -> float:
    """Shannon entropy (bits) of the within-caption token distribution."""
    tokens = tokenize_caption(caption)
    if not tokens:
        raise InvalidInputError("caption has no tokens after tokenization")
    return _entropy_from_counts(Counter(tokens))


def corpus_entropy(corpus: Iterable[str]) -> float:
    """Shannon entropy (bits) of the corpus-wide token distribution."""
    counts: Counter[str] = Counter()
    for caption in corpus:
        counts.update(tokenize_caption(caption))
    if not counts:
        raise InvalidInputError("corpus has no tokens after tokenization")
    return _entropy_from_counts(counts)


def word_count_stats(corpus: Sequence[str]) -> CorpusStats:
    """Word-count summary: max/min/avg caption length, vocabulary size, histogram."""
    if not corpus:
        raise InvalidInputError("corpus must contain at least one caption")
    vocab: set[str] = set()
    lengths = []
    histogram: Counter[int] = Counter()
    for caption in corpus:
        tokens = tokenize_caption(caption)
        vocab.update(tokens)
        lengths.append(len(tokens))
        histogram[len(tokens)] += 1
    return CorpusStats(
        max_words=max(lengths),
        min_words=min(lengths),
        avg_words=sum(lengths) / len(lengths),
        unique_words=len(vocab),
        histogram=dict(sorted(histogram.items())),
    )


def compute_corpus_stats(corpus: Sequence[str]) -> CorpusStats:
    """Full corpus summary: word counts plus per-text and corpus entropies.

    Per-text entropy aggregates are taken over captions that still have
    tokens after tokenization.
    """
    base = word_count_stats(corpus)
    entropies = []
    for caption in corpus:
        if tokenize_caption(caption):
            entropies.append(text_entropy(caption))
    if not entropies:
        raise InvalidInputError("corpus has no tokens after tokenization")
    return CorpusStats(
        max_words=base.max_words,
        min_words=base.min_words,
        avg_words=base.avg_words,
        unique_words=base.unique_words,
        histogram=base.histogram,
        max_ent=max(entropies),
        min_ent=min(entropies),
        avg_ent=math.fsum(entropies) / len(entropies),
        all_ent=corpus_entropy(corpus),
    )


def histogram_export(stats: CorpusStats | Mapping[int, int], path: str | Path) -> None:
    """Write the word-count histogram as CSV, ascending by word count."""
    histogram = stats.histogram if isinstance(stats, CorpusStats) else stats
    lines = ["word_count,frequency"]
    for count in sorted(histogram):
        lines.append(f"{count},{histogram[count]}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def stats_to_dict(stats: CorpusStats) -> dict:
    """Plain-JSON view (histogram keys become strings)."""
    out = {
        "max_words": stats.max_words,
        "min_words": stats.min_words,
        "avg_words": stats.avg_words,
        "unique_words": stats.unique_words,
        "histogram": {str(k): v for k, v in sorted(stats.histogram.items())},
    }
    for field in ("max_ent", "min_ent", "avg_ent", "all_ent"):
        value = getattr(stats, field)
        if value is not None:
            out[field] = value
    return out
