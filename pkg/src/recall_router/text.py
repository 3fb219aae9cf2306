"""Shared deterministic text utilities: tokenization, stemming, overlap scores.

Everything here is pure and dependency-free so that retrieval ranking and the
offline similarity backends give identical results on every platform.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from functools import lru_cache
from importlib import resources

_TOKEN_RE = re.compile(r"[a-z0-9']+")

# Suffixes tried longest-first; a strip only applies when it leaves >= 3 chars.
_SUFFIXES = ("ing", "ed", "es", "ly", "s")


@lru_cache(maxsize=1)
def stopwords() -> frozenset[str]:
    """The versioned English stop-word list shipped with the package."""
    raw = resources.files("recall_router.data").joinpath("stopwords.txt").read_text("utf-8")
    words = set()
    for line in raw.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.add(line)
    return frozenset(words)


def tokenize(text: str) -> list[str]:
    """Lowercased word tokens, punctuation dropped."""
    return _TOKEN_RE.findall(text.lower())


def content_tokens(text: str) -> list[str]:
    """Tokens with stop-words removed."""
    sw = stopwords()
    return [t for t in tokenize(text) if t not in sw]


def stem(token: str) -> str:
    """Light suffix-stripping stemmer; deliberately rule-based and stable."""
    if token.endswith("'s"):
        token = token[:-2]
    for suffix in _SUFFIXES:
        if token.endswith(suffix) and len(token) - len(suffix) >= 3:
            return token[: -len(suffix)]
    return token


def stemmed_tokens(text: str) -> list[str]:
    return [stem(t) for t in tokenize(text)]


def token_f1(a: str, b: str) -> float:
    """Token-level F1 over stemmed token multisets; symmetric, in [0, 1]."""
    ta = Counter(stemmed_tokens(a))
    tb = Counter(stemmed_tokens(b))
    if not ta or not tb:
        return 0.0
    common = sum((ta & tb).values())
    if common == 0:
        return 0.0
    precision = common / sum(ta.values())
    recall = common / sum(tb.values())
    return 2 * precision * recall / (precision + recall)


def jaccard(a: str, b: str) -> float:
    """Jaccard overlap of stop-word-filtered token sets; both-empty -> 0."""
    sa = set(content_tokens(a))
    sb = set(content_tokens(b))
    if not sa and not sb:
        return 0.0
    return len(sa & sb) / len(sa | sb)


def overlap_score(query: str, candidate: str) -> float:
    """Normalized token overlap used by memory retrieval (set Jaccard)."""
    return jaccard(query, candidate)


def tf_cosine(a: str, b: str) -> float:
    """Cosine similarity over term-frequency vectors of raw tokens."""
    ca = Counter(tokenize(a))
    cb = Counter(tokenize(b))
    if not ca or not cb:
        return 0.0
    dot = sum(ca[t] * cb[t] for t in ca.keys() & cb.keys())
    if dot == 0:
        return 0.0
    norm = math.sqrt(sum(v * v for v in ca.values())) * math.sqrt(sum(v * v for v in cb.values()))
    return dot / norm


def split_sentences(text: str) -> list[str]:
    """Split on terminal punctuation (. ! ?) followed by whitespace."""
    parts = re.split(r"(?<=[.!?])\s+", text.strip())
    return [p.strip() for p in parts if p.strip()]
