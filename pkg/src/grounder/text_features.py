"""Text front-end: tokenization, hashed n-gram features, stopword filtering.

Feature hashing maps n-grams into a fixed index space with a seed-free
64-bit FNV-1a hash, so feature vectors (and therefore model and index
files) are identical across platforms and runs.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

DEFAULT_V = 2**18
DEFAULT_NGRAM_MAX = 2

# word = run of unicode letters/digits; underscore excluded because it is
# the n-gram join character
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a_64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


@dataclass(frozen=True)
class SparseVector:
    """Sparse count vector over a hash space of size ``dims``."""

    dims: int
    entries: dict[int, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for idx, count in self.entries.items():
            if not 0 <= idx < self.dims:
                raise ValueError(f"index {idx} out of range [0, {self.dims})")
            if count <= 0:
                raise ValueError(f"non-positive count {count} at index {idx}")

    @property
    def total(self) -> float:
        return sum(self.entries.values())


def tokenize(text: str) -> list[str]:
    """Lowercase and split on whitespace/punctuation; digits kept."""
    return [m.group(0).lower() for m in _TOKEN_RE.finditer(text)]


def hash_features(tokens: list[str], V: int = DEFAULT_V, ngram_max: int = DEFAULT_NGRAM_MAX) -> SparseVector:
    """Hash 1..ngram_max-grams of ``tokens`` into a V-dimensional count vector."""
    if V < 2 or V & (V - 1) != 0:
        raise ValueError(f"V must be a power of two >= 2, got {V}")
    if ngram_max not in (1, 2, 3):
        raise ValueError(f"ngram_max must be 1, 2, or 3, got {ngram_max}")
    entries: dict[int, float] = {}
    for n in range(1, ngram_max + 1):
        for i in range(len(tokens) - n + 1):
            gram = "_".join(tokens[i : i + n])
            idx = fnv1a_64(gram.encode("utf-8")) % V
            entries[idx] = entries.get(idx, 0.0) + 1.0
    return SparseVector(dims=V, entries=entries)


@dataclass(frozen=True)
class StopwordList:
    words: frozenset[str]

    def __post_init__(self) -> None:
        if not self.words:
            raise ValueError("stopword list must be non-empty")
        for w in self.words:
            if w != w.lower():
                raise ValueError(f"stopword {w!r} must be lowercase")

    def __contains__(self, word: str) -> bool:
        return word in self.words


def load_stopwords(path: str | Path | None = None) -> StopwordList:
    """Load the stopword list; defaults to the pinned list shipped in data/."""
    if path is None:
        text = resources.files("grounder").joinpath("data/stopwords.txt").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    words = frozenset(w.strip() for w in text.splitlines() if w.strip())
    return StopwordList(words=words)


def remove_stopwords(text: str, sw: StopwordList) -> str:
    """Drop whitespace-delimited tokens whose lowercase form is a stopword.

    Casing of surviving tokens is preserved; output is single-space joined.
    """
    kept = [tok for tok in text.split() if tok.lower() not in sw]
    return " ".join(kept)
