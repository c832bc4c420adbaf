"""Query/knowledge dual encoder producing unit-norm embeddings.

The encoder is a single linear projection of mean-pooled hashed n-gram
features. It stands in for a transformer pair at desk scale; anything that
emits fixed-dimension vectors can substitute via the embedding sidecar
accepted by the dense index builder.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .text_features import DEFAULT_NGRAM_MAX, DEFAULT_V, hash_features, tokenize

DEFAULT_D = 128

_MAGIC = b"GRDM"
_VERSION = 1


class ModelError(Exception):
    """Raised on corrupt, truncated, or version-mismatched model files."""


@dataclass
class EncoderParams:
    V: int
    d: int
    ngram_max: int
    W: np.ndarray  # (d, V) float32
    variant: str  # "query" | "knowledge"

    def __post_init__(self) -> None:
        if self.d < 2:
            raise ValueError(f"d must be >= 2, got {self.d}")
        if self.W.shape != (self.d, self.V):
            raise ValueError(f"W shape {self.W.shape} != ({self.d}, {self.V})")
        if not np.all(np.isfinite(self.W)):
            raise ValueError("W contains non-finite entries")


@dataclass
class DualEncoder:
    query_encoder: EncoderParams
    knowledge_encoder: EncoderParams

    def __post_init__(self) -> None:
        q, k = self.query_encoder, self.knowledge_encoder
        if (q.V, q.d, q.ngram_max) != (k.V, k.d, k.ngram_max):
            raise ValueError("query and knowledge encoders must share V, d, ngram_max")

    @property
    def V(self) -> int:
        return self.query_encoder.V

    @property
    def d(self) -> int:
        return self.query_encoder.d

    @property
    def ngram_max(self) -> int:
        return self.query_encoder.ngram_max


def init_dual_encoder(
    V: int = DEFAULT_V,
    d: int = DEFAULT_D,
    ngram_max: int = DEFAULT_NGRAM_MAX,
    seed: int = 0,
) -> DualEncoder:
    """Fresh encoder pair, entries i.i.d. uniform in [-1/sqrt(V), 1/sqrt(V)]."""
    rng = np.random.default_rng(seed)
    scale = 1.0 / np.sqrt(V)
    encoders = []
    for variant in ("query", "knowledge"):
        W = rng.uniform(-scale, scale, size=(d, V)).astype(np.float32)
        encoders.append(EncoderParams(V=V, d=d, ngram_max=ngram_max, W=W, variant=variant))
    return DualEncoder(query_encoder=encoders[0], knowledge_encoder=encoders[1])


def pooled_features(text: str, V: int, ngram_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Hashed feature (indices, mean-pooled counts) for one text."""
    tokens = tokenize(text)
    sv = hash_features(tokens, V, ngram_max)
    idx = np.fromiter(sv.entries.keys(), dtype=np.int64, count=len(sv.entries))
    counts = np.fromiter(sv.entries.values(), dtype=np.float64, count=len(sv.entries))
    counts /= max(1, len(tokens))
    return idx, counts


def project(W: np.ndarray, idx: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Pre-normalization projection z = W @ features, accumulated in float64."""
    if idx.size == 0:
        return np.zeros(W.shape[0], dtype=np.float64)
    return W[:, idx].astype(np.float64) @ counts


def normalize(z: np.ndarray) -> np.ndarray:
    """Unit-norm of z; the zero vector maps to the first basis vector."""
    norm = float(np.linalg.norm(z))
    if norm == 0.0:
        e1 = np.zeros_like(z, dtype=np.float64)
        e1[0] = 1.0
        return e1
    return z / norm


def encode(params: EncoderParams, text: str) -> np.ndarray:
    """Unit-norm float64 embedding of ``text``."""
    idx, counts = pooled_features(text, params.V, params.ngram_max)
    return normalize(project(params.W, idx, counts))


def similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Dot product of unit vectors (cosine similarity)."""
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.dot(a, b))


def save_model(de: DualEncoder, path: str | Path) -> None:
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<BIIB", _VERSION, de.V, de.d, de.ngram_max))
        for params in (de.query_encoder, de.knowledge_encoder):
            tag = params.variant.encode("ascii")
            fh.write(struct.pack("<B", len(tag)))
            fh.write(tag)
            fh.write(np.ascontiguousarray(params.W, dtype="<f4").tobytes())


def load_model(path: str | Path) -> DualEncoder:
    data = Path(path).read_bytes()
    if len(data) < 4 or data[:4] != _MAGIC:
        raise ModelError(f"{path}: not a model file (bad magic)")
    off = 4
    try:
        version, V, d, ngram_max = struct.unpack_from("<BIIB", data, off)
    except struct.error as exc:
        raise ModelError(f"{path}: truncated header") from exc
    off += struct.calcsize("<BIIB")
    if version != _VERSION:
        raise ModelError(f"{path}: unsupported model version {version}")
    encoders = []
    for _ in range(2):
        try:
            (tag_len,) = struct.unpack_from("<B", data, off)
            off += 1
            tag = data[off : off + tag_len].decode("ascii")
            off += tag_len
            n_bytes = d * V * 4
            raw = data[off : off + n_bytes]
            if len(raw) != n_bytes:
                raise ModelError(f"{path}: truncated weight block")
            off += n_bytes
        except struct.error as exc:
            raise ModelError(f"{path}: corrupt model file") from exc
        W = np.frombuffer(raw, dtype="<f4").reshape(d, V).copy()
        encoders.append(EncoderParams(V=V, d=d, ngram_max=ngram_max, W=W, variant=tag))
    if off != len(data):
        raise ModelError(f"{path}: trailing bytes in model file")
    return DualEncoder(query_encoder=encoders[0], knowledge_encoder=encoders[1])
