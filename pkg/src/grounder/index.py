"""Dense index: precomputed unit-norm embeddings with exact top-k search.

Full-scan inner-product search only; corpora here are small enough that
exactness is cheaper than tuning an ANN structure, and it keeps the
retrieval metrics noise-free. The index records a fingerprint of the model
file that produced it so stale indices are rejected at load time.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import TableDocument, linearize_table
from .encoder import DualEncoder, encode
from .ranking import RankedList

_MAGIC = b"GRDI"
_VERSION = 1


class IndexError_(Exception):
    """Raised on corrupt index files or fingerprint mismatches."""


def model_fingerprint(model_path: str | Path) -> str:
    return hashlib.sha256(Path(model_path).read_bytes()).hexdigest()


@dataclass
class DenseIndex:
    item_ids: tuple[str, ...]
    matrix: np.ndarray  # (n, d) float32, unit-norm rows
    fingerprint: str

    def __post_init__(self) -> None:
        if len(self.item_ids) != self.matrix.shape[0]:
            raise IndexError_("item count does not match matrix rows")
        if not self.fingerprint:
            raise IndexError_("fingerprint must be non-empty")
        norms = np.linalg.norm(self.matrix, axis=1)
        if self.matrix.shape[0] and not np.allclose(norms, 1.0, atol=1e-5):
            raise IndexError_("index rows must be unit-norm")

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def d(self) -> int:
        return self.matrix.shape[1]


def load_embedding_sidecar(path: str | Path, d: int) -> dict[str, np.ndarray]:
    """External-embedder sidecar: JSONL of {"id": str, "embedding": [d floats]}."""
    out: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            emb = np.asarray(obj["embedding"], dtype=np.float64)
            if emb.shape != (d,):
                raise IndexError_(f"sidecar line {line_no}: embedding dim {emb.shape} != ({d},)")
            norm = np.linalg.norm(emb)
            if norm == 0:
                raise IndexError_(f"sidecar line {line_no}: zero embedding")
            out[obj["id"]] = emb / norm
    return out


def build_index(
    de: DualEncoder,
    corpus: Sequence[TableDocument],
    fingerprint: str,
    sidecar: dict[str, np.ndarray] | None = None,
) -> DenseIndex:
    """Embed every table with the knowledge encoder, in corpus order.

    Items present in ``sidecar`` use the supplied embedding instead of the
    built-in encoder.
    """
    if not corpus:
        raise IndexError_("cannot build an index over an empty corpus")
    rows = []
    for t in corpus:
        if sidecar and t.table_id in sidecar:
            rows.append(sidecar[t.table_id])
        else:
            rows.append(encode(de.knowledge_encoder, linearize_table(t)))
    matrix = np.stack(rows).astype(np.float32)
    # renormalize after the float32 cast so stored rows are unit-norm
    matrix /= np.linalg.norm(matrix, axis=1, keepdims=True)
    return DenseIndex(
        item_ids=tuple(t.table_id for t in corpus),
        matrix=matrix,
        fingerprint=fingerprint,
    )


def search(index: DenseIndex, query_emb: np.ndarray, k: int) -> RankedList[str]:
    """Exact top-k by inner product (cosine on unit vectors)."""
    if query_emb.shape != (index.d,):
        raise IndexError_(f"query dim {query_emb.shape} != ({index.d},)")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    scores = index.matrix @ query_emb.astype(np.float32)
    k_eff = min(k, index.n)
    # stable selection: sort by (-score, position)
    order = np.lexsort((np.arange(index.n), -scores))[:k_eff]
    return RankedList(items=tuple((index.item_ids[i], float(scores[i])) for i in order))


def save_index(index: DenseIndex, path: str | Path) -> None:
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fp = index.fingerprint.encode("ascii")
        fh.write(struct.pack("<BIIH", _VERSION, index.n, index.d, len(fp)))
        fh.write(fp)
        fh.write(np.ascontiguousarray(index.matrix, dtype="<f4").tobytes())
        id_blob = "\n".join(index.item_ids).encode("utf-8")
        fh.write(struct.pack("<I", len(id_blob)))
        fh.write(id_blob)


def load_index(path: str | Path, expected_fingerprint: str | None = None, force: bool = False) -> DenseIndex:
    data = Path(path).read_bytes()
    if len(data) < 4 or data[:4] != _MAGIC:
        raise IndexError_(f"{path}: not an index file (bad magic)")
    off = 4
    try:
        version, n, d, fp_len = struct.unpack_from("<BIIH", data, off)
        off += struct.calcsize("<BIIH")
        fingerprint = data[off : off + fp_len].decode("ascii")
        off += fp_len
        mat_bytes = n * d * 4
        raw = data[off : off + mat_bytes]
        if len(raw) != mat_bytes:
            raise IndexError_(f"{path}: truncated matrix block")
        off += mat_bytes
        (id_len,) = struct.unpack_from("<I", data, off)
        off += 4
        id_blob = data[off : off + id_len]
        if len(id_blob) != id_len:
            raise IndexError_(f"{path}: truncated id table")
        off += id_len
    except struct.error as exc:
        raise IndexError_(f"{path}: corrupt index file") from exc
    if version != _VERSION:
        raise IndexError_(f"{path}: unsupported index version {version}")
    if off != len(data):
        raise IndexError_(f"{path}: trailing bytes")
    if expected_fingerprint is not None and fingerprint != expected_fingerprint and not force:
        raise IndexError_(
            f"{path}: index fingerprint {fingerprint[:12]}... does not match the "
            f"supplied model ({expected_fingerprint[:12]}...); rebuild or pass force"
        )
    matrix = np.frombuffer(data, dtype="<f4", count=n * d, offset=4 + struct.calcsize("<BIIH") + fp_len).reshape(n, d).copy()
    item_ids = tuple(id_blob.decode("utf-8").split("\n")) if id_blob else ()
    return DenseIndex(item_ids=item_ids, matrix=matrix, fingerprint=fingerprint)
