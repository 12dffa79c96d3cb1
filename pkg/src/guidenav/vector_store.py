"""Unit-vector stores with cosine top-k search, plus the deterministic stub embedder.

Two store kinds exist: the ``environment`` store holds one record per
(node, orientation) for the whole map and is append-only after load; the
``navigational`` store holds the records expected along the current route
and may be rewritten per session.  Search is an exact exhaustive scan --
store sizes here are hundreds of records, so an index would buy nothing.

The stub embedder replaces a real image encoder for desk-scale runs: the
base vector is a normalized gaussian draw seeded by the FNV-1a hash of the
descriptor, and optional observation noise perturbs it by ``sigma`` times a
unit gaussian direction drawn from a stream seeded by
``fnv1a("<descriptor>|noise|<seed>")``.  With the fixed PRNG stack in
:mod:`guidenav.rng` the embeddings are bit-identical across runs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from .rng import Xoshiro256pp, hash_text
from .topomap import QUANTIZED_DIRECTIONS

DEFAULT_DIM = 64

ENVIRONMENT = "environment"
NAVIGATIONAL = "navigational"
STORE_KINDS = (ENVIRONMENT, NAVIGATIONAL)

_NORM_TOL = 1e-9


class StoreError(ValueError):
    pass


def normalize(values: np.ndarray) -> np.ndarray:
    vec = np.asarray(values, dtype=np.float64)
    norm = float(np.linalg.norm(vec))
    if norm == 0.0 or not math.isfinite(norm):
        raise StoreError("cannot normalize a zero or non-finite vector")
    return vec / norm


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """dot(a, b) / (|a| |b|); the plain dot product for unit vectors."""
    va = np.asarray(a, dtype=np.float64)
    vb = np.asarray(b, dtype=np.float64)
    if va.shape != vb.shape:
        raise StoreError(f"dimension mismatch: {va.shape} vs {vb.shape}")
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        raise StoreError("cosine similarity is undefined for zero vectors")
    return float(np.dot(va, vb) / (na * nb))


@lru_cache(maxsize=4096)
def _base_vector(descriptor: str, dim: int) -> tuple[float, ...]:
    rng = Xoshiro256pp(hash_text(descriptor))
    return tuple(normalize(np.array(rng.gaussians(dim))))


def stub_embed(descriptor: str, noise_sigma: float = 0.0, seed: int = 0, dim: int = DEFAULT_DIM) -> np.ndarray:
    """Deterministic embedding for a descriptor, optionally noise-perturbed.

    ``noise_sigma = 0`` returns the exact base vector for the descriptor.
    Otherwise the result is ``normalize(base + sigma * unit_gaussian)`` with
    the perturbation direction drawn from the (descriptor, seed) stream, so
    repeated observations differ while remaining reproducible per seed.
    """
    if noise_sigma < 0:
        raise StoreError("noise_sigma must be >= 0")
    base = np.array(_base_vector(descriptor, dim))
    if noise_sigma == 0.0:
        return base.copy()
    noise_rng = Xoshiro256pp(hash_text(f"{descriptor}|noise|{seed}"))
    direction = normalize(np.array(noise_rng.gaussians(dim)))
    return normalize(base + noise_sigma * direction)


def pose_descriptor(node_id: str, orientation: int) -> str:
    """Descriptor convention for per-(node, orientation) records."""
    return f"node:{node_id}/dir:{orientation}"


@dataclass(frozen=True)
class RecordMeta:
    node: str
    orientation: int
    kind: str
    source: str = ""

    def __post_init__(self):
        if self.orientation not in QUANTIZED_DIRECTIONS:
            raise StoreError(f"orientation must be one of {QUANTIZED_DIRECTIONS}")
        if self.kind not in STORE_KINDS:
            raise StoreError(f"record kind must be one of {STORE_KINDS}")


@dataclass(frozen=True)
class EmbeddingRecord:
    id: str
    embedding: np.ndarray
    meta: RecordMeta


@dataclass(frozen=True)
class QueryResult:
    record: EmbeddingRecord
    similarity: float


class VectorStore:
    """Exact cosine top-k over unit-normalized records.

    Concurrent readers are safe once loading stops; the navigational store
    is owned by a single session and rewritten when a route is adopted.
    """

    def __init__(self, kind: str, dim: int = DEFAULT_DIM):
        if kind not in STORE_KINDS:
            raise StoreError(f"store kind must be one of {STORE_KINDS}")
        self.kind = kind
        self.dim = dim
        self._records: dict[str, EmbeddingRecord] = {}
        self._matrix: np.ndarray | None = None
        self._order: list[str] = []

    def __len__(self) -> int:
        return len(self._records)

    def records(self) -> list[EmbeddingRecord]:
        return [self._records[rid] for rid in sorted(self._records)]

    def insert(self, record: EmbeddingRecord) -> None:
        if record.id in self._records:
            raise StoreError(f"duplicate record id {record.id!r}")
        vec = np.asarray(record.embedding, dtype=np.float64)
        if vec.shape != (self.dim,):
            raise StoreError(f"expected dimension {self.dim}, got {vec.shape}")
        if abs(float(np.linalg.norm(vec)) - 1.0) > _NORM_TOL:
            raise StoreError(f"record {record.id!r} is not unit-normalized")
        if record.meta.kind != self.kind:
            raise StoreError(f"record kind {record.meta.kind!r} does not match store kind {self.kind!r}")
        self._records[record.id] = replace(record, embedding=vec)
        self._matrix = None

    def delete(self, record_id: str) -> None:
        if self.kind == ENVIRONMENT:
            raise StoreError("the environment store is append-only; delete is not allowed")
        if record_id not in self._records:
            raise StoreError(f"unknown record id {record_id!r}")
        del self._records[record_id]
        self._matrix = None

    def clear(self) -> None:
        if self.kind == ENVIRONMENT:
            raise StoreError("the environment store is append-only; clear is not allowed")
        self._records.clear()
        self._matrix = None

    def get(self, record_id: str) -> EmbeddingRecord | None:
        return self._records.get(record_id)

    def get_by_pose(self, node: str, orientation: int) -> EmbeddingRecord | None:
        for rid in sorted(self._records):
            meta = self._records[rid].meta
            if meta.node == node and meta.orientation == orientation:
                return self._records[rid]
        return None

    def _ensure_matrix(self) -> None:
        if self._matrix is None:
            self._order = sorted(self._records)
            self._matrix = np.stack([self._records[rid].embedding for rid in self._order])

    def query_top_k(self, probe: np.ndarray, k: int) -> list[QueryResult]:
        """The k most cosine-similar records; ties break by ascending id."""
        if k < 1:
            raise StoreError("k must be >= 1")
        if not self._records:
            raise StoreError("cannot query an empty store")
        vec = np.asarray(probe, dtype=np.float64)
        if vec.shape != (self.dim,):
            raise StoreError(f"probe dimension {vec.shape} does not match store dimension {self.dim}")
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise StoreError("cannot query with a zero vector")
        self._ensure_matrix()
        sims = self._matrix @ (vec / norm)
        ranked = sorted(zip(self._order, sims), key=lambda pair: (-pair[1], pair[0]))
        return [QueryResult(self._records[rid], float(sim)) for rid, sim in ranked[:k]]


def persist_store(store: VectorStore, path) -> None:
    """One JSON object per line: id, values, node, orientation, kind, source."""
    lines = []
    for record in store.records():
        lines.append(
            json.dumps(
                {
                    "id": record.id,
                    "values": [float(v) for v in record.embedding],
                    "node": record.meta.node,
                    "orientation": record.meta.orientation,
                    "kind": record.meta.kind,
                    "source": record.meta.source,
                },
                sort_keys=True,
            )
        )
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def load_store(path, kind: str | None = None, dim: int | None = None) -> VectorStore:
    """Load a record-per-line store file; malformed lines report their number."""
    text = Path(path).read_text(encoding="utf-8")
    store: VectorStore | None = None
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            record = EmbeddingRecord(
                id=obj["id"],
                embedding=np.array(obj["values"], dtype=np.float64),
                meta=RecordMeta(
                    node=obj["node"],
                    orientation=int(obj["orientation"]),
                    kind=obj["kind"],
                    source=obj.get("source", ""),
                ),
            )
        except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
            raise StoreError(f"malformed store record on line {line_no}: {exc}") from None
        if store is None:
            store = VectorStore(kind or record.meta.kind, dim or len(record.embedding))
        if len(record.embedding) != store.dim:
            raise StoreError(
                f"dimension inconsistency on line {line_no}: expected {store.dim}, got {len(record.embedding)}"
            )
        try:
            store.insert(record)
        except StoreError as exc:
            raise StoreError(f"line {line_no}: {exc}") from None
    if store is None:
        store = VectorStore(kind or ENVIRONMENT, dim or DEFAULT_DIM)
    return store
