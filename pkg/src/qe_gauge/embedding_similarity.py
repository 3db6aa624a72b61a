"""Sentence-embedding storage and cross-lingual cosine similarity.

Embeddings are produced out of process and exchanged through a plain text
format: line 1 ``#dim=<d>``, line 2 ``#model=<tag>``, then one vector per
line as ``<segment_id>\\t<side>\\t<f1> <f2> ... <fd>`` with ``side`` either
``source`` or ``target``.  This module never runs a neural model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .dataset_ingest import with_similarity

SIDES = ("source", "target")


class EmbeddingError(Exception):
    """Base class for embedding-store failures."""


class BadHeader(EmbeddingError):
    pass


class MalformedVector(EmbeddingError):
    def __init__(self, line_no: int, cause: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {cause}")


class DimensionMismatch(EmbeddingError):
    def __init__(self, line_no: Optional[int] = None, detail: str = ""):
        self.line_no = line_no
        where = f"line {line_no}: " if line_no is not None else ""
        super().__init__(f"{where}{detail or 'vector dimensions disagree'}")


class DuplicateKey(EmbeddingError):
    def __init__(self, segment_id: int, side: str):
        self.segment_id = segment_id
        self.side = side
        super().__init__(f"duplicate vector for segment {segment_id} side {side!r}")


class ZeroVector(EmbeddingError):
    pass


class MissingEmbedding(EmbeddingError):
    def __init__(self, segment_id: int, side: str):
        self.segment_id = segment_id
        self.side = side
        super().__init__(f"no embedding for segment {segment_id} side {side!r}")


class ModelTagMismatch(EmbeddingError):
    def __init__(self, tags: Sequence[str]):
        self.tags = list(tags)
        super().__init__(
            "embedding stores come from different models: " + ", ".join(sorted(set(tags)))
        )


@dataclass(frozen=True)
class EmbeddingVector:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("embedding must be a non-empty 1-d vector")
        if not np.all(np.isfinite(v)):
            raise ValueError("embedding contains non-finite values")
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.values.shape[0]


class EmbeddingStore:
    """Immutable map from (segment_id, side) to fixed-dimension vectors."""

    def __init__(self, dim: int, model_tag: str, entries: dict):
        if dim < 1:
            raise ValueError("dim must be positive")
        for (seg, side), vec in entries.items():
            if side not in SIDES:
                raise ValueError(f"side must be one of {SIDES}, got {side!r}")
            if vec.dim != dim:
                raise DimensionMismatch(detail=f"segment {seg} {side}: {vec.dim} != dim {dim}")
        self.dim = dim
        self.model_tag = model_tag
        self._entries = dict(entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key) -> bool:
        return key in self._entries

    def get(self, segment_id: int, side: str) -> EmbeddingVector:
        try:
            return self._entries[(segment_id, side)]
        except KeyError:
            raise MissingEmbedding(segment_id, side) from None

    def items(self):
        return self._entries.items()


def load_embeddings(path: str) -> EmbeddingStore:
    """Read an embedding exchange file into a store."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if len(lines) < 2 or not lines[0].startswith("#dim=") or not lines[1].startswith("#model="):
        raise BadHeader(f"{path}: expected '#dim=<d>' and '#model=<tag>' header lines")
    try:
        dim = int(lines[0][len("#dim="):])
    except ValueError:
        raise BadHeader(f"{path}: cannot parse dimension {lines[0]!r}") from None
    if dim < 1:
        raise BadHeader(f"{path}: dimension must be positive")
    model_tag = lines[1][len("#model="):]

    entries = {}
    for line_no, line in enumerate(lines[2:], start=3):
        parts = line.split("\t")
        if len(parts) != 3:
            raise MalformedVector(line_no, f"expected 3 tab-separated fields, got {len(parts)}")
        seg_text, side, floats = parts
        try:
            seg = int(seg_text)
        except ValueError:
            raise MalformedVector(line_no, f"cannot parse segment id {seg_text!r}") from None
        if side not in SIDES:
            raise MalformedVector(line_no, f"side must be 'source' or 'target', got {side!r}")
        try:
            vec = np.array([float(tok) for tok in floats.split()], dtype=np.float64)
        except ValueError:
            raise MalformedVector(line_no, "cannot parse vector components") from None
        if vec.size != dim:
            raise DimensionMismatch(line_no, f"{vec.size} components, header says {dim}")
        if not np.all(np.isfinite(vec)):
            raise MalformedVector(line_no, "vector contains non-finite values")
        if (seg, side) in entries:
            raise DuplicateKey(seg, side)
        entries[(seg, side)] = EmbeddingVector(vec)
    return EmbeddingStore(dim, model_tag, entries)


def write_embeddings(store: EmbeddingStore, path: str) -> None:
    """Serialize a store back to the exchange format (shortest round-trip floats)."""
    keys = sorted(store.items(), key=lambda kv: (kv[0][0], SIDES.index(kv[0][1])))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"#dim={store.dim}\n")
        fh.write(f"#model={store.model_tag}\n")
        for (seg, side), vec in keys:
            fh.write(f"{seg}\t{side}\t" + " ".join(repr(float(v)) for v in vec.values) + "\n")


def ensure_consistent_tags(stores: Iterable[EmbeddingStore]) -> str:
    """Similarities are only comparable within one embedding model."""
    tags = [s.model_tag for s in stores]
    if len(set(tags)) > 1:
        raise ModelTagMismatch(tags)
    return tags[0] if tags else ""


def cosine(u, v) -> float:
    """Cosine similarity <u,v> / (|u||v|) in [-1, 1].

    Sums use numpy's pairwise accumulation so the result stays within 1e-12
    of the exact value even for few-hundred-dimensional vectors; the output
    is clamped only against floating-point overshoot of that size.
    """
    a = u.values if isinstance(u, EmbeddingVector) else np.asarray(u, dtype=np.float64)
    b = v.values if isinstance(v, EmbeddingVector) else np.asarray(v, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(detail=f"{a.shape[0]} vs {b.shape[0]}")
    nu = math.sqrt(float(np.sum(a * a)))
    nv = math.sqrt(float(np.sum(b * b)))
    if nu == 0.0 or nv == 0.0:
        raise ZeroVector("cosine is undefined for zero-norm vectors")
    value = float(np.sum(a * b)) / (nu * nv)
    if value > 1.0:
        if value - 1.0 > 1e-12:
            raise ValueError(f"cosine overshoot {value - 1.0} exceeds tolerance")
        value = 1.0
    elif value < -1.0:
        if -1.0 - value > 1e-12:
            raise ValueError(f"cosine overshoot {-1.0 - value} exceeds tolerance")
        value = -1.0
    return value


def annotate_similarity(records: Sequence, store: EmbeddingStore) -> list:
    """Fill each record's similarity with cosine(source, target) embeddings.

    Returns new records; every field other than ``similarity`` is unchanged.
    Raises MissingEmbedding if either side of a segment is absent.
    """
    out = []
    for rec in records:
        u = store.get(rec.segment_id, "source")
        v = store.get(rec.segment_id, "target")
        out.append(with_similarity(rec, cosine(u, v)))
    return out
