"""Embedding backends behind one small surface: encode, dim, tag.

Two implementations: a pinned sentence-transformers model for real
analyses, and an offline character-trigram hasher for pipeline work in
environments where model weights cannot be downloaded.  Both are
deterministic: the same text always yields the same vector.
"""

from __future__ import annotations

import hashlib
from typing import List, Optional, Sequence

import numpy as np

DEFAULT_MODEL = "sentence-transformers/paraphrase-multilingual-MiniLM-L12-v2"
HASHED_SCHEME = "hashed-ngram:"

_HASHED_REVISION = "v1"
_MAX_HASHED_DIM = 4096
# Sentinels mark text boundaries so one-character strings still hash.
_TEXT_START = "\x02"
_TEXT_END = "\x03"


class ModelLoadError(Exception):
    pass


class HashedNgramBackend:
    """Signed character-trigram hashing into a fixed-width vector.

    Not a semantic model: it exists so exports stay runnable and exactly
    reproducible without network access.  BLAKE2 keeps bucket assignment
    stable across processes and platforms (never the seeded builtin hash).
    Identical texts map to identical vectors; empty text hashes to zero.
    """

    def __init__(self, model_id: str, revision: Optional[str] = None):
        revision = revision or _HASHED_REVISION
        if revision != _HASHED_REVISION:
            raise ModelLoadError(
                f"unknown {HASHED_SCHEME.rstrip(':')} revision {revision!r}; "
                f"this build implements {_HASHED_REVISION!r}")
        dim_text = model_id[len(HASHED_SCHEME):]
        try:
            dim = int(dim_text)
        except ValueError:
            raise ModelLoadError(
                f"bad hashed model id {model_id!r}: expected "
                f"{HASHED_SCHEME}<dim>") from None
        if not 1 <= dim <= _MAX_HASHED_DIM:
            raise ModelLoadError(f"hashed dimension must be in 1..{_MAX_HASHED_DIM}")
        self.dim = dim
        self.tag = f"{model_id}@{revision}"

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim))
        for row, text in enumerate(texts):
            marked = _TEXT_START + text + _TEXT_END
            for i in range(len(marked) - 2):
                gram = marked[i:i + 3].encode("utf-8")
                digest = hashlib.blake2b(gram, digest_size=9).digest()
                bucket = int.from_bytes(digest[:8], "big") % self.dim
                out[row, bucket] += 1.0 if digest[8] & 1 else -1.0
            norm = float(np.linalg.norm(out[row]))
            if norm > 0.0:
                out[row] /= norm
        return out

    def exceeds_limit(self, text: str) -> bool:
        return False


class SentenceTransformerBackend:
    """A pinned sentence-transformers model; the tag echoes id@revision."""

    def __init__(self, model_id: str, revision: Optional[str] = None):
        revision = revision or "main"
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise ModelLoadError(
                f"sentence-transformers is not installed: {exc}") from None
        try:
            self._model = SentenceTransformer(model_id, revision=revision)
        except Exception as exc:
            raise ModelLoadError(
                f"cannot load model {model_id!r} at revision {revision!r}: {exc}"
            ) from None
        self.dim = int(self._model.get_sentence_embedding_dimension())
        self.tag = f"{model_id}@{revision}"

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        vectors = self._model.encode(
            list(texts), convert_to_numpy=True, show_progress_bar=False)
        return np.asarray(vectors, dtype=np.float64)

    def exceeds_limit(self, text: str) -> bool:
        limit = getattr(self._model, "max_seq_length", None)
        if not limit:
            return False
        tokens = self._model.tokenizer(text, add_special_tokens=True)["input_ids"]
        return len(tokens) > limit


def resolve_backend(model_id: str, revision: Optional[str] = None):
    if model_id.startswith(HASHED_SCHEME):
        return HashedNgramBackend(model_id, revision)
    return SentenceTransformerBackend(model_id, revision)
