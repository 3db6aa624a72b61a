"""Embedding exporter for QE datasets.

Reads source and translation texts from a dataset TSV, embeds both sides
with a pinned sentence-embedding model (or an offline hash featurizer),
and writes the embedding exchange file consumed by qe-gauge.
"""

from .backends import (
    DEFAULT_MODEL,
    HASHED_SCHEME,
    HashedNgramBackend,
    ModelLoadError,
    SentenceTransformerBackend,
    resolve_backend,
)
from .exporter import (
    ConfigError,
    DatasetError,
    ExporterConfig,
    ExportSummary,
    Segment,
    export_embeddings,
    read_segments,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_MODEL",
    "HASHED_SCHEME",
    "HashedNgramBackend",
    "ModelLoadError",
    "SentenceTransformerBackend",
    "resolve_backend",
    "ConfigError",
    "DatasetError",
    "ExporterConfig",
    "ExportSummary",
    "Segment",
    "export_embeddings",
    "read_segments",
    "__version__",
]
