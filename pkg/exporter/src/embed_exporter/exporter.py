"""Dataset-to-embedding export.

Reads segment texts from a QE dataset TSV, embeds source and target sides
in batches, and writes the embedding exchange file:

    #dim=<d>
    #model=<tag>
    <segment_id>\t<side>\t<f1> <f2> ...

Rows are ordered by ascending segment id, source before target; floats are
serialized in shortest round-trip decimal.  The file appears atomically:
it is composed to a temporary name and renamed into place.
"""

from __future__ import annotations

import os
import sys
import tempfile
from dataclasses import dataclass
from typing import List, Optional, Tuple

from .backends import DEFAULT_MODEL, resolve_backend

MLQEPE = "mlqepe"
PREQUEL = "prequel"
SIDES = ("source", "target")

_REQUIRED_COLUMNS = ("index", "original", "translation")
# One column unique to each kind, to catch a dataset passed as the wrong kind.
_KIND_MARKERS = {MLQEPE: "scores", PREQUEL: "sent_prob_1"}


class ConfigError(Exception):
    pass


class DatasetError(Exception):
    pass


@dataclass(frozen=True)
class ExporterConfig:
    """Validated settings for one export run."""

    dataset: str
    dataset_kind: str
    out: str
    model: str = DEFAULT_MODEL
    revision: Optional[str] = None
    batch_size: int = 32

    def __post_init__(self):
        if self.dataset_kind not in (MLQEPE, PREQUEL):
            raise ConfigError(
                f'dataset_kind must be "{MLQEPE}" or "{PREQUEL}", '
                f"got {self.dataset_kind!r}")
        if not isinstance(self.batch_size, int) or self.batch_size < 1:
            raise ConfigError("batch_size must be a positive integer")


@dataclass(frozen=True)
class Segment:
    segment_id: int
    side: str
    text: str


@dataclass(frozen=True)
class ExportSummary:
    n_vectors: int
    dim: int
    model_tag: str
    out_path: str


def read_segments(path: str, kind: str) -> List[Segment]:
    """Both text sides of every dataset row, ordered for the exchange file."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().split("\n")
    except OSError as exc:
        raise DatasetError(f"{path}: {exc.strerror}") from None
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise DatasetError(f"{path}: empty file")

    header = lines[0].split("\t")
    missing = [c for c in _REQUIRED_COLUMNS if c not in header]
    if missing:
        raise DatasetError(f"{path}: header lacks columns: {', '.join(missing)}")
    marker = _KIND_MARKERS[kind]
    if marker not in header:
        raise DatasetError(
            f"{path}: no {marker!r} column; file does not look like {kind} data")
    idx = {name: header.index(name) for name in _REQUIRED_COLUMNS}

    rows: List[Tuple[int, str, str]] = []
    seen = set()
    for line_no, line in enumerate(lines[1:], start=2):
        fields = line.split("\t")
        if len(fields) != len(header):
            raise DatasetError(
                f"{path}: line {line_no}: expected {len(header)} fields, "
                f"got {len(fields)}")
        try:
            seg = int(fields[idx["index"]])
        except ValueError:
            raise DatasetError(
                f"{path}: line {line_no}: cannot parse segment id "
                f"{fields[idx['index']]!r}") from None
        if seg in seen:
            raise DatasetError(f"{path}: line {line_no}: duplicate segment id {seg}")
        seen.add(seg)
        rows.append((seg, fields[idx["original"]], fields[idx["translation"]]))
    if not rows:
        raise DatasetError(f"{path}: no data rows")

    rows.sort(key=lambda r: r[0])
    segments = []
    for seg, original, translation in rows:
        segments.append(Segment(seg, "source", original))
        segments.append(Segment(seg, "target", translation))
    return segments


def _compose(segments: List[Segment], vectors, dim: int, tag: str) -> str:
    lines = [f"#dim={dim}", f"#model={tag}"]
    for segment, vec in zip(segments, vectors):
        lines.append(f"{segment.segment_id}\t{segment.side}\t"
                     + " ".join(repr(float(v)) for v in vec))
    return "\n".join(lines) + "\n"


def _write_atomic(path: str, text: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=parent, prefix=".export-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def export_embeddings(cfg: ExporterConfig) -> ExportSummary:
    """Embed every (segment, side) text and write the exchange file."""
    segments = read_segments(cfg.dataset, cfg.dataset_kind)
    backend = resolve_backend(cfg.model, cfg.revision)

    vectors = []
    for start in range(0, len(segments), cfg.batch_size):
        batch = segments[start:start + cfg.batch_size]
        encoded = backend.encode([s.text for s in batch])
        if encoded.shape != (len(batch), backend.dim):
            raise RuntimeError(
                f"backend returned shape {encoded.shape}, expected "
                f"({len(batch)}, {backend.dim})")
        vectors.extend(encoded)
        for segment in batch:
            if backend.exceeds_limit(segment.text):
                print(f"export-embeddings: warning: segment "
                      f"{segment.segment_id} {segment.side}: text exceeds the "
                      f"model's sequence limit and will be truncated",
                      file=sys.stderr)

    _write_atomic(cfg.out, _compose(segments, vectors, backend.dim, backend.tag))
    return ExportSummary(len(segments), backend.dim, backend.tag, cfg.out)
