"""Parsing and validation for MLQE-PE-style and PreQuEL-style TSV datasets.

Both dataset families are tab-separated files with a header row.  List-valued
cells (per-annotator score lists) are serialized as ``[v1, v2, ...]``.  Column
header spellings vary between releases, so every parser accepts a column-name
map; the defaults match the published field names.

Malformed rows abort the parse instead of being skipped: silently dropping
rows changes the sample size that later enters model comparison.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from typing import Optional, Sequence


class IngestError(Exception):
    """Base class for dataset parsing failures."""


class MissingColumn(IngestError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"required column {name!r} not found in header")


class MalformedRow(IngestError):
    def __init__(self, line_no: int, cause: str):
        self.line_no = line_no
        self.cause = cause
        super().__init__(f"line {line_no}: {cause}")


class EmptyFile(IngestError):
    def __init__(self, path: str):
        self.path = path
        super().__init__(f"{path}: no data rows")


class TooManyLevels(IngestError):
    def __init__(self, column: str, levels: Sequence[str]):
        self.column = column
        self.levels = list(levels)
        super().__init__(
            f"column {column!r} has {len(self.levels)} distinct levels, at most 4 allowed"
        )


class DegenerateInput(IngestError):
    """Raised when a statistic is undefined (constant input or too few values)."""


_LANG_CODE = re.compile(r"^[a-z]+$")


@dataclass(frozen=True)
class LangPair:
    """A source/target language pair, rendered as e.g. ``en-de``."""

    source: str
    target: str

    def __post_init__(self):
        for code in (self.source, self.target):
            if not _LANG_CODE.match(code):
                raise ValueError(f"language code must be lowercase ASCII letters, got {code!r}")

    @classmethod
    def parse(cls, text: str) -> "LangPair":
        src, sep, tgt = text.partition("-")
        if not sep:
            raise ValueError(f"expected 'src-tgt' form, got {text!r}")
        return cls(src, tgt)

    def __str__(self) -> str:
        return f"{self.source}-{self.target}"


@dataclass(frozen=True)
class QERecord:
    """One source/translation pair with human scores and model confidence.

    ``da_scores``/``da_z_scores`` are None when the dataset release does not
    ship per-annotator lists; ``n_annotators`` then degenerates to 1 and
    ``score_sd`` to 0 (see ``sd_degenerate``).
    """

    segment_id: int
    lang_pair: LangPair
    source_text: str
    target_text: str
    da_scores: Optional[list]
    da_mean: float
    da_z_scores: Optional[list]
    da_z_mean: float
    model_score: float
    hter: float
    n_annotators: int
    score_sd: float
    similarity: Optional[float] = None

    def __post_init__(self):
        if self.segment_id < 0:
            raise ValueError("segment_id must be non-negative")
        if self.n_annotators < 1:
            raise ValueError("n_annotators must be positive")
        if self.hter < 0:
            raise ValueError("hter must be >= 0")
        if self.score_sd < 0:
            raise ValueError("score_sd must be >= 0")
        if self.similarity is not None and not -1.0 <= self.similarity <= 1.0:
            raise ValueError("similarity must lie in [-1, 1]")
        if self.da_scores is not None:
            if self.n_annotators != len(self.da_scores):
                raise ValueError("n_annotators must equal len(da_scores)")
            if any(not 0.0 <= s <= 100.0 for s in self.da_scores):
                raise ValueError("DA scores must lie in [0, 100]")
            if abs(self.da_mean - _mean(self.da_scores)) > 1e-6:
                raise ValueError("da_mean disagrees with mean(da_scores)")
            if abs(self.score_sd - sample_sd(self.da_scores)) > 1e-6:
                raise ValueError("score_sd disagrees with sample SD of da_scores")

    @property
    def sd_degenerate(self) -> bool:
        """True when only one annotator scored the segment (score_sd forced to 0)."""
        return self.n_annotators == 1


@dataclass(frozen=True)
class PreQuelRecord:
    """One PreQuEL-style row: n-gram sentence probabilities plus QE fields."""

    segment_id: int
    lang_pair: LangPair
    source_text: str
    target_text: str
    ngram_sent_prob: dict
    lm_score: str
    hter: float
    da_z_mean: float
    similarity: Optional[float] = None

    def __post_init__(self):
        if self.segment_id < 0:
            raise ValueError("segment_id must be non-negative")
        if self.hter < 0:
            raise ValueError("hter must be >= 0")
        if self.similarity is not None and not -1.0 <= self.similarity <= 1.0:
            raise ValueError("similarity must lie in [-1, 1]")
        for n, v in self.ngram_sent_prob.items():
            if n not in (1, 2, 3, 4, 5):
                raise ValueError(f"n-gram order must be in 1..5, got {n}")
            if not math.isfinite(v):
                raise ValueError(f"{n}-gram probability is not finite")


# Field -> header-name maps.  Keys are the toolkit's field names; values are
# the expected column headers.  Entries for optional columns may be absent
# from the file.
DEFAULT_MLQEPE_COLUMNS = {
    "segment_id": "index",
    "original": "original",
    "translation": "translation",
    "scores": "scores",
    "mean": "mean",
    "z_scores": "z_scores",
    "z_mean": "z_mean",
    "model_score": "model_scores",
    "hter": "hter",
    "similarity": "similarity",
}

DEFAULT_PREQUEL_COLUMNS = {
    "segment_id": "index",
    "original": "original",
    "translation": "translation",
    "ngram_1": "sent_prob_1",
    "ngram_2": "sent_prob_2",
    "ngram_3": "sent_prob_3",
    "ngram_4": "sent_prob_4",
    "ngram_5": "sent_prob_5",
    "lm_score": "lm_score",
    "hter": "hter",
    "z_mean": "z_mean",
    "similarity": "similarity",
}

_MLQEPE_REQUIRED = ("original", "translation", "mean", "z_mean", "model_score", "hter")
_MLQEPE_OPTIONAL = ("segment_id", "scores", "z_scores", "similarity")
_PREQUEL_REQUIRED = ("original", "translation", "ngram_1", "ngram_2", "ngram_3",
                     "ngram_4", "ngram_5", "lm_score", "hter", "z_mean")
_PREQUEL_OPTIONAL = ("segment_id", "similarity")


def _mean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values)


def sample_sd(values: Sequence[float]) -> float:
    """Sample standard deviation (n-1 denominator); 0 for a single value."""
    n = len(values)
    if n < 1:
        raise DegenerateInput("sample_sd needs at least one value")
    if n == 1:
        return 0.0
    m = _mean(values)
    ss = math.fsum((v - m) ** 2 for v in values)
    return math.sqrt(ss / (n - 1))


def zstandardize(values: Sequence[float]) -> list:
    """Center to mean 0 and scale to sample SD 1, preserving order."""
    if len(values) < 2:
        raise DegenerateInput("zstandardize needs at least two values")
    m = _mean(values)
    sd = sample_sd(values)
    if sd == 0.0:
        raise DegenerateInput("zstandardize is undefined for constant input")
    return [(v - m) / sd for v in values]


def _read_rows(path: str) -> tuple:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise EmptyFile(path)
    header = lines[0].rstrip("\r").split("\t")
    rows = [(i + 2, lines[i + 1].rstrip("\r").split("\t")) for i in range(len(lines) - 1)]
    if not rows:
        raise EmptyFile(path)
    return header, rows


def _column_indices(header, colmap, required, optional):
    idx = {}
    for f in required:
        name = colmap[f]
        if name not in header:
            raise MissingColumn(name)
        idx[f] = header.index(name)
    for f in optional:
        name = colmap.get(f)
        if name is not None and name in header:
            idx[f] = header.index(name)
    return idx


def _parse_float(cell: str, what: str, line_no: int) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise MalformedRow(line_no, f"{what}: cannot parse {cell!r} as a number") from None
    if not math.isfinite(v):
        raise MalformedRow(line_no, f"{what}: value is not finite")
    return v


def _parse_float_list(cell: str, what: str, line_no: int) -> list:
    text = cell.strip()
    if not (text.startswith("[") and text.endswith("]")):
        raise MalformedRow(line_no, f"{what}: expected a bracketed list, got {cell!r}")
    inner = text[1:-1].strip()
    if not inner:
        raise MalformedRow(line_no, f"{what}: list is empty")
    return [_parse_float(part.strip(), what, line_no) for part in inner.split(",")]


def _cell(fields, idx, line_no):
    if idx >= len(fields):
        raise MalformedRow(line_no, f"row has {len(fields)} fields, column {idx + 1} missing")
    return fields[idx]


def _segment_id(idx, fields, line_no, row_pos, prev_id):
    if "segment_id" in idx:
        cell = _cell(fields, idx["segment_id"], line_no)
        try:
            seg = int(cell)
        except ValueError:
            raise MalformedRow(line_no, f"segment id: cannot parse {cell!r}") from None
        if seg < 0:
            raise MalformedRow(line_no, "segment id must be non-negative")
    else:
        seg = row_pos
    if prev_id is not None and seg <= prev_id:
        raise MalformedRow(line_no, f"segment id {seg} not strictly increasing")
    return seg


def _optional_similarity(idx, fields, line_no):
    if "similarity" not in idx or idx["similarity"] >= len(fields):
        return None
    cell = fields[idx["similarity"]].strip()
    if cell == "":
        return None
    v = _parse_float(cell, "similarity", line_no)
    if not -1.0 <= v <= 1.0:
        raise MalformedRow(line_no, f"similarity {v!r} outside [-1, 1]")
    return v


def parse_mlqepe(path: str, lang_pair: LangPair, colmap: Optional[dict] = None) -> list:
    """Parse an MLQE-PE-style TSV into validated QERecords.

    Derived fields (``n_annotators``, ``score_sd``) are computed from the
    per-annotator score list when present.  Rows violating record invariants
    raise MalformedRow; they are never silently repaired or skipped.
    """
    colmap = dict(DEFAULT_MLQEPE_COLUMNS if colmap is None else colmap)
    header, rows = _read_rows(path)
    idx = _column_indices(header, colmap, _MLQEPE_REQUIRED, _MLQEPE_OPTIONAL)

    records = []
    prev_id = None
    for row_pos, (line_no, fields) in enumerate(rows):
        seg = _segment_id(idx, fields, line_no, row_pos, prev_id)
        prev_id = seg
        mean = _parse_float(_cell(fields, idx["mean"], line_no), "mean", line_no)
        scores = None
        if "scores" in idx:
            scores = _parse_float_list(_cell(fields, idx["scores"], line_no), "scores", line_no)
        z_scores = None
        if "z_scores" in idx:
            z_scores = _parse_float_list(
                _cell(fields, idx["z_scores"], line_no), "z_scores", line_no)
        hter = _parse_float(_cell(fields, idx["hter"], line_no), "hter", line_no)
        if hter < 0:
            raise MalformedRow(line_no, f"hter {hter!r} is negative")
        try:
            rec = QERecord(
                segment_id=seg,
                lang_pair=lang_pair,
                source_text=_cell(fields, idx["original"], line_no),
                target_text=_cell(fields, idx["translation"], line_no),
                da_scores=scores,
                da_mean=mean,
                da_z_scores=z_scores,
                da_z_mean=_parse_float(_cell(fields, idx["z_mean"], line_no), "z_mean", line_no),
                model_score=_parse_float(
                    _cell(fields, idx["model_score"], line_no), "model_score", line_no),
                hter=hter,
                n_annotators=len(scores) if scores is not None else 1,
                score_sd=sample_sd(scores) if scores is not None else 0.0,
                similarity=_optional_similarity(idx, fields, line_no),
            )
        except ValueError as exc:
            raise MalformedRow(line_no, str(exc)) from None
        records.append(rec)
    return records


def parse_prequel(path: str, lang_pair: LangPair, colmap: Optional[dict] = None) -> list:
    """Parse a PreQuEL-style TSV into validated PreQuelRecords.

    The language-model score column is categorical; more than 4 distinct
    levels across the dataset raises TooManyLevels.
    """
    colmap = dict(DEFAULT_PREQUEL_COLUMNS if colmap is None else colmap)
    header, rows = _read_rows(path)
    ngram_fields = [f for f in _PREQUEL_REQUIRED if f.startswith("ngram_")]
    idx = _column_indices(header, colmap, _PREQUEL_REQUIRED, _PREQUEL_OPTIONAL)

    records = []
    levels = []
    prev_id = None
    for row_pos, (line_no, fields) in enumerate(rows):
        seg = _segment_id(idx, fields, line_no, row_pos, prev_id)
        prev_id = seg
        probs = {}
        for f in ngram_fields:
            n = int(f.split("_")[1])
            probs[n] = _parse_float(_cell(fields, idx[f], line_no), f"{n}-gram probability", line_no)
        lm = _cell(fields, idx["lm_score"], line_no).strip()
        if lm == "":
            raise MalformedRow(line_no, "lm_score is empty")
        if lm not in levels:
            levels.append(lm)
            if len(levels) > 4:
                raise TooManyLevels(colmap["lm_score"], levels)
        hter = _parse_float(_cell(fields, idx["hter"], line_no), "hter", line_no)
        if hter < 0:
            raise MalformedRow(line_no, f"hter {hter!r} is negative")
        try:
            rec = PreQuelRecord(
                segment_id=seg,
                lang_pair=lang_pair,
                source_text=_cell(fields, idx["original"], line_no),
                target_text=_cell(fields, idx["translation"], line_no),
                ngram_sent_prob=probs,
                lm_score=lm,
                hter=hter,
                da_z_mean=_parse_float(_cell(fields, idx["z_mean"], line_no), "z_mean", line_no),
                similarity=_optional_similarity(idx, fields, line_no),
            )
        except ValueError as exc:
            raise MalformedRow(line_no, str(exc)) from None
        records.append(rec)
    return records


def _fmt(v: float) -> str:
    return format(v, ".17g")


def _fmt_list(values) -> str:
    return "[" + ", ".join(_fmt(v) for v in values) + "]"


def serialize_mlqepe(records: Sequence[QERecord], colmap: Optional[dict] = None) -> str:
    """Canonical TSV re-serialization (column order of the map, 17-digit floats)."""
    colmap = dict(DEFAULT_MLQEPE_COLUMNS if colmap is None else colmap)
    fields = [f for f in colmap
              if f in _MLQEPE_REQUIRED or f == "segment_id"
              or (f == "scores" and all(r.da_scores is not None for r in records))
              or (f == "z_scores" and all(r.da_z_scores is not None for r in records))
              or (f == "similarity" and any(r.similarity is not None for r in records))]
    lines = ["\t".join(colmap[f] for f in fields)]
    for r in records:
        cells = []
        for f in fields:
            if f == "segment_id":
                cells.append(str(r.segment_id))
            elif f == "original":
                cells.append(r.source_text)
            elif f == "translation":
                cells.append(r.target_text)
            elif f == "scores":
                cells.append(_fmt_list(r.da_scores) if r.da_scores is not None else "[]")
            elif f == "z_scores":
                cells.append(_fmt_list(r.da_z_scores) if r.da_z_scores is not None else "[]")
            elif f == "mean":
                cells.append(_fmt(r.da_mean))
            elif f == "z_mean":
                cells.append(_fmt(r.da_z_mean))
            elif f == "model_score":
                cells.append(_fmt(r.model_score))
            elif f == "hter":
                cells.append(_fmt(r.hter))
            elif f == "similarity":
                cells.append("" if r.similarity is None else _fmt(r.similarity))
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"


def serialize_prequel(records: Sequence[PreQuelRecord], colmap: Optional[dict] = None) -> str:
    """Canonical TSV re-serialization for PreQuEL-style records."""
    colmap = dict(DEFAULT_PREQUEL_COLUMNS if colmap is None else colmap)
    orders = sorted(records[0].ngram_sent_prob) if records else [1, 2, 3, 4, 5]
    fields = [f for f in colmap
              if f in ("segment_id", "original", "translation", "lm_score", "hter", "z_mean")
              or (f.startswith("ngram_") and int(f.split("_")[1]) in orders)
              or (f == "similarity" and any(r.similarity is not None for r in records))]
    lines = ["\t".join(colmap[f] for f in fields)]
    for r in records:
        cells = []
        for f in fields:
            if f == "segment_id":
                cells.append(str(r.segment_id))
            elif f == "original":
                cells.append(r.source_text)
            elif f == "translation":
                cells.append(r.target_text)
            elif f.startswith("ngram_"):
                cells.append(_fmt(r.ngram_sent_prob[int(f.split("_")[1])]))
            elif f == "lm_score":
                cells.append(r.lm_score)
            elif f == "hter":
                cells.append(_fmt(r.hter))
            elif f == "z_mean":
                cells.append(_fmt(r.da_z_mean))
            elif f == "similarity":
                cells.append("" if r.similarity is None else _fmt(r.similarity))
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"


def with_similarity(record, value: float):
    """Copy of a record with its similarity field set."""
    return replace(record, similarity=value)
