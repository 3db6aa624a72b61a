"""Command-line orchestration.

    qe-gauge similarity|correlate|fit|partials --config <path>
             [--out <dir>] [--per-pair] [--seed <u64>]

Exit codes: 0 success, 1 configuration error, 2 data error, 3 fitting error.
Every failure prints a single line `qe-gauge: <category>-error: <message>`
to stderr.  Outputs are deterministic: identical config and inputs produce
byte-identical files.  `--seed` is reserved for resampling extensions and is
only recorded in the `run_meta.json` sidecar.  `QE_GAUGE_THREADS` caps the
worker pool used for model fits; files are written by the main thread only.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

from .config import (
    MLQEPE,
    PREQUEL,
    AnalysisConfig,
    ConfigError,
    load_config,
)
from .dataset_ingest import (
    IngestError,
    LangPair,
    parse_mlqepe,
    parse_prequel,
    serialize_mlqepe,
    serialize_prequel,
)
from .embedding_similarity import (
    EmbeddingError,
    annotate_similarity,
    ensure_consistent_tags,
    load_embeddings,
)
from .gam_engine import (
    BasisError,
    FitError,
    FittedGam,
    SingularSystem,
    delta_aic,
    fit_gam,
    fitted_gam_to_json,
    partial_effect,
    partial_effect_to_csv,
)
from .model_formula import ModelFormula
from .stats_core import MetricFrame, StatsError, correlation_matrix, listwise_frame, matrix_to_long_csv, matrix_to_tsv
from .svg import line_plot_svg

POOLED = "pooled"

CORRELATION_COLUMNS = {
    MLQEPE: ("similarity", "model_score", "hter", "da_mean", "da_z_mean", "score_sd"),
    PREQUEL: ("similarity", "ngram_1", "ngram_2", "ngram_3", "ngram_4", "ngram_5",
              "hter", "da_z_mean"),
}


def _warn(message: str) -> None:
    print(f"qe-gauge: warning: {message}", file=sys.stderr)


def _max_workers(n_jobs: int) -> int:
    env = os.environ.get("QE_GAUGE_THREADS")
    if env is None:
        cap = os.cpu_count() or 1
    else:
        try:
            cap = int(env)
        except ValueError:
            cap = 0
        if cap < 1:
            raise ConfigError("QE_GAUGE_THREADS must be a positive integer")
    return max(1, min(cap, n_jobs))


# ---------------------------------------------------------------------------
# Data loading and frame construction


def _parse_dataset(cfg: AnalysisConfig, pair: str) -> list:
    path = cfg.datasets[pair]
    parser = parse_mlqepe if cfg.dataset_kind == MLQEPE else parse_prequel
    try:
        return parser(path, LangPair.parse(pair))
    except IngestError as exc:
        raise IngestError(f"{path}: {exc}") from None
    except OSError as exc:
        raise IngestError(f"{path}: {exc.strerror}") from None


def _load_store(cfg: AnalysisConfig, pair: str):
    path = cfg.embeddings[pair]
    try:
        return load_embeddings(path)
    except EmbeddingError as exc:
        raise EmbeddingError(f"{path}: {exc}") from None
    except OSError as exc:
        raise EmbeddingError(f"{path}: {exc.strerror}") from None


def _annotated_records(cfg: AnalysisConfig, pair: str) -> list:
    """Dataset rows with a similarity value, computed from embeddings if absent."""
    records = _parse_dataset(cfg, pair)
    if all(r.similarity is not None for r in records):
        return records
    if pair not in cfg.embeddings:
        raise EmbeddingError(
            f"{cfg.datasets[pair]}: rows lack a similarity value and no "
            f"embedding store is configured for pair {pair}")
    store = _load_store(cfg, pair)
    try:
        return annotate_similarity(records, store)
    except EmbeddingError as exc:
        raise EmbeddingError(f"{cfg.datasets[pair]}: {exc}") from None


def build_frame(cfg: AnalysisConfig, records: Sequence) -> Tuple[MetricFrame, int]:
    """Numeric frame for one dataset kind; incomplete rows are dropped listwise."""
    if cfg.dataset_kind == MLQEPE:
        columns = [
            ("da_mean", [r.da_mean for r in records]),
            ("da_z_mean", [r.da_z_mean for r in records]),
            ("model_score", [r.model_score for r in records]),
            ("hter", [r.hter for r in records]),
            ("score_sd", [r.score_sd for r in records]),
            ("n_annotators", [float(r.n_annotators) for r in records]),
            ("similarity", [r.similarity for r in records]),
        ]
        factors = [("lang_pair", [str(r.lang_pair) for r in records])]
    else:
        columns = [
            ("da_z_mean", [r.da_z_mean for r in records]),
            ("hter", [r.hter for r in records]),
            ("similarity", [r.similarity for r in records]),
            ("ngram", [r.ngram_sent_prob[cfg.ngram] for r in records]),
        ]
        for i in range(1, 6):
            columns.append((f"ngram_{i}", [r.ngram_sent_prob[i] for r in records]))
        factors = [
            ("lang_pair", [str(r.lang_pair) for r in records]),
            ("lm_score", [r.lm_score for r in records]),
        ]
    return listwise_frame(columns, factors)


def _frame_or_warn(cfg: AnalysisConfig, records: Sequence, scope: str) -> MetricFrame:
    frame, dropped = build_frame(cfg, records)
    if dropped:
        _warn(f"{scope}: dropped {dropped} incomplete rows")
    return frame


def _factor_values(frame: MetricFrame, var: str) -> list:
    if frame.has_factor(var):
        return frame.factor(var)
    return [format(v, "g") for v in frame.column(var)]


def _drop_constant_random_terms(formula: ModelFormula, frame: MetricFrame,
                                scope: str) -> ModelFormula:
    """Within one language pair some grouping factors collapse to one level."""
    kept = []
    for var in formula.random_terms:
        if len(set(_factor_values(frame, var))) > 1:
            kept.append(var)
        else:
            _warn(f"{scope}: dropping re({var}): constant within this subset")
    if len(kept) == len(formula.random_terms):
        return formula
    return dataclasses.replace(formula, random_terms=tuple(kept))


# ---------------------------------------------------------------------------
# Output plumbing (single writer)


def _write_outputs(out_dir: str, outputs: Sequence[Tuple[str, str]]) -> None:
    for rel, text in outputs:
        path = os.path.join(out_dir, rel)
        parent = os.path.dirname(path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _run_meta(command: str, config_path: str, cfg: AnalysisConfig, seed: int) -> str:
    doc = {
        "command": command,
        "config": config_path,
        "dataset_kind": cfg.dataset_kind,
        "per_pair": cfg.per_pair,
        "seed": seed,
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# Commands


def cmd_similarity(cfg: AnalysisConfig, config_path: str, seed: int) -> int:
    """Annotate every configured dataset with embedding cosine similarity."""
    cfg.require_embeddings()
    serialize = serialize_mlqepe if cfg.dataset_kind == MLQEPE else serialize_prequel
    loaded = []
    for pair in cfg.datasets:
        loaded.append((pair, _parse_dataset(cfg, pair), _load_store(cfg, pair)))
    ensure_consistent_tags(store for _, _, store in loaded)

    outputs = []
    for pair, records, store in loaded:
        try:
            annotated = annotate_similarity(records, store)
        except EmbeddingError as exc:
            raise EmbeddingError(f"{cfg.datasets[pair]}: {exc}") from None
        sims = [r.similarity for r in annotated]
        print(f"{pair}: {len(sims)} rows, similarity "
              f"min={min(sims):.4f} mean={math.fsum(sims) / len(sims):.4f} "
              f"max={max(sims):.4f}")
        outputs.append((os.path.join("similarity", f"{pair}.tsv"), serialize(annotated)))
    outputs.append(("run_meta.json", _run_meta("similarity", config_path, cfg, seed)))
    _write_outputs(cfg.out_dir, outputs)
    return 0


def cmd_correlate(cfg: AnalysisConfig, config_path: str, seed: int) -> int:
    """Pearson correlation matrices, pooled and optionally per language pair."""
    per_pair_records = {pair: _annotated_records(cfg, pair) for pair in cfg.datasets}
    names = CORRELATION_COLUMNS[cfg.dataset_kind]

    outputs = []

    def report(records: list, scope: str) -> None:
        frame = _frame_or_warn(cfg, records, scope)
        sub = MetricFrame([(name, frame.column(name)) for name in names])
        try:
            cm = correlation_matrix(sub)
        except StatsError as exc:
            raise StatsError(f"{scope}: {exc}") from None
        outputs.append((os.path.join("correlations", f"{scope}.matrix.tsv"),
                        matrix_to_tsv(cm)))
        outputs.append((os.path.join("correlations", f"{scope}.long.csv"),
                        matrix_to_long_csv(cm, sub.n_rows)))
        print(f"{scope}: correlation matrix over {len(names)} variables, n={sub.n_rows}")

    report([r for pair in cfg.datasets for r in per_pair_records[pair]], POOLED)
    if cfg.per_pair:
        for pair in cfg.datasets:
            report(per_pair_records[pair], pair)
    outputs.append(("run_meta.json", _run_meta("correlate", config_path, cfg, seed)))
    _write_outputs(cfg.out_dir, outputs)
    return 0


def _fit_scope(cfg: AnalysisConfig, frame: MetricFrame, scope: str,
               model_names: Sequence[str]) -> Dict[str, FittedGam]:
    """Fit the named models on one frame, worker pool across models."""
    formulas = {}
    for name in model_names:
        formula = cfg.models[name]
        if scope != POOLED:
            formula = _drop_constant_random_terms(formula, frame, f"{scope}/{name}")
        formulas[name] = formula

    def job(name: str) -> FittedGam:
        try:
            return fit_gam(frame, formulas[name])
        except (FitError, BasisError, SingularSystem) as exc:
            raise FitError(f"{scope}: model {name!r}: {exc}") from None

    with ThreadPoolExecutor(max_workers=_max_workers(len(model_names))) as pool:
        futures = {name: pool.submit(job, name) for name in model_names}
        return {name: futures[name].result() for name in model_names}


def _aic_table(fits: Dict[str, FittedGam]) -> str:
    base = fits["base"]
    lines = ["model\taic\tdelta_aic_vs_base\tn"]
    for name, fit in fits.items():
        lines.append("\t".join([
            name,
            format(fit.aic, ".17g"),
            format(delta_aic(fit, base) if name != "base" else 0.0, ".17g"),
            str(fit.n),
        ]))
    return "\n".join(lines) + "\n"


def _pooled_and_pair_frames(cfg: AnalysisConfig) -> Dict[str, MetricFrame]:
    per_pair_records = {pair: _annotated_records(cfg, pair) for pair in cfg.datasets}
    frames = {POOLED: _frame_or_warn(
        cfg, [r for pair in cfg.datasets for r in per_pair_records[pair]], POOLED)}
    if cfg.per_pair:
        for pair in cfg.datasets:
            frames[pair] = _frame_or_warn(cfg, per_pair_records[pair], pair)
    return frames


def cmd_fit_compare(cfg: AnalysisConfig, config_path: str, seed: int) -> int:
    """Fit every named model and tabulate AIC differences against `base`."""
    cfg.require_models(2)
    frames = _pooled_and_pair_frames(cfg)
    names = list(cfg.models)

    outputs = []
    for scope, frame in frames.items():
        fits = _fit_scope(cfg, frame, scope, names)
        prefix = "fits" if scope == POOLED else os.path.join("fits", scope)
        for name, fit in fits.items():
            outputs.append((os.path.join(prefix, f"{name}.json"), fitted_gam_to_json(fit)))
        table = _aic_table(fits)
        outputs.append((os.path.join(prefix, "aic_table.tsv"), table))
        print(f"[{scope}]")
        print(table, end="")
    outputs.append(("run_meta.json", _run_meta("fit", config_path, cfg, seed)))
    _write_outputs(cfg.out_dir, outputs)
    return 0


def cmd_partials(cfg: AnalysisConfig, config_path: str, seed: int) -> int:
    """Export each smooth term's partial effect as CSV and SVG."""
    cfg.require_models(1)
    names = list(cfg.partials_models)
    frames = _pooled_and_pair_frames(cfg)

    outputs = []
    for scope, frame in frames.items():
        fits = _fit_scope(cfg, frame, scope, names)
        prefix = "partials" if scope == POOLED else os.path.join("partials", scope)
        for name, fit in fits.items():
            for var, _ in fit.formula.smooth_terms:
                pe = partial_effect(fit, var)
                marker = "significant" if pe.significant else "not significant"
                title = (f"{name}: s({var}) edf={pe.edf:.2f} "
                         f"p={pe.p_value:.3g} ({marker})")
                svg = line_plot_svg(
                    pe.grid_x, pe.effect,
                    band=(pe.effect - 2.0 * pe.se, pe.effect + 2.0 * pe.se),
                    title=title, x_label=var, y_label=f"s({var})")
                outputs.append((os.path.join(prefix, f"{name}.{var}.csv"),
                                partial_effect_to_csv(pe)))
                outputs.append((os.path.join(prefix, f"{name}.{var}.svg"), svg))
                print(f"{scope}: {name}.{var}: edf={pe.edf:.2f} "
                      f"p={pe.p_value:.3g} ({marker})")
    outputs.append(("run_meta.json", _run_meta("partials", config_path, cfg, seed)))
    _write_outputs(cfg.out_dir, outputs)
    return 0


COMMANDS = {
    "similarity": cmd_similarity,
    "correlate": cmd_correlate,
    "fit": cmd_fit_compare,
    "partials": cmd_partials,
}


# ---------------------------------------------------------------------------
# Entry point


class _ArgumentParser(argparse.ArgumentParser):
    """Route usage errors through the config-error exit path (code 1)."""

    def error(self, message):
        raise ConfigError(message)


def _build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        prog="qe-gauge",
        description="Quality-estimation metric analysis pipeline.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    helps = {
        "similarity": "annotate datasets with embedding cosine similarity",
        "correlate": "write Pearson correlation reports",
        "fit": "fit all configured models and tabulate delta AIC vs base",
        "partials": "export partial-effect curves per smooth term",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", required=True, metavar="PATH",
                       help="TOML analysis configuration")
        p.add_argument("--out", metavar="DIR",
                       help="output directory (overrides config out_dir)")
        p.add_argument("--per-pair", action="store_true",
                       help="also run the analysis per language pair")
        p.add_argument("--seed", type=int, default=0, metavar="U64",
                       help="recorded in run_meta.json; reserved for resampling")
    return parser


def _fail(category: str, exc: BaseException, code: int) -> int:
    print(f"qe-gauge: {category}-error: {exc}", file=sys.stderr)
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        if not 0 <= args.seed < 2 ** 64:
            raise ConfigError("--seed must fit in an unsigned 64-bit integer")
        cfg = load_config(args.config)
        if args.out is not None:
            cfg = dataclasses.replace(cfg, out_dir=args.out)
        if args.per_pair:
            cfg = dataclasses.replace(cfg, per_pair=True)
        return COMMANDS[args.command](cfg, args.config, args.seed)
    except ConfigError as exc:
        return _fail("config", exc, 1)
    except (IngestError, EmbeddingError, StatsError) as exc:
        return _fail("data", exc, 2)
    except OSError as exc:
        return _fail("data", exc, 2)
    except (FitError, BasisError, SingularSystem) as exc:
        return _fail("fit", exc, 3)


if __name__ == "__main__":
    sys.exit(main())
