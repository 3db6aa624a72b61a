"""Analysis configuration: a TOML document mapped onto a validated dataclass.

Example document:

    dataset_kind = "mlqepe"
    response = "da_mean"          # optional, defaults per dataset kind
    out_dir = "out"
    per_pair = false

    [datasets]
    en-de = "data/en-de.tsv"

    [embeddings]
    en-de = "embeddings/en-de.emb"

    [models]
    base = "da_mean ~ s(model_score) + s(similarity) + s(score_sd) + s(hter) + re(n_annotators) + re(lang_pair)"
    m1   = "da_mean ~ s(model_score) + s(score_sd) + s(hter) + re(n_annotators) + re(lang_pair)"
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Tuple

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .dataset_ingest import LangPair
from .model_formula import FormulaError, ModelFormula, parse_formula

MLQEPE = "mlqepe"
PREQUEL = "prequel"

DEFAULT_RESPONSE = {MLQEPE: "da_mean", PREQUEL: "da_z_mean"}
DEFAULT_NGRAM = 3

# Variables each dataset kind can expose in a model frame.  Factors are
# usable only inside re(); numeric columns anywhere.
NUMERIC_VARIABLES = {
    MLQEPE: ("similarity", "model_score", "hter", "da_mean", "da_z_mean",
             "score_sd", "n_annotators"),
    PREQUEL: ("similarity", "hter", "da_z_mean", "ngram",
              "ngram_1", "ngram_2", "ngram_3", "ngram_4", "ngram_5"),
}
FACTOR_VARIABLES = {
    MLQEPE: ("lang_pair", "n_annotators"),
    PREQUEL: ("lang_pair", "lm_score"),
}

_TOP_LEVEL_KEYS = {"dataset_kind", "response", "out_dir", "per_pair", "ngram",
                   "partials_models", "datasets", "embeddings", "models"}


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class AnalysisConfig:
    """Validated analysis settings shared by every command."""

    dataset_kind: str
    datasets: Dict[str, str]
    embeddings: Dict[str, str] = field(default_factory=dict)
    models: Dict[str, ModelFormula] = field(default_factory=dict)
    response: str = ""
    out_dir: str = "out"
    per_pair: bool = False
    ngram: int = DEFAULT_NGRAM
    partials_models: Tuple[str, ...] = ("base",)

    def require_models(self, minimum: int = 1) -> None:
        if "base" not in self.models:
            raise ConfigError('a model named "base" is required')
        if len(self.models) < minimum:
            raise ConfigError(f"at least {minimum} named models are required")

    def require_embeddings(self) -> None:
        missing = [p for p in self.datasets if p not in self.embeddings]
        if missing:
            raise ConfigError(
                f"no embedding store configured for pairs: {', '.join(missing)}")


def _expect(value, typ, what):
    if not isinstance(value, typ) or isinstance(value, bool) and typ is not bool:
        raise ConfigError(f"{what} must be of type {typ.__name__}")
    return value


def _path_table(doc: dict, key: str, required: bool) -> Dict[str, str]:
    table = doc.get(key)
    if table is None:
        if required:
            raise ConfigError(f"missing required table [{key}]")
        return {}
    _expect(table, dict, f"[{key}]")
    if required and not table:
        raise ConfigError(f"[{key}] must not be empty")
    out = {}
    for pair, path in table.items():
        try:
            LangPair.parse(pair)
        except Exception as exc:
            raise ConfigError(f"[{key}]: bad language pair {pair!r}: {exc}") from None
        out[pair] = _expect(path, str, f"[{key}].{pair}")
    return out


def _check_formula_variables(name: str, formula: ModelFormula, kind: str,
                             response: str) -> None:
    numeric = set(NUMERIC_VARIABLES[kind])
    factors = set(FACTOR_VARIABLES[kind])
    if formula.response != response:
        raise ConfigError(
            f"model {name!r}: response {formula.response!r} differs from the "
            f"configured response {response!r}")
    for var, _ in formula.smooth_terms:
        if var not in numeric:
            raise ConfigError(f"model {name!r}: s({var}) is not a numeric "
                              f"variable of {kind} data")
    for var in formula.linear_terms:
        if var not in numeric:
            raise ConfigError(f"model {name!r}: {var} is not a numeric "
                              f"variable of {kind} data")
    for var in formula.random_terms:
        if var not in factors | numeric:
            raise ConfigError(f"model {name!r}: re({var}) is not a variable "
                              f"of {kind} data")


def load_config(path: str) -> AnalysisConfig:
    """Parse and fully validate a TOML configuration file."""
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML: {exc}") from None

    unknown = set(doc) - _TOP_LEVEL_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")

    kind = doc.get("dataset_kind")
    if kind not in (MLQEPE, PREQUEL):
        raise ConfigError(f'dataset_kind must be "{MLQEPE}" or "{PREQUEL}", '
                          f"got {kind!r}")

    response = _expect(doc.get("response", DEFAULT_RESPONSE[kind]), str, "response")
    if response not in NUMERIC_VARIABLES[kind]:
        raise ConfigError(f"response {response!r} is not a numeric variable "
                          f"of {kind} data")

    ngram = doc.get("ngram", DEFAULT_NGRAM)
    if "ngram" in doc and kind != PREQUEL:
        raise ConfigError("ngram applies to prequel data only")
    if not isinstance(ngram, int) or isinstance(ngram, bool) or not 1 <= ngram <= 5:
        raise ConfigError("ngram must be an integer in 1..5")

    datasets = _path_table(doc, "datasets", required=True)
    embeddings = _path_table(doc, "embeddings", required=False)
    extra = set(embeddings) - set(datasets)
    if extra:
        raise ConfigError(
            f"[embeddings] names pairs absent from [datasets]: {', '.join(sorted(extra))}")

    models = {}
    models_table = doc.get("models", {})
    _expect(models_table, dict, "[models]")
    for name, text in models_table.items():
        _expect(text, str, f"[models].{name}")
        try:
            formula = parse_formula(text)
        except FormulaError as exc:
            raise ConfigError(f"model {name!r}: {exc}") from None
        _check_formula_variables(name, formula, kind, response)
        models[name] = formula

    partials = doc.get("partials_models", ["base"] if "base" in models else [])
    if isinstance(partials, str):
        partials = [partials]
    _expect(partials, list, "partials_models")
    for name in partials:
        if name not in models:
            raise ConfigError(f"partials_models names unknown model {name!r}")

    per_pair = doc.get("per_pair", False)
    if not isinstance(per_pair, bool):
        raise ConfigError("per_pair must be a boolean")

    return AnalysisConfig(
        dataset_kind=kind,
        datasets=datasets,
        embeddings=embeddings,
        models=models,
        response=response,
        out_dir=_expect(doc.get("out_dir", "out"), str, "out_dir"),
        per_pair=per_pair,
        ngram=ngram,
        partials_models=tuple(partials),
    )
