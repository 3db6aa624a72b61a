"""Full additive-model fits: composition, AIC, partial effects, prediction.

A fitted model stores the Gaussian conditional AIC

    aic = n*log(2*pi*rss/n) + n + 2*(edf_total + 1)

with the +1 counting the scale parameter; the constant terms cancel in any
AIC difference between models fitted on the same data.  Smooth-term p-values
come from the Wald statistic b' Vb^+ b on a chi-square with round(edf)
degrees of freedom; this is an approximation and is flagged as such in all
outputs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import chi2

from ..model_formula import ModelFormula
from ..stats_core import MetricFrame
from .basis import RandomEffectBlock, SmoothBasis, build_random_block, build_spline_basis
from .fitting import DesignBlock, fit_penalized, select_lambda

INTERCEPT = "_intercept"
MAX_EXTRAPOLATION = 0.10


class FitError(Exception):
    pass


class VariableNotFound(FitError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"variable {name!r} not found in the data frame")


class TermNotFound(FitError):
    def __init__(self, term: str):
        super().__init__(f"model has no term {term!r}")


class TermNotSmooth(FitError):
    def __init__(self, term: str):
        super().__init__(f"term {term!r} is not a smooth")


class UnseenFactorLevel(FitError):
    def __init__(self, factor: str, level: str):
        self.factor = factor
        self.level = level
        super().__init__(f"factor {factor!r}: level {level!r} was not seen during fitting")


class IncomparableModels(FitError):
    pass


@dataclass
class FittedGam:
    """Immutable result of one additive-model fit."""

    formula: ModelFormula
    beta: np.ndarray
    lambdas: dict
    edf_total: float
    edf_intercept: float
    edf_per_term: dict
    rss: float
    sigma2_hat: float
    aic: float
    Vb: np.ndarray
    n: int
    smooth_bases: dict = field(repr=False, default_factory=dict)
    random_blocks: dict = field(repr=False, default_factory=dict)
    col_slices: dict = field(repr=False, default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def intercept(self) -> float:
        return float(self.beta[0])

    def term_coefficients(self, term: str) -> np.ndarray:
        if term not in self.col_slices:
            raise TermNotFound(term)
        return self.beta[self.col_slices[term]]

    def term_covariance(self, term: str) -> np.ndarray:
        if term not in self.col_slices:
            raise TermNotFound(term)
        sl = self.col_slices[term]
        return self.Vb[sl, sl]


def _factor_labels(frame: MetricFrame, name: str) -> list:
    if frame.has_factor(name):
        return frame.factor(name)
    if frame.has_column(name):
        return [format(v, "g") for v in frame.column(name)]
    raise VariableNotFound(name)


def gaussian_aic(n: int, rss: float, edf_total: float) -> float:
    if rss <= 0.0:
        return -math.inf
    return n * math.log(2.0 * math.pi * rss / n) + n + 2.0 * (edf_total + 1.0)


def fit_gam(frame: MetricFrame, formula: ModelFormula) -> FittedGam:
    """Build the design from the formula, select smoothing by GCV, and fit."""
    if not (frame.has_column(formula.response)):
        raise VariableNotFound(formula.response)
    y = frame.column(formula.response)
    n = frame.n_rows

    blocks = [DesignBlock(INTERCEPT, np.ones((n, 1)))]
    smooth_bases = {}
    random_blocks = {}
    diagnostics = {"collapsed_knots": [], "ridge_jitter": False}
    for var, k in formula.smooth_terms:
        if not frame.has_column(var):
            raise VariableNotFound(var)
        basis = build_spline_basis(frame.column(var), k, var)
        if basis.k != k:
            diagnostics["collapsed_knots"].append(var)
        smooth_bases[var] = basis
        blocks.append(DesignBlock(var, basis.B, basis.penalty_sqrt))
    for var in formula.linear_terms:
        if not frame.has_column(var):
            raise VariableNotFound(var)
        blocks.append(DesignBlock(var, frame.column(var).reshape(-1, 1)))
    for var in formula.random_terms:
        block = build_random_block(_factor_labels(frame, var), var)
        random_blocks[var] = block
        blocks.append(DesignBlock(var, block.Z, block.penalty_sqrt))

    p_total = sum(b.X.shape[1] for b in blocks)
    if n <= p_total:
        raise FitError(
            f"{n} rows cannot identify {p_total} coefficients; "
            f"reduce basis sizes or supply more data")

    selection = select_lambda(y, blocks)
    fit = fit_penalized(y, blocks, selection.lambdas)
    diagnostics["gcv_converged"] = selection.converged
    diagnostics["gcv_sweeps"] = selection.sweeps
    diagnostics["lambda_at_boundary"] = selection.at_boundary
    diagnostics["ridge_jitter"] = fit.ridge_jitter > 0.0

    sigma2 = fit.rss / (n - fit.edf_total)
    aic = gaussian_aic(n, fit.rss, fit.edf_total)
    Vb = sigma2 * fit.covariance_unscaled()
    lambdas = {}
    li = iter(selection.lambdas)
    for b in blocks:
        if b.penalized:
            lambdas[b.name] = float(next(li))
    edf_terms = {name: e for name, e in fit.edf_per_block.items() if name != INTERCEPT}
    return FittedGam(
        formula=formula,
        beta=fit.beta,
        lambdas=lambdas,
        edf_total=fit.edf_total,
        edf_intercept=fit.edf_per_block[INTERCEPT],
        edf_per_term=edf_terms,
        rss=fit.rss,
        sigma2_hat=sigma2,
        aic=aic,
        Vb=Vb,
        n=n,
        smooth_bases=smooth_bases,
        random_blocks=random_blocks,
        col_slices=fit.col_slices,
        diagnostics=diagnostics,
    )


def _term_set(f: ModelFormula) -> set:
    return ({("s", var, k) for var, k in f.smooth_terms}
            | {("re", var) for var in f.random_terms}
            | {("lin", var) for var in f.linear_terms})


def delta_aic(reduced: FittedGam, full: FittedGam) -> float:
    """AIC(reduced) - AIC(full); positive when removing the terms hurt the fit."""
    if reduced.formula.response != full.formula.response:
        raise IncomparableModels("models have different responses")
    if reduced.n != full.n:
        raise IncomparableModels(f"models fitted on different n: {reduced.n} vs {full.n}")
    if not _term_set(reduced.formula) <= _term_set(full.formula):
        raise IncomparableModels("reduced model is not nested in the full model")
    return reduced.aic - full.aic


@dataclass
class PartialEffect:
    """One smooth term's centered contribution over its covariate range."""

    term: str
    grid_x: np.ndarray
    effect: np.ndarray
    se: np.ndarray
    p_value: float
    edf: float

    @property
    def significant(self) -> bool:
        return self.p_value <= 0.05


def wald_p_value(beta_term: np.ndarray, cov_term: np.ndarray, edf: float) -> float:
    """Approximate chi-square p-value for a penalized term being zero."""
    T = float(beta_term @ np.linalg.pinv(cov_term) @ beta_term)
    df = max(1, round(edf))
    return float(chi2.sf(T, df))


def partial_effect(fit: FittedGam, term: str, grid_size: int = 200) -> PartialEffect:
    """Evaluate a smooth term and its standard-error band on a covariate grid."""
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    if term not in fit.col_slices:
        raise TermNotFound(term)
    if term not in fit.smooth_bases:
        raise TermNotSmooth(term)
    basis = fit.smooth_bases[term]
    grid = np.linspace(basis.x_min, basis.x_max, grid_size)
    Bg = basis.evaluate(grid)
    beta_t = fit.term_coefficients(term)
    Vt = fit.term_covariance(term)
    effect = Bg @ beta_t
    se = np.sqrt(np.clip(np.sum((Bg @ Vt) * Bg, axis=1), 0.0, None))
    return PartialEffect(
        term=term,
        grid_x=grid,
        effect=effect,
        se=se,
        p_value=wald_p_value(beta_t, Vt, fit.edf_per_term[term]),
        edf=fit.edf_per_term[term],
    )


def predict(fit: FittedGam, frame: MetricFrame) -> np.ndarray:
    """Model prediction on new data.

    Smooth covariates may overshoot the training range by at most 10% of the
    range (linear basis extrapolation); unseen random-effect levels raise.
    """
    n = frame.n_rows
    yhat = np.full(n, fit.intercept)
    for var, _ in fit.formula.smooth_terms:
        if not frame.has_column(var):
            raise VariableNotFound(var)
        B = fit.smooth_bases[var].evaluate(frame.column(var), MAX_EXTRAPOLATION)
        yhat += B @ fit.term_coefficients(var)
    for var in fit.formula.linear_terms:
        if not frame.has_column(var):
            raise VariableNotFound(var)
        yhat += frame.column(var) * fit.term_coefficients(var)[0]
    for var in fit.formula.random_terms:
        labels = _factor_labels(frame, var)
        block = fit.random_blocks[var]
        try:
            Z = block.rows_for(labels)
        except KeyError as exc:
            raise UnseenFactorLevel(var, exc.args[0]) from None
        yhat += Z @ fit.term_coefficients(var)
    return yhat


def fitted_gam_to_json(fit: FittedGam) -> str:
    """Deterministic JSON document for a fit (no wall-clock content)."""
    from ..model_formula import render_formula

    doc = {
        "formula": render_formula(fit.formula),
        "n": fit.n,
        "aic": fit.aic,
        "rss": fit.rss,
        "sigma2_hat": fit.sigma2_hat,
        "edf_total": fit.edf_total,
        "edf_intercept": fit.edf_intercept,
        "edf_per_term": fit.edf_per_term,
        "lambda": fit.lambdas,
        "beta": [float(b) for b in fit.beta],
        "p_value_method": "wald-approximate",
        "diagnostics": fit.diagnostics,
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def partial_effect_to_csv(pe: PartialEffect) -> str:
    """CSV export with the +-2 SE band, stamped with edf and the p-value."""
    lines = [
        f"# term={pe.term} edf={format(pe.edf, '.17g')} "
        f"p_value={format(pe.p_value, '.17g')} (approximate) "
        f"significant={'yes' if pe.significant else 'no'}",
        "term,x,effect,se,lo2se,hi2se",
    ]
    for x, e, s in zip(pe.grid_x, pe.effect, pe.se):
        lines.append(",".join([
            pe.term, format(x, ".17g"), format(e, ".17g"), format(s, ".17g"),
            format(e - 2.0 * s, ".17g"), format(e + 2.0 * s, ".17g"),
        ]))
    return "\n".join(lines) + "\n"
