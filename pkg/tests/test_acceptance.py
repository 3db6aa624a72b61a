"""Release gate: every core guarantee at its stated tolerance.

Each test prints one `ACCEPTANCE <name>: PASS|FAIL` line (visible with
`pytest -s` or `-rP`).  The final paper-level comparison needs the real
datasets and embedding files and is skipped unless QE_GAUGE_MLQEPE_CONFIG
points at a full analysis configuration.
"""

import functools
import json
import math
import os
import time

import numpy as np
import pytest

from conftest import augmented_lstsq_oracle, tree_bytes, write_analysis_tree
from qe_gauge.cli import build_frame, main
from qe_gauge.config import load_config
from qe_gauge.dataset_ingest import LangPair, parse_mlqepe
from qe_gauge.embedding_similarity import (
    EmbeddingStore,
    EmbeddingVector,
    annotate_similarity,
    cosine,
    load_embeddings,
)
from qe_gauge.gam_engine import delta_aic, fit_gam, partial_effect
from qe_gauge.gam_engine.basis import build_random_block, build_spline_basis
from qe_gauge.gam_engine.fitting import (
    DesignBlock,
    fit_penalized,
    gcv_score,
    select_lambda,
)
from qe_gauge.model_formula import parse_formula
from qe_gauge.stats_core import MetricFrame, correlation_matrix, pearson


def criterion(name):
    """Print a one-line verdict for the named acceptance criterion."""
    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                result = fn(*args, **kwargs)
            except BaseException as exc:
                verdict = "SKIP" if isinstance(exc, pytest.skip.Exception) else "FAIL"
                print(f"ACCEPTANCE {name}: {verdict}", flush=True)
                raise
            print(f"ACCEPTANCE {name}: PASS", flush=True)
            return result
        return wrapper
    return deco


def rel_err(got, want):
    got, want = np.asarray(got, dtype=float), np.asarray(want, dtype=float)
    return float(np.linalg.norm(got - want) / max(1.0, np.linalg.norm(want)))


def random_instance(seed):
    """One small penalized-LS problem: intercept plus up to two more blocks."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(25, 51))
    blocks = [DesignBlock("intercept", np.ones((n, 1)))]
    lambdas = []
    extra = int(rng.integers(1, 3))
    for j in range(extra):
        if rng.random() < 0.5:
            x = rng.uniform(0, 1, n)
            basis = build_spline_basis(x, int(rng.integers(5, 8)), f"x{j}")
            blocks.append(DesignBlock(f"x{j}", basis.B, basis.penalty_sqrt))
        else:
            levels = int(rng.integers(3, 6))
            labels = [f"g{rng.integers(0, levels)}" for _ in range(n)]
            rb = build_random_block(labels, f"g{j}")
            blocks.append(DesignBlock(f"g{j}", rb.Z, rb.penalty_sqrt))
        lambdas.append(float(10.0 ** rng.uniform(-4, 4)))
    y = rng.normal(0, 1, n)
    return y, blocks, lambdas


@criterion("oracle equivalence, penalized fit (1e-8 rel, < 5 s)")
def test_penalized_fit_matches_augmented_oracle():
    start = time.perf_counter()
    for seed in range(25):
        y, blocks, lambdas = random_instance(seed)
        fit = fit_penalized(y, blocks, lambdas)
        beta_ref, rss_ref = augmented_lstsq_oracle(y, blocks, lambdas)
        assert rel_err(fit.beta, beta_ref) <= 1e-8, f"beta mismatch at seed {seed}"
        assert abs(fit.rss - rss_ref) <= 1e-8 * max(1.0, rss_ref), f"rss at seed {seed}"
    assert time.perf_counter() - start < 5.0


@criterion("smoothing-limit behavior (1e-4 / 1e-6 rel, < 1 s)")
def test_smoothing_limits():
    start = time.perf_counter()
    rng = np.random.default_rng(3)
    n = 120
    # Uniform grid: quantile knots are then equispaced, so the penalty's
    # null space is exactly the straight line the heavy limit must reach.
    x = np.linspace(0, 1, n)
    y = 1.0 + 2.0 * x + np.sin(2 * np.pi * x) + rng.normal(0, 0.1, n)
    basis = build_spline_basis(x, 10, "x")
    blocks = [DesignBlock("intercept", np.ones((n, 1))),
              DesignBlock("x", basis.B, basis.penalty_sqrt)]
    X = np.hstack([b.X for b in blocks])

    # Infinite smoothing: the second-difference penalty leaves a straight line.
    heavy = fit_penalized(y, blocks, [1e8])
    line = np.polyval(np.polyfit(x, y, 1), x)
    assert rel_err(X @ heavy.beta, line) <= 1e-4

    # Vanishing smoothing: plain least squares on the full basis.
    light = fit_penalized(y, blocks, [1e-12])
    beta_ls = np.linalg.lstsq(X, y, rcond=None)[0]
    assert rel_err(X @ light.beta, X @ beta_ls) <= 1e-6
    assert time.perf_counter() - start < 1.0


@criterion("GCV selection vs 141-point grid (one step, RMSE <= 0.06, < 10 s)")
def test_gcv_selection_against_grid_oracle():
    start = time.perf_counter()
    rng = np.random.default_rng(42)
    n = 200
    x = rng.uniform(0, 1, n)
    y = np.sin(2 * np.pi * x) + rng.normal(0, 0.1, n)
    basis = build_spline_basis(x, 10, "x")
    blocks = [DesignBlock("intercept", np.ones((n, 1))),
              DesignBlock("x", basis.B, basis.penalty_sqrt)]

    grid = np.arange(-6.0, 8.0 + 1e-9, 0.1)
    assert len(grid) == 141
    scores = [gcv_score(y, blocks, [10.0 ** g]) for g in grid]
    grid_best = grid[int(np.argmin(scores))]

    selection = select_lambda(y, blocks)
    picked = math.log10(selection.lambdas[0])
    assert abs(picked - grid_best) <= 0.1 + 1e-9

    fit = fit_penalized(y, blocks, selection.lambdas)
    fitted = np.hstack([b.X for b in blocks]) @ fit.beta
    rmse = float(np.sqrt(np.mean((fitted - np.sin(2 * np.pi * x)) ** 2)))
    assert rmse <= 0.06
    assert time.perf_counter() - start < 10.0


@criterion("AIC identity (1e-12) and exact self-difference")
def test_aic_identity_and_self_delta():
    rng = np.random.default_rng(9)
    for trial in range(5):
        n = int(rng.integers(80, 200))
        x = rng.uniform(0, 1, n)
        g = [f"g{rng.integers(0, 4)}" for _ in range(n)]
        y = np.sin(2 * np.pi * x) + rng.normal(0, 0.5, n)
        frame = MetricFrame([("y", y), ("x", x)], [("g", g)])
        fit = fit_gam(frame, parse_formula("y ~ s(x) + re(g)"))
        expected = (fit.n * math.log(2 * math.pi * fit.rss / fit.n)
                    + fit.n + 2 * (fit.edf_total + 1))
        assert abs(fit.aic - expected) <= 1e-12 * max(1.0, abs(expected))
        assert delta_aic(fit, fit) == 0.0


@criterion("signal-detection ordering at n=5000 (< 60 s)")
def test_signal_detection_ordering():
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    n = 5000
    x1, x2, x3 = (rng.uniform(0, 1, n) for _ in range(3))
    y = np.sin(2 * np.pi * x1) + 0.2 * np.sin(2 * np.pi * x2) + rng.normal(0, 0.3, n)
    frame = MetricFrame([("y", y), ("x1", x1), ("x2", x2), ("x3", x3)])

    full = fit_gam(frame, parse_formula("y ~ s(x1) + s(x2) + s(x3)"))
    drop = {}
    for var in ("x1", "x2", "x3"):
        keep = [v for v in ("x1", "x2", "x3") if v != var]
        reduced = fit_gam(
            frame, parse_formula("y ~ " + " + ".join(f"s({v})" for v in keep)))
        drop[var] = delta_aic(reduced, full)

    assert drop["x1"] > drop["x2"] > drop["x3"]
    assert -5.0 <= drop["x3"] <= 10.0
    assert time.perf_counter() - start < 60.0


@criterion("partial-effect significance across 20 seeds")
def test_partial_effect_significance_rates():
    noise_ok = 0
    for s in range(20):
        rng = np.random.default_rng(100 + s)
        n = 300
        frame = MetricFrame([("y", rng.normal(0, 1, n)), ("x", rng.uniform(0, 1, n))])
        pe = partial_effect(fit_gam(frame, parse_formula("y ~ s(x)")), "x")
        noise_ok += pe.p_value > 0.05
    assert noise_ok >= 17, f"noise term flagged significant too often: {20 - noise_ok}/20"

    for s in range(20):
        rng = np.random.default_rng(200 + s)
        n = 300
        x = rng.uniform(-1, 1, n)
        y = x ** 2 + rng.normal(0, 0.1, n)
        frame = MetricFrame([("y", y), ("x", x)])
        pe = partial_effect(fit_gam(frame, parse_formula("y ~ s(x)")), "x")
        assert pe.p_value < 1e-6, f"quadratic term missed at seed {200 + s}"


@criterion("cosine similarity property suite (1e4 vectors, 1e-12)")
def test_similarity_property_suite():
    rng = np.random.default_rng(21)
    for _ in range(10_000):
        dim = int(rng.integers(2, 65))
        u = rng.normal(0, 1, dim)
        v = rng.normal(0, 1, dim)
        c = cosine(u, v)
        assert -1.0 <= c <= 1.0
        assert cosine(v, u) == c
        a, b = 10.0 ** rng.uniform(-3, 3), 10.0 ** rng.uniform(-3, 3)
        assert abs(cosine(a * u, b * v) - c) <= 1e-12

    # Annotation agrees with a brute-force two-pass oracle.
    dim, n = 16, 50
    entries = {}
    vectors = {}
    for i in range(n):
        for side in ("source", "target"):
            vec = rng.normal(0, 1, dim)
            vectors[(i, side)] = vec
            entries[(i, side)] = EmbeddingVector(vec)
    store = EmbeddingStore(dim=dim, model_tag="suite@r0", entries=entries)
    records = parse_mlqepe_rows(n, rng)
    annotated = annotate_similarity(records, store)
    for rec in annotated:
        u = vectors[(rec.segment_id, "source")]
        v = vectors[(rec.segment_id, "target")]
        num = math.fsum(float(a * b) for a, b in zip(u, v))
        den = math.sqrt(math.fsum(float(a * a) for a in u))
        den *= math.sqrt(math.fsum(float(b * b) for b in v))
        assert abs(rec.similarity - num / den) <= 1e-12


def parse_mlqepe_rows(n, rng):
    from conftest import MLQEPE_HEADER, mlqepe_row
    rows = [MLQEPE_HEADER]
    for i in range(n):
        rows.append(mlqepe_row(i, rng.integers(10, 100, 3), rng.normal(), 0.3))
    import io
    import tempfile
    with tempfile.NamedTemporaryFile("w", suffix=".tsv", delete=False) as fh:
        fh.write("\n".join(rows) + "\n")
        path = fh.name
    try:
        return parse_mlqepe(path, LangPair("en", "de"))
    finally:
        os.unlink(path)


@criterion("pearson oracle (100 pairs, 1e-12) and matrix symmetry")
def test_statistics_oracles():
    rng = np.random.default_rng(33)
    for _ in range(100):
        n = int(rng.integers(3, 400))
        x = rng.normal(0, rng.uniform(0.5, 5), n)
        y = rng.normal(0, rng.uniform(0.5, 5), n) + rng.uniform(-1, 1) * x
        mx, my = math.fsum(x) / n, math.fsum(y) / n
        num = math.fsum((a - mx) * (b - my) for a, b in zip(x, y))
        den = math.sqrt(math.fsum((a - mx) ** 2 for a in x))
        den *= math.sqrt(math.fsum((b - my) ** 2 for b in y))
        assert abs(pearson(x, y) - num / den) <= 1e-12

    frame = MetricFrame([(f"v{i}", rng.normal(0, 1, 80)) for i in range(5)])
    cm = correlation_matrix(frame)
    assert np.array_equal(cm.r, cm.r.T)
    assert np.all(np.diag(cm.r) == 1.0)


@criterion("byte-identical fit-compare reruns")
def test_fit_compare_determinism(tmp_path):
    from conftest import MLQEPE_MODELS
    models = {k: MLQEPE_MODELS[k] for k in ("base", "m1")}
    cfg = write_analysis_tree(tmp_path, models=models, n=50)
    assert main(["fit", "--config", str(cfg), "--out", str(tmp_path / "r1")]) == 0
    assert main(["fit", "--config", str(cfg), "--out", str(tmp_path / "r2")]) == 0
    first, second = tree_bytes(tmp_path / "r1"), tree_bytes(tmp_path / "r2")
    assert first and first == second


@criterion("paper-level integration (optional; needs QE_GAUGE_MLQEPE_CONFIG)")
def test_paper_level_integration(tmp_path):
    """Pooled correlations and ΔAIC signs on the real annotated dataset."""
    config_path = os.environ.get("QE_GAUGE_MLQEPE_CONFIG")
    if not config_path:
        pytest.skip("set QE_GAUGE_MLQEPE_CONFIG to a full-dataset config to enable")
    cfg = load_config(config_path)
    records = []
    for pair in cfg.datasets:
        recs = parse_mlqepe(cfg.datasets[pair], LangPair.parse(pair))
        if any(r.similarity is None for r in recs):
            recs = annotate_similarity(recs, load_embeddings(cfg.embeddings[pair]))
        records.extend(recs)
    frame, _ = build_frame(cfg, records)

    r_da = pearson(frame.column("similarity"), frame.column("da_mean"))
    r_hter = pearson(frame.column("similarity"), frame.column("hter"))
    assert abs(r_da - 0.47) <= 0.07
    assert abs(r_hter - (-0.45)) <= 0.07

    fits = {name: fit_gam(frame, formula) for name, formula in cfg.models.items()}
    base = fits.pop("base")
    assert fits, "config must name reduced models besides base"
    for name, fit in fits.items():
        assert delta_aic(fit, base) > 0.0, f"model {name} did not lose to base"


@criterion("fit-table AIC equals fit-JSON AIC exactly")
def test_table_and_json_aic_agree(tmp_path):
    from conftest import MLQEPE_MODELS
    cfg = write_analysis_tree(tmp_path, models=MLQEPE_MODELS, n=60)
    assert main(["fit", "--config", str(cfg)]) == 0
    fits_dir = tmp_path / "out" / "fits"
    lines = (fits_dir / "aic_table.tsv").read_text().splitlines()[1:]
    assert lines
    for line in lines:
        name, aic_text = line.split("\t")[:2]
        doc = json.loads((fits_dir / f"{name}.json").read_text())
        assert float(aic_text) == doc["aic"]
