"""Shared synthetic-data builders for the test suite."""

from __future__ import annotations

import math
import os
from pathlib import Path

import numpy as np
import pytest

DIM = 8
MODEL_TAG = "test-model@r1"

MLQEPE_HEADER = "index\toriginal\ttranslation\tscores\tmean\tz_scores\tz_mean\tmodel_scores\thter"
PREQUEL_HEADER = ("index\toriginal\ttranslation\tsent_prob_1\tsent_prob_2\tsent_prob_3"
                  "\tsent_prob_4\tsent_prob_5\tlm_score\thter\tz_mean")


def mlqepe_row(i, scores, model_score, hter, pair="en-de"):
    """One raw TSV row with self-consistent mean/z columns."""
    scores = [float(s) for s in scores]
    mean = sum(scores) / len(scores)
    z = [(s - 60.0) / 15.0 for s in scores]
    z_mean = sum(z) / len(z)
    return "\t".join([
        str(i), f"src {pair} {i}", f"tgt {pair} {i}",
        "[" + ", ".join(repr(s) for s in scores) + "]",
        repr(mean),
        "[" + ", ".join(repr(v) for v in z) + "]",
        repr(z_mean), repr(float(model_score)), repr(float(hter)),
    ])


def make_mlqepe_text(n, rng, pair="en-de", couple_similarity=True):
    """Synthetic dataset text plus a matching embedding file text.

    With couple_similarity, target vectors interpolate between the source
    vector and noise with weight tied to the DA mean, so similarity carries
    signal about the score.
    """
    drows = [MLQEPE_HEADER]
    erows = [f"#dim={DIM}", f"#model={MODEL_TAG}"]
    for i in range(n):
        n_ann = int(rng.integers(2, 5))
        center = rng.uniform(30, 95)
        scores = np.clip(np.round(center + rng.normal(0, 6, n_ann)), 0, 100)
        mean = float(np.mean(scores))
        ms = float(rng.normal(mean / 100.0, 0.05))
        hter = float(np.clip(rng.normal(1.0 - mean / 100.0, 0.08), 0, 2))
        drows.append(mlqepe_row(i, scores, ms, hter, pair))
        src = rng.normal(0, 1, DIM)
        noise = rng.normal(0, 1, DIM)
        t = 0.2 + 0.8 * (mean / 100.0) if couple_similarity else 0.5
        tgt = t * src + (1.0 - t) * noise
        erows.append(f"{i}\tsource\t" + " ".join(repr(float(v)) for v in src))
        erows.append(f"{i}\ttarget\t" + " ".join(repr(float(v)) for v in tgt))
    return "\n".join(drows) + "\n", "\n".join(erows) + "\n"


def make_prequel_text(n, rng, pair="en-cs"):
    drows = [PREQUEL_HEADER]
    erows = [f"#dim={DIM}", f"#model={MODEL_TAG}"]
    levels = ["low", "mid", "high", "top"]
    for i in range(n):
        probs = np.sort(rng.uniform(-8, -1, 5))[::-1]
        z = float(rng.normal(0, 1))
        hter = float(np.clip(rng.normal(0.4 - 0.1 * z, 0.1), 0, 2))
        drows.append("\t".join(
            [str(i), f"src {i}", f"tgt {i}"]
            + [repr(float(p)) for p in probs]
            + [levels[int(rng.integers(0, 4))], repr(hter), repr(z)]))
        src = rng.normal(0, 1, DIM)
        tgt = 0.6 * src + 0.4 * rng.normal(0, 1, DIM)
        erows.append(f"{i}\tsource\t" + " ".join(repr(float(v)) for v in src))
        erows.append(f"{i}\ttarget\t" + " ".join(repr(float(v)) for v in tgt))
    return "\n".join(drows) + "\n", "\n".join(erows) + "\n"


def write_analysis_tree(tmp_path, kind="mlqepe", pairs=("en-de", "en-zh"), n=60,
                        seed=5, models=None, extra="", couple_similarity=True):
    """Materialize datasets, embeddings, and a config file under tmp_path."""
    rng = np.random.default_rng(seed)
    (tmp_path / "data").mkdir(exist_ok=True)
    (tmp_path / "emb").mkdir(exist_ok=True)
    lines = [f'dataset_kind = "{kind}"', f'out_dir = "{tmp_path / "out"}"']
    if extra:
        # Top-level keys must precede the tables below.
        lines.append(extra)
    lines.append("")
    ds, em = ["[datasets]"], ["[embeddings]"]
    for pair in pairs:
        if kind == "mlqepe":
            dtext, etext = make_mlqepe_text(n, rng, pair, couple_similarity)
        else:
            dtext, etext = make_prequel_text(n, rng, pair)
        dpath = tmp_path / "data" / f"{pair}.tsv"
        epath = tmp_path / "emb" / f"{pair}.emb"
        dpath.write_text(dtext, encoding="utf-8")
        epath.write_text(etext, encoding="utf-8")
        ds.append(f'{pair} = "{dpath}"')
        em.append(f'{pair} = "{epath}"')
    lines += ds + [""] + em + [""]
    if models:
        lines.append("[models]")
        for name, formula in models.items():
            lines.append(f'{name} = "{formula}"')
    cfg = tmp_path / "config.toml"
    cfg.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return cfg


def tree_bytes(root):
    """Relative path -> file bytes for every file under root."""
    out = {}
    for dirpath, _, files in os.walk(root):
        for name in files:
            p = Path(dirpath) / name
            out[str(p.relative_to(root))] = p.read_bytes()
    return out


def assemble_design(blocks):
    return np.hstack([b.X for b in blocks])


def augmented_lstsq_oracle(y, blocks, lambdas):
    """Closed-form reference for penalized least squares.

    Stacks sqrt(lambda)-scaled penalty roots under the design and solves the
    plain least-squares problem; independent of the engine's QR pipeline.
    """
    X = assemble_design(blocks)
    p = X.shape[1]
    rows = [X]
    offset = 0
    lam_iter = iter(lambdas)
    for b in blocks:
        w = b.X.shape[1]
        if b.penalty_sqrt is not None:
            E = np.asarray(b.penalty_sqrt, dtype=float)
            padded = np.zeros((E.shape[0], p))
            padded[:, offset:offset + w] = math.sqrt(next(lam_iter)) * E
            rows.append(padded)
        offset += w
    A = np.vstack(rows)
    rhs = np.concatenate([np.asarray(y, dtype=float), np.zeros(A.shape[0] - len(y))])
    beta = np.linalg.lstsq(A, rhs, rcond=None)[0]
    resid = np.asarray(y, dtype=float) - X @ beta
    return beta, float(resid @ resid)


MLQEPE_MODELS = {
    "base": "da_mean ~ s(model_score, k=6) + s(similarity, k=6) + s(score_sd, k=6) "
            "+ s(hter, k=6) + re(n_annotators) + re(lang_pair)",
    "m1": "da_mean ~ s(model_score, k=6) + s(score_sd, k=6) + s(hter, k=6) "
          "+ re(n_annotators) + re(lang_pair)",
    "m2": "da_mean ~ s(similarity, k=6) + s(score_sd, k=6) + s(hter, k=6) "
          "+ re(n_annotators) + re(lang_pair)",
    "m3": "da_mean ~ s(model_score, k=6) + s(similarity, k=6) + s(score_sd, k=6) "
          "+ re(n_annotators) + re(lang_pair)",
}


@pytest.fixture
def mlqepe_tree(tmp_path):
    return write_analysis_tree(tmp_path, models=MLQEPE_MODELS), tmp_path
