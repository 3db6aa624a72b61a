"""Builders for small dataset files in both supported layouts."""

MLQEPE_HEADER = ("index\toriginal\ttranslation\tscores\tmean\tz_scores\tz_mean"
                 "\tmodel_scores\thter")
PREQUEL_HEADER = ("index\toriginal\ttranslation\tsent_prob_1\tsent_prob_2"
                  "\tsent_prob_3\tsent_prob_4\tsent_prob_5\tlm_score\thter\tz_mean")


def mlqepe_text(pairs):
    """Dataset text from [(segment_id, source, target)] rows."""
    rows = [MLQEPE_HEADER]
    for seg, src, tgt in pairs:
        scores = [60.0, 70.0, 80.0]
        z = [(s - 60.0) / 15.0 for s in scores]
        rows.append("\t".join([
            str(seg), src, tgt,
            "[" + ", ".join(repr(s) for s in scores) + "]",
            repr(sum(scores) / 3),
            "[" + ", ".join(repr(v) for v in z) + "]",
            repr(sum(z) / 3), "0.5", "0.3",
        ]))
    return "\n".join(rows) + "\n"


def prequel_text(pairs):
    rows = [PREQUEL_HEADER]
    for seg, src, tgt in pairs:
        rows.append("\t".join(
            [str(seg), src, tgt]
            + [repr(-1.0 - 0.5 * j) for j in range(5)]
            + ["mid", "0.4", "0.1"]))
    return "\n".join(rows) + "\n"


def write_dataset(tmp_path, pairs, kind="mlqepe", name="data.tsv"):
    text = mlqepe_text(pairs) if kind == "mlqepe" else prequel_text(pairs)
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path
