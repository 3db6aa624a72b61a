"""Command-line entry point.

    export-embeddings --dataset <tsv> --kind mlqepe|prequel
                      [--model <id>] [--revision <rev>]
                      [--batch-size <n>] --out <file>

Exit codes: 0 success, 1 configuration error, 2 dataset error,
4 model-load failure.  Failures print one line
`export-embeddings: <category>-error: <message>` to stderr.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .backends import DEFAULT_MODEL, ModelLoadError
from .exporter import (
    MLQEPE,
    PREQUEL,
    ConfigError,
    DatasetError,
    ExporterConfig,
    export_embeddings,
)


class _ArgumentParser(argparse.ArgumentParser):
    """Route usage errors through the config-error exit path (code 1)."""

    def error(self, message):
        raise ConfigError(message)


def _build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        prog="export-embeddings",
        description="Embed dataset texts and write the embedding exchange file.")
    parser.add_argument("--dataset", required=True, metavar="TSV",
                        help="QE dataset file to read texts from")
    parser.add_argument("--kind", required=True, choices=(MLQEPE, PREQUEL),
                        help="dataset layout to expect")
    parser.add_argument("--model", default=DEFAULT_MODEL, metavar="ID",
                        help="embedding model id (default: %(default)s); "
                             "hashed-ngram:<dim> selects the offline hasher")
    parser.add_argument("--revision", default=None, metavar="REV",
                        help="model revision to pin into the output tag")
    parser.add_argument("--batch-size", type=int, default=32, metavar="N",
                        help="texts per inference batch (default: %(default)s)")
    parser.add_argument("--out", required=True, metavar="FILE",
                        help="embedding exchange file to write")
    return parser


def _fail(category: str, exc: BaseException, code: int) -> int:
    print(f"export-embeddings: {category}-error: {exc}", file=sys.stderr)
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        cfg = ExporterConfig(
            dataset=args.dataset,
            dataset_kind=args.kind,
            out=args.out,
            model=args.model,
            revision=args.revision,
            batch_size=args.batch_size,
        )
        summary = export_embeddings(cfg)
    except ConfigError as exc:
        return _fail("config", exc, 1)
    except DatasetError as exc:
        return _fail("data", exc, 2)
    except ModelLoadError as exc:
        return _fail("model", exc, 4)
    except OSError as exc:
        return _fail("config", exc, 1)
    print(f"{summary.out_path}: {summary.n_vectors} vectors, "
          f"dim={summary.dim}, model={summary.model_tag}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
