"""Command-line interface.

Subcommands:

    models    list registry entries, optionally filtered by family
    extract   embed an image folder into a feature-bank file

Exit codes: 0 success, 2 bad input (unknown model, bad flag, missing or
undecodable images), 3 operation failure (model weights unavailable).
"""

from __future__ import annotations

import argparse
import sys

from .errors import EmptyDirectory, ModelUnavailable, UndecodableImage
from .extract import ExtractorSpec, extract_embeddings
from .registry import POOLINGS, list_models


def cmd_models(ns: argparse.Namespace) -> int:
    for entry in list_models(ns.family):
        print(
            f"{entry.model_id}  {entry.family}  dim={entry.dim}  "
            f"pooling={entry.default_pooling}"
        )
    return 0


def cmd_extract(ns: argparse.Namespace) -> int:
    spec = ExtractorSpec(
        model_id=ns.model,
        input_size=ns.input_size,
        pooling=ns.pooling,
        device=ns.device,
        batch_size=ns.batch_size,
    )
    extract_embeddings(ns.images, spec, ns.out, group_by_dir=ns.group_by_dir)
    entry = spec.entry
    print(f"model: {entry.model_id}")
    print(f"dim: {entry.dim}")
    print(f"pooling: {spec.resolved_pooling}")
    print(f"out: {ns.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fmextract",
        description="Embed image folders with pre-trained vision models",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    models = sub.add_parser("models", help="list registry entries")
    models.add_argument("--family", help="only list this model family")
    models.set_defaults(handler=cmd_models)

    extract = sub.add_parser("extract", help="embed an image folder")
    extract.add_argument("--model", required=True, help="registry model id")
    extract.add_argument("--images", required=True, help="image directory")
    extract.add_argument("--out", required=True, help="output feature-bank file")
    extract.add_argument(
        "--pooling", choices=POOLINGS, help="override the model's default pooling"
    )
    extract.add_argument(
        "--input-size", type=int, help="override the model's native input size"
    )
    extract.add_argument("--device", default="cpu", help="inference device")
    extract.add_argument("--batch-size", type=int, default=16)
    extract.add_argument(
        "--group-by-dir",
        action="store_true",
        help="record each image's directory as its group id",
    )
    extract.set_defaults(handler=cmd_extract)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else (0 if exc.code is None else 2)
    try:
        return ns.handler(ns)
    except (EmptyDirectory, UndecodableImage, ValueError) as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 2
    except ModelUnavailable as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
