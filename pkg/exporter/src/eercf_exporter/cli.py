"""Command-line interface for the exporter.

Exit codes follow the engine CLI's convention: 0 on success, 1 for invalid
parameters or usage (including an unavailable backend), 2 for I/O and
file-format failures (unreadable inputs, empty exports).
"""

from __future__ import annotations

import argparse
import sys
from typing import Sequence

from .config import MODEL_VARIANTS, ExportConfig
from .errors import FormatError, ValidationError
from .export import run_export


class _UsageError(Exception):
    """Raised instead of argparse's default exit so usage errors map to code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="eercf-export",
        description=(
            "Encode video clips and captions into the retrieval engine's "
            "binary dataset format (videos.bin, texts.bin, manifest.json)."
        ),
        allow_abbrev=False,
    )
    parser.add_argument(
        "--videos",
        required=True,
        metavar="DIR",
        help="directory of clips: video files, or subdirectories of image frames",
    )
    parser.add_argument(
        "--captions",
        required=True,
        metavar="FILE",
        help="JSON object mapping clip id to caption",
    )
    parser.add_argument(
        "--out",
        required=True,
        metavar="DIR",
        help="output dataset directory",
    )
    parser.add_argument(
        "--model",
        default="vitb32",
        choices=sorted(MODEL_VARIANTS),
        help="feature backend variant (default: vitb32; codebook needs no weights)",
    )
    parser.add_argument(
        "--frames",
        type=int,
        default=12,
        metavar="N",
        help="frames sampled uniformly per clip (default: 12)",
    )
    parser.add_argument(
        "--dataset",
        default="export",
        metavar="NAME",
        help="dataset name recorded in the manifest (default: export)",
    )
    parser.add_argument(
        "--checkpoint",
        default=None,
        metavar="PATH",
        help="local checkpoint path or hub id for transformer variants "
        "(default: EERCF_CLIP_CHECKPOINT, then the variant's cached hub id)",
    )
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        config = ExportConfig(
            model=args.model,
            frames=args.frames,
            dataset=args.dataset,
            checkpoint=args.checkpoint,
        )
        report = run_export(args.videos, args.captions, args.out, config)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for line in report.summary_lines():
        print(line)
    return 0


def entrypoint() -> None:
    sys.exit(main())


__all__ = ["build_parser", "main", "entrypoint"]
