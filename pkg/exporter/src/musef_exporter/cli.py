"""Command-line entry point for the exporter.

Single operation: read a JSON-lines corpus, encode each record, write
one MUSEF v2 file plus a sidecar skip report. Exit codes follow the
engine convention: 0 success (including partial success with skips),
2 config or usage errors, 3 unusable input or an all-records failure.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, InputError
from .export import ExportConfig, export
from .records import read_records


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="musef-export",
        description="Convert a JSON-lines text/image corpus into a MUSEF v2 feature file.")
    parser.add_argument("--input", required=True, help="corpus file, one JSON record per line")
    parser.add_argument("--out", required=True, help="output MUSEF path")
    parser.add_argument("--text-encoder", default="hash-v1", help="text encoder id")
    parser.add_argument("--image-encoder", default="patch-v1", help="image encoder id")
    parser.add_argument("--k-t", type=int, default=8, help="token rows per text matrix")
    parser.add_argument("--d-t", type=int, default=8, help="text feature width")
    parser.add_argument("--k-v", type=int, default=4, help="region rows per image matrix")
    parser.add_argument("--d-v", type=int, default=8, help="image feature width")
    return parser


def run(args: argparse.Namespace) -> int:
    config = ExportConfig(
        text_encoder=args.text_encoder, image_encoder=args.image_encoder,
        k_t=args.k_t, d_t=args.d_t, k_v=args.k_v, d_v=args.d_v)
    records = read_records(args.input)
    result = export(records, config, args.out)
    for rid, reason in result.skipped:
        print(f"skipped {rid}: {reason}", file=sys.stderr)
    print(f"wrote {result.out_path} ({result.exported} of {len(records)} records)")
    print(f"sha256 {result.sha256}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
