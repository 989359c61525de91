"""The `ingest` command: SMILES+pIC50 CSV in, sparse feature file out."""

from __future__ import annotations

import argparse
import sys

from .ingest import DEFAULT_NBITS, DEFAULT_RADIUS, IngestError, ingest_file


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ingest",
        description="Convert a SMILES+activity table into the sparse "
                    "fingerprint feature format.",
        epilog="Labels: a compound is active (1) when pIC50 >= threshold; "
               "the boundary value counts as active. Duplicate ids keep the "
               "first row. Unparseable SMILES are skipped and reported.",
    )
    ap.add_argument("--input", required=True, help="CSV with id,smiles,pic50 columns")
    ap.add_argument("--radius", type=int, default=DEFAULT_RADIUS,
                    help="circular fingerprint radius (default 3)")
    ap.add_argument("--nbits", type=int, default=DEFAULT_NBITS,
                    help="folded feature size, power of two (default 32768)")
    ap.add_argument("--threshold", type=float, required=True,
                    help="pIC50 activity threshold (>= is active)")
    ap.add_argument("--output", required=True, help="sparse feature file to write")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        ingest_file(args.input, args.output, radius=args.radius,
                    nbits=args.nbits, threshold=args.threshold)
    except (IngestError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
