"""CSV-to-sparse-file conversion: featurize SMILES and threshold pIC50.

Reads a table with id, smiles, and pic50 columns, computes folded circular
fingerprints, assigns label 1 when pIC50 >= threshold (the boundary counts
as active), and writes the sparse feature format the modeling side loads.
Unparseable rows are skipped and counted; duplicate ids keep the first
occurrence.
"""

from __future__ import annotations

import csv
import math
import sys
from dataclasses import dataclass, field

from .morgan import morgan_bits
from .smiles import SmilesError, parse_smiles

DEFAULT_RADIUS = 3
DEFAULT_NBITS = 32768


class IngestError(ValueError):
    """The input table cannot be converted at all."""


@dataclass
class RawActivityRecord:
    id: str
    smiles: str
    pic50: float


@dataclass
class IngestReport:
    written: int = 0
    skipped_unparseable: int = 0
    skipped_duplicates: int = 0
    skipped_bad_value: int = 0
    single_class: bool = False
    examples: list = field(default_factory=list)  # (id, reason) of first skips

    def summary(self) -> str:
        parts = [f"{self.written} rows written"]
        if self.skipped_unparseable:
            parts.append(f"{self.skipped_unparseable} unparseable SMILES skipped")
        if self.skipped_bad_value:
            parts.append(f"{self.skipped_bad_value} rows with bad pIC50 skipped")
        if self.skipped_duplicates:
            parts.append(f"{self.skipped_duplicates} duplicate ids skipped (first wins)")
        if self.single_class:
            parts.append("WARNING: single-class output; the modeling side will reject it")
        return "; ".join(parts)


def read_activity_table(path) -> list:
    """Parse the id/smiles/pic50 CSV; header names matched case-insensitively."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path}: empty file") from None
        lookup = {name.strip().lower(): k for k, name in enumerate(header)}
        try:
            id_col = lookup["id"]
            smi_col = lookup["smiles"]
            act_col = lookup["pic50"]
        except KeyError as exc:
            raise IngestError(
                f"{path}: need id, smiles, and pic50 columns, got {header}") from exc
        rows = []
        for cells in reader:
            if not cells or not any(c.strip() for c in cells):
                continue
            rows.append((cells[id_col].strip(), cells[smi_col].strip(),
                         cells[act_col].strip()))
    if not rows:
        raise IngestError(f"{path}: no data rows")
    return rows


def featurize(rows, radius: int = DEFAULT_RADIUS, nbits: int = DEFAULT_NBITS,
              threshold: float = 6.5):
    """Convert raw rows to (id, label, bits) triples plus a report.

    label = 1 iff pIC50 >= threshold. Raises IngestError when no row
    survives.
    """
    if radius < 1:
        raise IngestError("radius must be >= 1")
    if nbits < 2 or nbits & (nbits - 1):
        raise IngestError("nbits must be a positive power of two")
    report = IngestReport()
    seen = set()
    out = []
    for cid, smiles, act in rows:
        if not cid or " " in cid:
            report.skipped_bad_value += 1
            report.examples.append((cid or "<empty>", "bad id"))
            continue
        if cid in seen:
            report.skipped_duplicates += 1
            continue
        try:
            pic50 = float(act)
            if not math.isfinite(pic50):
                raise ValueError
        except ValueError:
            report.skipped_bad_value += 1
            report.examples.append((cid, f"bad pIC50 {act!r}"))
            continue
        try:
            mol = parse_smiles(smiles)
            bits = morgan_bits(mol, radius, nbits)
        except SmilesError as exc:
            report.skipped_unparseable += 1
            report.examples.append((cid, str(exc)))
            continue
        seen.add(cid)
        label = 1 if pic50 >= threshold else 0
        out.append((cid, label, bits))
    if not out:
        raise IngestError("zero parseable records")
    report.written = len(out)
    labels = {label for _, label, _ in out}
    report.single_class = len(labels) == 1
    return out, report


def write_sparse_file(entries, nbits: int, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"dim={nbits} n={len(entries)}\n")
        for cid, label, bits in entries:
            tail = " ".join(str(b) for b in bits)
            fh.write(f"{cid} {label} {tail}\n" if tail else f"{cid} {label}\n")


def ingest_file(input_path, output_path, radius: int = DEFAULT_RADIUS,
                nbits: int = DEFAULT_NBITS, threshold: float = 6.5,
                quiet: bool = False) -> IngestReport:
    rows = read_activity_table(input_path)
    entries, report = featurize(rows, radius, nbits, threshold)
    write_sparse_file(entries, nbits, output_path)
    if not quiet:
        print(report.summary(), file=sys.stderr)
        for cid, reason in report.examples[:5]:
            print(f"  skipped {cid}: {reason}", file=sys.stderr)
    return report
