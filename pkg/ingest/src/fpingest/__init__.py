"""SMILES-to-sparse-fingerprint ingestion for the calibration study."""

__version__ = "0.1.0"

from .ingest import (
    IngestError,
    IngestReport,
    RawActivityRecord,
    featurize,
    ingest_file,
    read_activity_table,
    write_sparse_file,
)
from .morgan import morgan_bits
from .smiles import Molecule, SmilesError, parse_smiles, ring_atoms
