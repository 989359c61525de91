"""Fingerprint determinism, range, and graph invariance."""

import pytest

from fpingest.morgan import hash_combine, morgan_bits
from fpingest.smiles import parse_smiles


def bits(smiles, radius=3, nbits=32768):
    return morgan_bits(parse_smiles(smiles), radius, nbits)


class TestHashCombine:
    def test_unsigned_32bit(self):
        h = 0
        for v in (0, 1, 2 ** 31, 2 ** 32 - 1, 12345):
            h = hash_combine(h, v)
            assert 0 <= h <= 0xFFFFFFFF

    def test_order_sensitive(self):
        assert hash_combine(hash_combine(0, 1), 2) != hash_combine(hash_combine(0, 2), 1)


class TestMorganBits:
    def test_identical_smiles_identical_bits(self):
        assert bits("CC(=O)Oc1ccccc1C(=O)O") == bits("CC(=O)Oc1ccccc1C(=O)O")

    def test_benzene_in_range(self):
        out = bits("c1ccccc1")
        assert out
        assert all(0 <= b < 32768 for b in out)
        assert out == sorted(set(out))

    def test_equivalent_atom_orderings_match(self):
        pairs = [
            ("CCO", "OCC"),
            ("Cc1ccccc1", "c1ccccc1C"),
            ("Oc1ccccc1", "c1ccc(O)cc1"),
            ("CC(=O)O", "OC(C)=O"),
            ("C1CCCCC1", "C2CCCCC2"),
            ("c1ccncc1", "n1ccccc1"),
        ]
        for a, b in pairs:
            assert bits(a) == bits(b), (a, b)

    def test_different_molecules_differ(self):
        assert bits("CCO") != bits("CCN")
        assert bits("c1ccccc1") != bits("C1CCCCC1")

    def test_radius_grows_environment_set(self):
        small = bits("CCCCCCCC", radius=1)
        large = bits("CCCCCCCC", radius=3)
        assert set(small) <= set(large)
        assert len(large) > len(small)

    def test_folding_respects_nbits(self):
        out = bits("CC(=O)Oc1ccccc1C(=O)O", nbits=64)
        assert all(0 <= b < 64 for b in out)

    def test_invalid_settings_rejected(self):
        mol = parse_smiles("CC")
        with pytest.raises(ValueError):
            morgan_bits(mol, 0, 2048)
        with pytest.raises(ValueError):
            morgan_bits(mol, 2, 1000)  # not a power of two
