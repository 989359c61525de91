"""SMILES parsing: graph shape, hydrogens, rings, error handling."""

import pytest

from fpingest.smiles import SmilesError, parse_smiles, ring_atoms


def hydrogens(smiles):
    return [a.implicit_h for a in parse_smiles(smiles).atoms]


class TestParsing:
    def test_ethanol(self):
        mol = parse_smiles("CCO")
        assert [a.symbol for a in mol.atoms] == ["C", "C", "O"]
        assert len(mol.bonds) == 2
        assert hydrogens("CCO") == [3, 2, 1]

    def test_benzene_aromatic_bonds(self):
        mol = parse_smiles("c1ccccc1")
        assert len(mol.atoms) == 6
        assert len(mol.bonds) == 6
        assert all(b.aromatic for b in mol.bonds)
        assert hydrogens("c1ccccc1") == [1] * 6

    def test_branches_and_double_bonds(self):
        mol = parse_smiles("CC(=O)O")  # acetic acid
        orders = sorted(b.order for b in mol.bonds)
        assert orders == [1.0, 1.0, 2.0]
        assert hydrogens("CC(=O)O") == [3, 0, 0, 1]

    def test_bracket_atoms(self):
        mol = parse_smiles("[13CH3][NH3+].[Cl-]")
        c, n, cl = mol.atoms
        assert c.isotope == 13 and c.implicit_h == 3
        assert n.charge == 1 and n.implicit_h == 3
        assert cl.charge == -1 and cl.symbol == "Cl"
        assert len(mol.bonds) == 1  # the dot separates fragments

    def test_two_letter_elements(self):
        mol = parse_smiles("ClCBr")
        assert [a.symbol for a in mol.atoms] == ["Cl", "C", "Br"]

    def test_ring_closure_percent(self):
        mol = parse_smiles("C%10CCCCC%10")
        assert len(mol.bonds) == 6

    def test_fused_rings(self):
        mol = parse_smiles("c1ccc2ccccc2c1")  # naphthalene
        assert len(mol.atoms) == 10
        assert len(mol.bonds) == 11
        assert hydrogens("c1ccc2ccccc2c1").count(0) == 2  # the fusion carbons

    def test_pyridine_vs_pyrrole_nitrogen(self):
        assert hydrogens("c1ccncc1")[3] == 0       # pyridine N
        mol = parse_smiles("c1cc[nH]c1")
        n = [a for a in mol.atoms if a.symbol == "N"][0]
        assert n.implicit_h == 1                    # pyrrole N written explicitly

    def test_higher_valence_states(self):
        assert hydrogens("O=S(=O)(O)O") == [0, 0, 0, 1, 1]   # sulfuric acid
        assert hydrogens("CP(C)C") == [3, 0, 3, 3]

    def test_stereo_markers_ignored(self):
        mol = parse_smiles("C[C@H](N)C(=O)O")
        assert len(mol.atoms) == 6
        mol2 = parse_smiles("F/C=C/F")
        assert sorted(b.order for b in mol2.bonds) == [1.0, 1.0, 2.0]

    def test_ring_number_reuse(self):
        mol = parse_smiles("C1CC1C1CC1")  # the label is free again after closing
        assert len(mol.bonds) == 7

    def test_numeric_charge(self):
        mol = parse_smiles("[Fe+3]")
        assert mol.atoms[0].charge == 3
        mol = parse_smiles("[O-2]")
        assert mol.atoms[0].charge == -2

    def test_repeated_sign_charge(self):
        assert parse_smiles("[Ca++]").atoms[0].charge == 2


class TestErrors:
    @pytest.mark.parametrize("bad", [
        "", "C(", "C)", "C1CC", "C%1CC", "[C", "[]", "C==C", "1CC",
        "C[Zz]C", "Cx", "C=",
    ])
    def test_rejected(self, bad):
        with pytest.raises(SmilesError):
            parse_smiles(bad)

    def test_conflicting_ring_bond_orders(self):
        with pytest.raises(SmilesError):
            parse_smiles("C=1CCCCC#1")

    def test_self_ring_closure(self):
        with pytest.raises(SmilesError):
            parse_smiles("C11")


class TestRingDetection:
    def test_chain_has_no_ring_atoms(self):
        assert ring_atoms(parse_smiles("CCCCC")) == set()

    def test_ring_with_tail(self):
        members = ring_atoms(parse_smiles("C1CCC1CC"))
        assert members == {0, 1, 2, 3}

    def test_two_rings_with_bridge(self):
        # rings joined by a single bond: the bridge endpoints are ring atoms,
        # the bridge itself is not a cycle edge
        mol = parse_smiles("C1CC1C2CC2")
        assert ring_atoms(mol) == {0, 1, 2, 3, 4, 5}

    def test_disconnected_fragments(self):
        members = ring_atoms(parse_smiles("C1CC1.CC"))
        assert members == {0, 1, 2}
