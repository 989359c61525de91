"""Folded circular (Morgan-style) fingerprints over the parsed graph.

Atom environments grow outward by bond radius; each round hashes the atom's
previous identifier together with the sorted (bond type, neighbor identifier)
pairs, and every identifier seen in any round sets one bit after folding
modulo the bit count. Identifiers depend only on the graph, not on atom
input order, so any atom-ordering of the same molecule yields the same bits.
"""

from __future__ import annotations

from .smiles import Molecule, ring_atoms

_GOLDEN = 0x9E3779B9
_MASK = 0xFFFFFFFF

BOND_INVARIANTS = {1.0: 1, 2.0: 2, 3.0: 3, 1.5: 12}


def hash_combine(seed: int, value: int) -> int:
    """32-bit boost-style hash combine."""
    seed &= _MASK
    value &= _MASK
    seed ^= (value + _GOLDEN + ((seed << 6) & _MASK) + (seed >> 2)) & _MASK
    return seed & _MASK


def hash_sequence(values) -> int:
    h = 0
    for v in values:
        h = hash_combine(h, v)
    return h


def atom_invariants(mol: Molecule) -> list:
    """Initial per-atom identifiers from local chemistry only."""
    in_ring = ring_atoms(mol)
    degree = [0] * len(mol.atoms)
    for bond in mol.bonds:
        degree[bond.a] += 1
        degree[bond.b] += 1
    out = []
    for atom in mol.atoms:
        components = (
            atom.atomic_number,
            degree[atom.index],
            atom.implicit_h,
            atom.charge & _MASK,
            atom.isotope,
            1 if atom.index in in_ring else 0,
        )
        out.append(hash_sequence(components))
    return out


def morgan_bits(mol: Molecule, radius: int, nbits: int) -> list:
    """Sorted set-bit indices of the folded fingerprint."""
    if radius < 1:
        raise ValueError("radius must be >= 1")
    if nbits < 2 or nbits & (nbits - 1):
        raise ValueError("nbits must be a positive power of two")
    current = atom_invariants(mol)
    seen = set(current)
    neighbor_table = [mol.neighbors(i) for i in range(len(mol.atoms))]
    for layer in range(radius):
        nxt = [0] * len(mol.atoms)
        for i in range(len(mol.atoms)):
            pairs = sorted(
                (BOND_INVARIANTS[bond.order], current[j])
                for j, bond in neighbor_table[i]
            )
            h = hash_combine(layer, current[i])
            for bond_inv, neigh_inv in pairs:
                h = hash_combine(h, hash_combine(bond_inv, neigh_inv))
            nxt[i] = h
            seen.add(h)
        current = nxt
    return sorted({h % nbits for h in seen})
