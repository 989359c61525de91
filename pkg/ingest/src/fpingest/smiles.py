"""A compact SMILES parser producing a molecular graph.

Covers the subset needed for drug-like molecules: the organic subset with
implicit hydrogens, bracket atoms (isotope, charge, explicit H counts),
single/double/triple/aromatic bonds, ring closures (including %nn), branches,
and dot-separated fragments. Stereo markers (@, @@, /, \\) are parsed and
ignored; aromatic forms are taken as written rather than re-perceived, so
inputs should use either aromatic or Kekule notation consistently.
"""

from __future__ import annotations

from dataclasses import dataclass, field

ATOMIC_NUMBERS = {
    "H": 1, "He": 2, "Li": 3, "Be": 4, "B": 5, "C": 6, "N": 7, "O": 8,
    "F": 9, "Ne": 10, "Na": 11, "Mg": 12, "Al": 13, "Si": 14, "P": 15,
    "S": 16, "Cl": 17, "Ar": 18, "K": 19, "Ca": 20, "Fe": 26, "Cu": 29,
    "Zn": 30, "As": 33, "Se": 34, "Br": 35, "I": 53,
}

# organic subset: atoms that may appear without brackets, and their
# default valences (in increasing order where several are allowed)
ORGANIC_VALENCES = {
    "B": (3,), "C": (4,), "N": (3, 5), "O": (2,), "P": (3, 5),
    "S": (2, 4, 6), "F": (1,), "Cl": (1,), "Br": (1,), "I": (1,),
}

AROMATIC_ORGANIC = {"b", "c", "n", "o", "p", "s"}

BOND_ORDERS = {"-": 1, "=": 2, "#": 3, ":": 1.5, "/": 1, "\\": 1}


class SmilesError(ValueError):
    """Input is not parseable with the supported SMILES subset."""


@dataclass
class Atom:
    symbol: str            # element symbol, capitalized
    aromatic: bool = False
    charge: int = 0
    isotope: int = 0
    explicit_h: int | None = None   # from brackets; None = infer
    index: int = 0
    implicit_h: int = 0

    @property
    def atomic_number(self) -> int:
        return ATOMIC_NUMBERS[self.symbol]


@dataclass
class Bond:
    a: int
    b: int
    order: float  # 1, 2, 3, or 1.5 for aromatic

    @property
    def aromatic(self) -> bool:
        return self.order == 1.5


@dataclass
class Molecule:
    atoms: list = field(default_factory=list)
    bonds: list = field(default_factory=list)

    def neighbors(self, idx: int):
        out = []
        for bond in self.bonds:
            if bond.a == idx:
                out.append((bond.b, bond))
            elif bond.b == idx:
                out.append((bond.a, bond))
        return out


def _parse_bracket_atom(text: str, pos: int):
    """Parse the body of [...]; `pos` sits after the opening bracket."""
    end = text.find("]", pos)
    if end < 0:
        raise SmilesError(f"unclosed bracket atom at position {pos}")
    body = text[pos:end]
    i = 0
    isotope = 0
    while i < len(body) and body[i].isdigit():
        isotope = isotope * 10 + int(body[i])
        i += 1
    if i >= len(body):
        raise SmilesError(f"bracket atom missing element symbol: [{body}]")
    # element symbol: one or two letters; lowercase first letter = aromatic
    aromatic = body[i].islower()
    if i + 1 < len(body) and body[i].isalpha() and body[i + 1].isalpha() \
            and body[i + 1].islower() and body[i:i + 2].capitalize() in ATOMIC_NUMBERS:
        symbol = body[i:i + 2].capitalize()
        i += 2
    elif body[i].isalpha():
        symbol = body[i].capitalize()
        i += 1
    else:
        raise SmilesError(f"bad element in bracket atom: [{body}]")
    if symbol not in ATOMIC_NUMBERS:
        raise SmilesError(f"unknown element {symbol!r} in [{body}]")
    explicit_h = 0
    charge = 0
    while i < len(body):
        ch = body[i]
        if ch in ("@",):
            i += 1
            if i < len(body) and body[i] == "@":
                i += 1
        elif ch == "H":
            i += 1
            count = 0
            while i < len(body) and body[i].isdigit():
                count = count * 10 + int(body[i])
                i += 1
            explicit_h = count if count else 1
        elif ch in "+-":
            sign = 1 if ch == "+" else -1
            i += 1
            if i < len(body) and body[i].isdigit():
                num = 0
                while i < len(body) and body[i].isdigit():
                    num = num * 10 + int(body[i])
                    i += 1
                charge = sign * num
            else:
                charge = sign
                while i < len(body) and body[i] == ch:
                    charge += sign
                    i += 1
        elif ch == ":":
            i += 1
            while i < len(body) and body[i].isdigit():
                i += 1  # atom-map class, ignored
        else:
            raise SmilesError(f"unsupported bracket token {ch!r} in [{body}]")
    atom = Atom(symbol, aromatic=aromatic, charge=charge, isotope=isotope,
                explicit_h=explicit_h)
    return atom, end + 1


def parse_smiles(text: str) -> Molecule:
    """Parse one SMILES string; raises SmilesError on anything unsupported."""
    if not text or text.strip() != text or not text.strip():
        raise SmilesError("empty or whitespace-padded SMILES")
    mol = Molecule()
    stack = []
    prev: int | None = None
    pending_bond: float | None = None
    ring_open: dict = {}

    def add_atom(atom: Atom) -> int:
        atom.index = len(mol.atoms)
        mol.atoms.append(atom)
        return atom.index

    def bond_order(a_idx: int, b_idx: int, explicit: float | None) -> float:
        if explicit is not None:
            return explicit
        if mol.atoms[a_idx].aromatic and mol.atoms[b_idx].aromatic:
            return 1.5
        return 1.0

    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "[":
            atom, i = _parse_bracket_atom(text, i + 1)
            idx = add_atom(atom)
        elif ch.isalpha():
            two = text[i:i + 2]
            if two in ("Cl", "Br"):
                idx = add_atom(Atom(two))
                i += 2
            elif ch in AROMATIC_ORGANIC:
                idx = add_atom(Atom(ch.upper(), aromatic=True))
                i += 1
            elif ch.upper() in ORGANIC_VALENCES and ch.isupper():
                idx = add_atom(Atom(ch))
                i += 1
            else:
                raise SmilesError(f"atom {ch!r} needs brackets at position {i}")
        elif ch in BOND_ORDERS:
            if pending_bond is not None:
                raise SmilesError(f"two consecutive bond symbols at position {i}")
            pending_bond = BOND_ORDERS[ch]
            i += 1
            continue
        elif ch.isdigit() or ch == "%":
            if prev is None:
                raise SmilesError(f"ring closure before any atom at position {i}")
            if ch == "%":
                if i + 2 >= n or not text[i + 1:i + 3].isdigit():
                    raise SmilesError(f"malformed %nn ring closure at position {i}")
                ring_id = int(text[i + 1:i + 3])
                i += 3
            else:
                ring_id = int(ch)
                i += 1
            if ring_id in ring_open:
                other, other_bond = ring_open.pop(ring_id)
                if other == prev:
                    raise SmilesError(f"ring bond {ring_id} closes on its own atom")
                explicit = pending_bond if pending_bond is not None else other_bond
                if (pending_bond is not None and other_bond is not None
                        and pending_bond != other_bond):
                    raise SmilesError(f"conflicting bond orders on ring {ring_id}")
                mol.bonds.append(Bond(other, prev, bond_order(other, prev, explicit)))
            else:
                ring_open[ring_id] = (prev, pending_bond)
            pending_bond = None
            continue
        elif ch == "(":
            if prev is None:
                raise SmilesError("branch before any atom")
            stack.append(prev)
            i += 1
            continue
        elif ch == ")":
            if not stack:
                raise SmilesError(f"unmatched ')' at position {i}")
            prev = stack.pop()
            i += 1
            continue
        elif ch == ".":
            prev = None
            pending_bond = None
            i += 1
            continue
        else:
            raise SmilesError(f"unsupported character {ch!r} at position {i}")

        # common tail for any freshly added atom
        if prev is not None:
            mol.bonds.append(Bond(prev, idx, bond_order(prev, idx, pending_bond)))
        elif pending_bond is not None:
            raise SmilesError("dangling bond symbol before a fragment start")
        pending_bond = None
        prev = idx

    if stack:
        raise SmilesError("unclosed branch parenthesis")
    if ring_open:
        raise SmilesError(f"unclosed ring bonds: {sorted(ring_open)}")
    if pending_bond is not None:
        raise SmilesError("trailing bond symbol")
    if not mol.atoms:
        raise SmilesError("no atoms parsed")
    _assign_implicit_hydrogens(mol)
    return mol


def _assign_implicit_hydrogens(mol: Molecule) -> None:
    order_sum = [0.0] * len(mol.atoms)
    degree = [0] * len(mol.atoms)
    for bond in mol.bonds:
        for end in (bond.a, bond.b):
            order_sum[end] += bond.order
            degree[end] += 1
    for atom in mol.atoms:
        if atom.explicit_h is not None:
            atom.implicit_h = atom.explicit_h
            continue
        if atom.charge != 0:
            atom.implicit_h = 0
            continue
        valences = ORGANIC_VALENCES.get(atom.symbol)
        if valences is None:
            atom.implicit_h = 0
            continue
        if atom.aromatic:
            # lowercase atom: one valence slot belongs to the aromatic system
            atom.implicit_h = max(0, valences[0] - degree[atom.index] - 1)
        else:
            needed = order_sum[atom.index]
            for v in valences:
                if v >= needed - 1e-9:
                    atom.implicit_h = int(round(v - needed))
                    break
            else:
                atom.implicit_h = 0


def ring_atoms(mol: Molecule) -> set:
    """Indices of atoms on any cycle: endpoints of non-bridge edges."""
    adj = {i: [] for i in range(len(mol.atoms))}
    for k, bond in enumerate(mol.bonds):
        adj[bond.a].append((bond.b, k))
        adj[bond.b].append((bond.a, k))

    disc = {}
    low = {}
    bridges = set()
    timer = [0]

    def dfs(root):
        # iterative Tarjan bridge finding
        stack = [(root, -1, iter(adj[root]))]
        disc[root] = low[root] = timer[0]
        timer[0] += 1
        while stack:
            node, parent_edge, it = stack[-1]
            advanced = False
            for child, edge_id in it:
                if edge_id == parent_edge:
                    continue
                if child not in disc:
                    disc[child] = low[child] = timer[0]
                    timer[0] += 1
                    stack.append((child, edge_id, iter(adj[child])))
                    advanced = True
                    break
                low[node] = min(low[node], disc[child])
            if not advanced:
                stack.pop()
                if stack:
                    pnode = stack[-1][0]
                    low[pnode] = min(low[pnode], low[node])
                    if low[node] > disc[pnode]:
                        bridges.add(parent_edge)

    for i in range(len(mol.atoms)):
        if i not in disc:
            dfs(i)

    members = set()
    for k, bond in enumerate(mol.bonds):
        if k not in bridges:
            members.add(bond.a)
            members.add(bond.b)
    return members
