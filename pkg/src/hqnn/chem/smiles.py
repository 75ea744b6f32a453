"""SMILES subset parser producing a heavy-atom molecular graph.

Supported: organic-subset atoms (B C N O P S F Cl Br I, aromatic b c n o s p),
bracket atoms with isotope, chirality (ignored), H count, charge and atom
class, bonds ``- = # :`` plus ``/ \\`` (read as single), branches, ring
closures ``0-9`` and ``%nn``, and ``.`` for disconnected fragments.

Hydrogens of organic-subset atoms are implicit and filled to the lowest
standard valence that fits; bracket atoms carry exactly the H count given.
Aromaticity comes from lowercase symbols only; nothing is perceived or
kekulized.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Union

from ..errors import ParseError

SINGLE, DOUBLE, TRIPLE, AROMATIC = 1, 2, 3, 4
_BOND_SYMBOLS = {"-": SINGLE, "=": DOUBLE, "#": TRIPLE, ":": AROMATIC, "/": SINGLE, "\\": SINGLE}

ELEMENTS = (
    "H He Li Be B C N O F Ne Na Mg Al Si P S Cl Ar K Ca Sc Ti V Cr Mn Fe Co Ni Cu Zn Ga Ge As Se Br Kr "
    "Rb Sr Y Zr Nb Mo Tc Ru Rh Pd Ag Cd In Sn Sb Te I Xe Cs Ba La Ce Pr Nd Pm Sm Eu Gd Tb Dy Ho Er Tm Yb "
    "Lu Hf Ta W Re Os Ir Pt Au Hg Tl Pb Bi Po At Rn Fr Ra Ac Th Pa U Np Pu Am Cm Bk Cf Es Fm Md No Lr Rf "
    "Db Sg Bh Hs Mt Ds Rg Cn Nh Fl Mc Lv Ts Og"
).split()
ATOMIC_NUMBER = {sym: i + 1 for i, sym in enumerate(ELEMENTS)}

ORGANIC_VALENCES = {
    "B": (3,),
    "C": (4,),
    "N": (3, 5),
    "O": (2,),
    "P": (3, 5),
    "S": (2, 4, 6),
    "F": (1,),
    "Cl": (1,),
    "Br": (1,),
    "I": (1,),
}
_AROMATIC_ORGANIC = {"b": "B", "c": "C", "n": "N", "o": "O", "s": "S", "p": "P"}
_AROMATIC_BRACKET = {**_AROMATIC_ORGANIC, "se": "Se", "as": "As", "te": "Te"}


@dataclass(frozen=True)
class Atom:
    element: str
    charge: int = 0
    hcount: int = 0
    aromatic: bool = False
    isotope: Optional[int] = None
    bracket: bool = False

    @property
    def atomic_number(self) -> int:
        return ATOMIC_NUMBER[self.element]


@dataclass(frozen=True)
class Bond:
    a: int
    b: int
    order: int

    def other(self, i: int) -> int:
        return self.b if i == self.a else self.a


class Molecule:
    """Heavy-atom graph.  Atoms and bonds are immutable tuples."""

    def __init__(self, atoms: Iterable[Atom], bonds: Iterable[Bond]):
        self.atoms = tuple(atoms)
        self.bonds = tuple(bonds)
        n = len(self.atoms)
        self._adj = [[] for _ in range(n)]
        seen = set()
        for bond in self.bonds:
            if not (0 <= bond.a < n and 0 <= bond.b < n) or bond.a == bond.b:
                raise ValueError(f"invalid bond endpoints {bond.a}-{bond.b}")
            key = (min(bond.a, bond.b), max(bond.a, bond.b))
            if key in seen:
                raise ValueError(f"duplicate bond {key}")
            seen.add(key)
            if bond.order == AROMATIC and not (self.atoms[bond.a].aromatic and self.atoms[bond.b].aromatic):
                raise ValueError(f"aromatic bond {key} joins a non-aromatic atom")
            self._adj[bond.a].append((bond.b, bond.order))
            self._adj[bond.b].append((bond.a, bond.order))

    def __len__(self) -> int:
        return len(self.atoms)

    def __repr__(self) -> str:
        return f"Molecule({len(self.atoms)} atoms, {len(self.bonds)} bonds)"

    def neighbors(self, i: int) -> list:
        """``(neighbor index, bond order)`` pairs."""
        return self._adj[i]

    def degree(self, i: int) -> int:
        return len(self._adj[i])

    def ring_bonds(self) -> set:
        """Bonds lying on a cycle, i.e. every non-bridge edge."""
        n = len(self.atoms)
        disc = [-1] * n
        low = [0] * n
        bridges = set()
        timer = 0
        for root in range(n):
            if disc[root] != -1:
                continue
            disc[root] = low[root] = timer
            timer += 1
            stack = [(root, -1, iter(self._adj[root]))]
            while stack:
                v, parent, it = stack[-1]
                advanced = False
                for w, _ in it:
                    if w == parent:
                        parent = -2  # skip the tree edge once; parallel edges cannot occur
                        stack[-1] = (v, parent, it)
                        continue
                    if disc[w] == -1:
                        disc[w] = low[w] = timer
                        timer += 1
                        stack.append((w, v, iter(self._adj[w])))
                        advanced = True
                        break
                    low[v] = min(low[v], disc[w])
                if advanced:
                    continue
                stack.pop()
                if stack:
                    u = stack[-1][0]
                    low[u] = min(low[u], low[v])
                    if low[v] > disc[u]:
                        bridges.add((min(u, v), max(u, v)))
        return {
            (min(b.a, b.b), max(b.a, b.b))
            for b in self.bonds
            if (min(b.a, b.b), max(b.a, b.b)) not in bridges
        }

    def ring_atoms(self) -> set:
        return {i for pair in self.ring_bonds() for i in pair}

    def subgraph(self, indices: Iterable[int]) -> "Molecule":
        """Induced subgraph; implicit hydrogens of organic atoms are recomputed."""
        keep = sorted(set(indices))
        remap = {old: new for new, old in enumerate(keep)}
        bonds = [
            Bond(remap[b.a], remap[b.b], b.order) for b in self.bonds if b.a in remap and b.b in remap
        ]
        atoms = []
        for old in keep:
            atom = self.atoms[old]
            if not atom.bracket:
                base = sum(
                    _valence_contribution(o) for j, o in self._adj[old] if j in remap
                )
                atom = Atom(atom.element, atom.charge, _implicit_h(atom, base), atom.aromatic)
            atoms.append(atom)
        return Molecule(atoms, bonds)


def _valence_contribution(order: int) -> int:
    return 1 if order == AROMATIC else order


def _implicit_h(atom: Atom, base: int) -> int:
    """Implicit H for an organic-subset atom whose bonds sum to ``base``; -1 on overflow."""
    valences = ORGANIC_VALENCES[atom.element]
    if base > valences[-1]:
        return -1
    if atom.aromatic:
        return max(0, valences[0] - base - 1)
    return next(v for v in valences if v >= base) - base


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


class _Parser:
    def __init__(self, text: str):
        self.s = text
        self.i = 0
        self.atoms: list[Atom] = []
        self.atom_offsets: list[int] = []
        self.bonds: dict[tuple, int] = {}

    def error(self, message: str, offset: Optional[int] = None):
        return ParseError(message, self.i if offset is None else offset, self.s)

    def add_bond(self, a: int, b: int, order: Optional[int], offset: int) -> None:
        if a == b:
            raise self.error("ring closure bonds an atom to itself", offset)
        key = (min(a, b), max(a, b))
        if key in self.bonds:
            raise self.error("duplicate bond between the same atoms", offset)
        both_aromatic = self.atoms[a].aromatic and self.atoms[b].aromatic
        if order is None:
            order = AROMATIC if both_aromatic else SINGLE
        elif order == AROMATIC and not both_aromatic:
            raise self.error("aromatic bond between non-aromatic atoms", offset)
        self.bonds[key] = order

    def parse_bracket(self) -> Atom:
        s, start = self.s, self.i
        self.i += 1  # '['
        j = self.i
        while j < len(s) and s[j].isdigit():
            j += 1
        isotope = int(s[self.i : j]) if j > self.i else None
        self.i = j
        # element symbol
        aromatic = False
        element = None
        for width in (2, 1):
            cand = s[self.i : self.i + width]
            if len(cand) != width:
                continue
            if cand in _AROMATIC_BRACKET:
                element, aromatic = _AROMATIC_BRACKET[cand], True
            elif cand in ATOMIC_NUMBER and cand[0].isupper():
                element = cand
            if element is not None:
                self.i += width
                break
        if element is None:
            raise self.error("unknown atom symbol in bracket atom")
        # chirality: @, @@, @TH1, @SP2 ...
        if self.i < len(s) and s[self.i] == "@":
            self.i += 1
            if self.i < len(s) and s[self.i] == "@":
                self.i += 1
            elif s[self.i : self.i + 2] in ("TH", "AL", "SP", "TB", "OH"):
                self.i += 2
                while self.i < len(s) and s[self.i].isdigit():
                    self.i += 1
        hcount = 0
        if self.i < len(s) and s[self.i] == "H":
            self.i += 1
            hcount = 1
            if self.i < len(s) and s[self.i].isdigit():
                hcount = int(s[self.i])
                self.i += 1
        charge = 0
        if self.i < len(s) and s[self.i] in "+-":
            sign = 1 if s[self.i] == "+" else -1
            self.i += 1
            if self.i < len(s) and s[self.i].isdigit():
                j = self.i
                while j < len(s) and s[j].isdigit() and j - self.i < 2:
                    j += 1
                charge = sign * int(s[self.i : j])
                self.i = j
            else:
                charge = sign
                while self.i < len(s) and s[self.i] == ("+" if sign > 0 else "-"):
                    charge += sign
                    self.i += 1
        if self.i < len(s) and s[self.i] == ":":
            j = self.i + 1
            while j < len(s) and s[j].isdigit():
                j += 1
            if j == self.i + 1:
                raise self.error("atom class needs digits")
            self.i = j
        if self.i >= len(s) or s[self.i] != "]":
            raise self.error("unterminated or malformed bracket atom", start if self.i >= len(s) else self.i)
        self.i += 1
        return Atom(element, charge, hcount, aromatic, isotope, bracket=True)

    def parse_organic(self) -> Optional[Atom]:
        s = self.s
        two = s[self.i : self.i + 2]
        if two in ("Cl", "Br"):
            self.i += 2
            return Atom(two)
        c = s[self.i]
        if c in ORGANIC_VALENCES:
            self.i += 1
            return Atom(c)
        if c in _AROMATIC_ORGANIC:
            self.i += 1
            return Atom(_AROMATIC_ORGANIC[c], aromatic=True)
        return None

    def parse(self) -> Molecule:
        s = self.s
        if not s:
            raise self.error("empty SMILES", 0)
        prev: Optional[int] = None
        pending: Optional[tuple] = None  # (order, offset)
        branches: list[tuple] = []  # (atom index, offset of '(')
        rings: dict[int, tuple] = {}  # number -> (atom, order, offset)
        while self.i < len(s):
            c = s[self.i]
            off = self.i
            if c == "[" or c.isalpha():
                atom = self.parse_bracket() if c == "[" else self.parse_organic()
                if atom is None:
                    raise self.error("unknown atom symbol", off)
                idx = len(self.atoms)
                self.atoms.append(atom)
                self.atom_offsets.append(off)
                if prev is not None:
                    self.add_bond(prev, idx, pending[0] if pending else None, off)
                elif pending is not None:
                    raise self.error("bond symbol with no preceding atom", pending[1])
                pending = None
                prev = idx
            elif c in _BOND_SYMBOLS:
                if pending is not None:
                    raise self.error("two consecutive bond symbols", off)
                if prev is None:
                    raise self.error("bond symbol with no preceding atom", off)
                pending = (_BOND_SYMBOLS[c], off)
                self.i += 1
            elif c == "(":
                if prev is None:
                    raise self.error("branch opened before any atom", off)
                if pending is not None:
                    raise self.error("bond symbol before branch", pending[1])
                branches.append((prev, off))
                self.i += 1
                if self.i < len(s) and s[self.i] == ")":
                    raise self.error("empty branch", off)
            elif c == ")":
                if not branches:
                    raise self.error("unmatched closing parenthesis", off)
                if pending is not None:
                    raise self.error("dangling bond at end of branch", pending[1])
                prev = branches.pop()[0]
                self.i += 1
            elif c.isdigit() or c == "%":
                if prev is None:
                    raise self.error("ring closure before any atom", off)
                if c == "%":
                    digits = s[self.i + 1 : self.i + 3]
                    if len(digits) != 2 or not digits.isdigit():
                        raise self.error("'%' must be followed by two digits", off)
                    num = int(digits)
                    self.i += 3
                else:
                    num = int(c)
                    self.i += 1
                order = pending[0] if pending else None
                pending = None
                if num in rings:
                    other, order0, off0 = rings.pop(num)
                    if order is not None and order0 is not None and order != order0:
                        raise self.error("conflicting bond orders on ring closure", off)
                    self.add_bond(other, prev, order if order is not None else order0, off)
                else:
                    rings[num] = (prev, order, off)
            elif c == ".":
                if pending is not None:
                    raise self.error("bond symbol before '.'", pending[1])
                if prev is None:
                    raise self.error("'.' with no preceding atom", off)
                prev = None
                self.i += 1
            else:
                raise self.error(f"unexpected character {c!r}", off)
        if pending is not None:
            raise self.error("dangling bond at end of input", pending[1])
        if branches:
            raise self.error("unmatched opening parenthesis", branches[-1][1])
        if rings:
            num, (_, _, off) = min(rings.items(), key=lambda kv: kv[1][2])
            raise self.error(f"unclosed ring bond {num}", off)
        if prev is None:
            raise self.error("SMILES ends with '.'", len(s) - 1)
        return self.finish()

    def finish(self) -> Molecule:
        base = [0] * len(self.atoms)
        for (a, b), order in self.bonds.items():
            base[a] += _valence_contribution(order)
            base[b] += _valence_contribution(order)
        atoms = []
        for i, atom in enumerate(self.atoms):
            if not atom.bracket:
                h = _implicit_h(atom, base[i])
                if h < 0:
                    raise self.error(f"valence overflow on {atom.element} ({base[i]} bonds)", self.atom_offsets[i])
                atom = Atom(atom.element, atom.charge, h, atom.aromatic)
            atoms.append(atom)
        bonds = [Bond(a, b, o) for (a, b), o in sorted(self.bonds.items())]
        return Molecule(atoms, bonds)


def parse_smiles(text: Union[str, bytes]) -> Molecule:
    """Parse ``text`` or raise :class:`ParseError` with the offending offset."""
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("ascii")
        except UnicodeDecodeError as exc:
            raise ParseError("non-ASCII byte in SMILES", exc.start) from None
    if not isinstance(text, str):
        raise ParseError(f"expected str or bytes, got {type(text).__name__}", 0)
    stripped = text.strip()
    lead = len(text) - len(text.lstrip())
    for k, ch in enumerate(stripped):
        if ord(ch) > 127 or ch.isspace() or not ch.isprintable():
            raise ParseError(f"invalid character {ch!r} in SMILES", lead + k, text)
    try:
        return _Parser(stripped).parse()
    except ParseError as exc:
        if lead:
            raise ParseError(str(exc).rsplit(" at offset", 1)[0], exc.offset + lead, text) from None
        raise
