"""ECFP-style hashed circular fingerprints.

Identifiers are 64-bit FNV-1a hashes (offset basis 0xcbf29ce484222325,
prime 0x100000001b3) over little-endian signed 64-bit integer words, so
bits are identical across platforms and Python versions.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError
from .smiles import Molecule

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK = (1 << 64) - 1


def fnv1a64(words) -> int:
    h = FNV_OFFSET
    for byte in struct.pack(f"<{len(words)}q", *words):
        h = ((h ^ byte) * FNV_PRIME) & _MASK
    return h


def _signed(h: int) -> int:
    return h - (1 << 64) if h >= 1 << 63 else h


def atom_invariants(mol: Molecule) -> list:
    ring = mol.ring_atoms()
    out = []
    for i, atom in enumerate(mol.atoms):
        words = (atom.atomic_number, mol.degree(i), atom.charge, atom.hcount, int(atom.aromatic), int(i in ring))
        out.append(fnv1a64(words))
    return out


def refine(mol: Molecule, rounds: int) -> list:
    """Atom identifiers for rounds 0..``rounds``; each round folds in neighbours."""
    ids = atom_invariants(mol)
    history = [ids]
    for r in range(1, rounds + 1):
        prev = history[-1]
        nxt = []
        for i in range(len(mol.atoms)):
            env = sorted((order, _signed(prev[j])) for j, order in mol.neighbors(i))
            words = [r, _signed(prev[i])]
            for order, ident in env:
                words += [order, ident]
            nxt.append(fnv1a64(words))
        history.append(nxt)
    return history


@dataclass(frozen=True)
class Fingerprint:
    bits: np.ndarray
    nbits: int
    radius: int

    def popcount(self) -> int:
        return int(self.bits.sum())

    def as_array(self) -> np.ndarray:
        return self.bits.astype(np.float64)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Fingerprint)
            and self.nbits == other.nbits
            and self.radius == other.radius
            and bool(np.array_equal(self.bits, other.bits))
        )

    __hash__ = None


def tanimoto(a: Fingerprint, b: Fingerprint) -> float:
    inter = int(np.sum(a.bits & b.bits))
    union = int(np.sum(a.bits | b.bits))
    return 1.0 if union == 0 else inter / union


def circular_fingerprint(mol: Molecule, radius: int = 3, nbits: int = 1024) -> Fingerprint:
    if nbits < 1 or nbits & (nbits - 1):
        raise ConfigurationError(f"nbits must be a power of two, got {nbits}")
    if radius < 0:
        raise ConfigurationError(f"radius must be >= 0, got {radius}")
    bits = np.zeros(nbits, dtype=bool)
    for ids in refine(mol, radius):
        for ident in ids:
            bits[ident & (nbits - 1)] = True
    bits.setflags(write=False)
    return Fingerprint(bits, nbits, radius)
