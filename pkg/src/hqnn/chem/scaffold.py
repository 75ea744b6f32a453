"""Approximate Murcko scaffolds and permutation-invariant scaffold keys.

Keys hash the sorted round-3 atom identifiers of the scaffold graph.
Isomorphic scaffolds always share a key; distinct scaffolds may collide,
which is harmless for fold stratification.
"""

from __future__ import annotations

from .fingerprint import _signed, fnv1a64, refine
from .smiles import Molecule

EMPTY_SCAFFOLD_KEY = 0
KEY_ROUNDS = 3


def murcko_atom_indices(mol: Molecule) -> list:
    """Atoms surviving repeated removal of non-ring atoms with degree <= 1."""
    n = len(mol.atoms)
    alive = [True] * n
    deg = [mol.degree(i) for i in range(n)]
    stack = [i for i in range(n) if deg[i] <= 1]
    while stack:
        i = stack.pop()
        if not alive[i] or deg[i] > 1:
            continue
        alive[i] = False
        for j, _ in mol.neighbors(i):
            if alive[j]:
                deg[j] -= 1
                if deg[j] <= 1:
                    stack.append(j)
    return [i for i in range(n) if alive[i]]


def murcko_scaffold(mol: Molecule) -> Molecule:
    return mol.subgraph(murcko_atom_indices(mol))


def graph_key(mol: Molecule, rounds: int = KEY_ROUNDS) -> int:
    if len(mol.atoms) == 0:
        return EMPTY_SCAFFOLD_KEY
    ids = sorted(_signed(i) for i in refine(mol, rounds)[-1])
    key = fnv1a64([len(mol.atoms), len(mol.bonds), *ids])
    return key if key != EMPTY_SCAFFOLD_KEY else 1


def scaffold_key(mol: Molecule) -> int:
    """Unsigned 64-bit key of the Murcko scaffold; 0 for acyclic molecules."""
    return graph_key(murcko_scaffold(mol))
