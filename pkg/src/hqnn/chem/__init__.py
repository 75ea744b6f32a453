from .fingerprint import Fingerprint, circular_fingerprint, fnv1a64, tanimoto
from .scaffold import EMPTY_SCAFFOLD_KEY, murcko_atom_indices, murcko_scaffold, scaffold_key
from .smiles import AROMATIC, DOUBLE, SINGLE, TRIPLE, Atom, Bond, Molecule, parse_smiles

__all__ = [
    "AROMATIC",
    "Atom",
    "Bond",
    "DOUBLE",
    "EMPTY_SCAFFOLD_KEY",
    "Fingerprint",
    "Molecule",
    "SINGLE",
    "TRIPLE",
    "circular_fingerprint",
    "fnv1a64",
    "murcko_atom_indices",
    "murcko_scaffold",
    "parse_smiles",
    "scaffold_key",
    "tanimoto",
]
