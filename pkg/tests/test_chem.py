from importlib import resources

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hqnn.chem import (
    AROMATIC,
    DOUBLE,
    EMPTY_SCAFFOLD_KEY,
    SINGLE,
    Atom,
    Bond,
    Molecule,
    circular_fingerprint,
    fnv1a64,
    murcko_atom_indices,
    murcko_scaffold,
    parse_smiles,
    scaffold_key,
    tanimoto,
)
from hqnn.errors import ConfigurationError, ParseError

from . import oracles


def corpus(name):
    text = resources.files("hqnn.resources").joinpath(name).read_text()
    return [ln.rstrip("\n") for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]


VALID = corpus("smiles_valid.smi")
MALFORMED = corpus("smiles_malformed.txt")


def permuted(mol, rng):
    perm = rng.permutation(len(mol.atoms))  # new index of each old atom
    atoms = [None] * len(mol.atoms)
    for old, new in enumerate(perm):
        atoms[new] = mol.atoms[old]
    bonds = [Bond(int(perm[b.a]), int(perm[b.b]), b.order) for b in mol.bonds]
    rng.shuffle(bonds)
    return Molecule(atoms, bonds)


def test_parse_examples():
    m = parse_smiles("CCO")
    assert len(m.atoms) == 3 and len(m.bonds) == 2
    assert all(b.order == SINGLE for b in m.bonds)
    assert [a.hcount for a in m.atoms] == [3, 2, 1]
    ring = parse_smiles("C1CC1")
    assert len(ring.atoms) == 3 and len(ring.bonds) == 3
    benzene = parse_smiles("c1ccccc1")
    assert all(a.aromatic for a in benzene.atoms) and len(benzene.bonds) == 6
    assert all(b.order == AROMATIC for b in benzene.bonds)
    assert [a.hcount for a in benzene.atoms] == [1] * 6


def test_parse_details():
    m = parse_smiles("C[NH3+]")
    assert m.atoms[1].charge == 1 and m.atoms[1].hcount == 3 and m.atoms[1].bracket
    acid = parse_smiles("CC(=O)O")
    assert [b.order for b in acid.bonds] == [SINGLE, DOUBLE, SINGLE]
    assert [a.hcount for a in acid.atoms] == [3, 0, 0, 1]
    assert parse_smiles("[13CH4]").atoms[0].isotope == 13
    assert parse_smiles("c1cc[nH]c1").atoms[3].hcount == 1
    assert len(parse_smiles("[Na+].[Cl-]").bonds) == 0
    # stereo marks are accepted and ignored
    assert len(parse_smiles("F/C=C\\F").bonds) == 3
    assert parse_smiles("N[C@@H](C)C(=O)O").atoms[1].hcount == 1
    assert len(parse_smiles(b"CCN").atoms) == 3
    assert len(parse_smiles("  CCN \n").atoms) == 3


def test_corpus_sizes():
    assert len(VALID) >= 50 and len(MALFORMED) >= 20


@pytest.mark.parametrize("smiles", VALID)
def test_valid_corpus_parses(smiles):
    mol = parse_smiles(smiles)
    assert len(mol.atoms) > 0


@pytest.mark.parametrize("smiles", MALFORMED)
def test_malformed_corpus_rejected(smiles):
    with pytest.raises(ParseError) as info:
        parse_smiles(smiles)
    err = info.value
    assert 0 <= err.offset <= len(smiles)
    assert f"offset {err.offset}" in str(err)


def test_error_offsets():
    with pytest.raises(ParseError) as info:
        parse_smiles("CC$C")
    assert info.value.offset == 2
    with pytest.raises(ParseError) as info:
        parse_smiles("C1CC")
    assert info.value.offset == 1


@settings(max_examples=300, deadline=None)
@given(st.binary(max_size=40))
def test_parser_total_on_bytes(raw):
    try:
        parse_smiles(raw)
    except ParseError:
        pass


@settings(max_examples=300, deadline=None)
@given(st.text(alphabet="CNOScnos()[]=#@+-123%.0H/\\:lBr*", max_size=30))
def test_parser_total_on_smiles_alphabet(text):
    try:
        mol = parse_smiles(text)
    except ParseError:
        return
    assert all(a.hcount >= 0 for a in mol.atoms)


@pytest.mark.parametrize("smiles", VALID)
def test_ring_bonds_match_bfs_oracle(smiles):
    mol = parse_smiles(smiles)
    bonds = [(b.a, b.b) for b in mol.bonds]
    assert mol.ring_bonds() == oracles.ring_bonds_bfs(len(mol.atoms), bonds)


def test_molecule_validation():
    a = Atom("C")
    with pytest.raises(ValueError):
        Molecule([a, a], [Bond(0, 0, SINGLE)])
    with pytest.raises(ValueError):
        Molecule([a, a], [Bond(0, 1, SINGLE), Bond(1, 0, SINGLE)])
    with pytest.raises(ValueError):
        Molecule([a, a], [Bond(0, 1, AROMATIC)])


def test_fnv_reference_values():
    # FNV-1a 64 over the empty input is the offset basis
    assert fnv1a64([]) == 0xCBF29CE484222325
    assert fnv1a64([1]) != fnv1a64([2])


def test_fingerprint_determinism_and_equivalence():
    a = circular_fingerprint(parse_smiles("CCO"))
    assert a == circular_fingerprint(parse_smiles("CCO"))
    assert a == circular_fingerprint(parse_smiles("OCC"))
    assert a != circular_fingerprint(parse_smiles("CCN"))
    assert tanimoto(a, a) == 1.0
    assert 0 < a.popcount() <= 1024
    assert a.as_array().shape == (1024,)
    with pytest.raises(ConfigurationError):
        circular_fingerprint(parse_smiles("C"), nbits=1000)


@pytest.mark.parametrize("smiles", VALID[::3])
def test_fingerprint_permutation_invariance(smiles):
    mol = parse_smiles(smiles)
    rng = np.random.default_rng(len(smiles))
    fp = circular_fingerprint(mol, 3, 2048)
    for _ in range(3):
        assert circular_fingerprint(permuted(mol, rng), 3, 2048) == fp
    assert scaffold_key(permuted(mol, rng)) == scaffold_key(mol)


def test_scaffold_examples():
    scaf = murcko_scaffold(parse_smiles("CCc1ccccc1"))
    assert len(scaf.atoms) == 6 and all(a.aromatic for a in scaf.atoms)
    assert len(murcko_scaffold(parse_smiles("CCO")).atoms) == 0
    benzene = parse_smiles("c1ccccc1")
    assert murcko_atom_indices(benzene) == list(range(6))
    # linker between two rings survives
    assert len(murcko_scaffold(parse_smiles("c1ccccc1CCc1ccccc1")).atoms) == 14


def test_scaffold_keys():
    assert scaffold_key(parse_smiles("CCc1ccccc1")) == scaffold_key(parse_smiles("c1ccccc1CC"))
    assert scaffold_key(parse_smiles("CCc1ccccc1")) == scaffold_key(parse_smiles("c1ccccc1"))
    assert scaffold_key(parse_smiles("CCO")) == EMPTY_SCAFFOLD_KEY
    assert scaffold_key(parse_smiles("CCCN")) == EMPTY_SCAFFOLD_KEY
    assert scaffold_key(parse_smiles("c1ccccc1")) != scaffold_key(parse_smiles("C1CCCCC1"))


@pytest.mark.parametrize("smiles", VALID)
def test_scaffold_idempotent_subgraph(smiles):
    mol = parse_smiles(smiles)
    keep = murcko_atom_indices(mol)
    scaf = murcko_scaffold(mol)
    assert murcko_atom_indices(scaf) == list(range(len(scaf.atoms)))
    assert scaffold_key(scaf) == scaffold_key(mol)
    # subgraph: element sequence and bonds are drawn from the original
    assert [a.element for a in scaf.atoms] == [mol.atoms[i].element for i in keep]
    orig = {(min(b.a, b.b), max(b.a, b.b), b.order) for b in mol.bonds}
    for b in scaf.bonds:
        i, j = keep[b.a], keep[b.b]
        assert (min(i, j), max(i, j), b.order) in orig
