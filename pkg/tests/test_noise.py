import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hqnn.errors import DomainError, LoadError, ShapeError
from hqnn.noise import (
    DensityMatrix,
    KrausChannel,
    NoiseProfile,
    amplitude_damping_channel,
    apply_channel,
    damping_channels,
    depolarizing_channel,
    from_statevector,
    identity_channel,
    load_profiles,
    parse_profiles,
    phase_damping_channel,
    run_noisy_template,
    run_noisy_template_batch,
)
from hqnn.quantum import CircuitTemplate, StateVector, apply_ry, new_zero_state, run_template

from . import oracles

HEADER = "name,two_qubit_error,sx_error,readout_error,t1_seconds,t2_seconds,gate_time_seconds\n"
TABLE = {
    "IBM-Fez": (2.792e-3, 2.703e-4, 1.645e-2, 1.181e-4, 9.141e-5, 6.8e-8),
    "IBM-Marrakesh": (3.410e-3, 2.460e-4, 1.540e-2, 1.780e-4, 1.139e-4, 6.8e-8),
    "IBM-Torino": (6.250e-3, 3.508e-4, 2.000e-2, 1.661e-4, 1.358e-4, 6.8e-8),
    "IBM-Yonsei": (3.890e-2, 2.080e-2, 2.080e-2, 2.415e-4, 1.540e-4, 8.4e-8),
    "IBM-Brisbane": (1.650e-2, 2.549e-4, 1.440e-2, 2.239e-4, 1.395e-4, 6.6e-7),
    "IBM-Brussels": (2.860e-2, 2.822e-2, 2.420e-2, 2.667e-4, 1.222e-4, 6.6e-7),
    "IBM-Strasbourg": (2.910e-2, 2.649e-2, 1.840e-2, 2.665e-4, 1.488e-4, 6.6e-7),
}


def rand_state(n, rng):
    a = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return StateVector(n, a / np.linalg.norm(a))


def dm(matrix):
    n = int(round(math.log2(len(matrix))))
    return DensityMatrix(n, np.asarray(matrix, dtype=complex))


def test_from_statevector_examples():
    np.testing.assert_allclose(from_statevector(new_zero_state(1)).matrix, [[1, 0], [0, 0]])
    plus = apply_ry(new_zero_state(1), 0, math.pi / 2)
    np.testing.assert_allclose(from_statevector(plus).matrix, np.full((2, 2), 0.5), atol=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_pure_state_purity(n, seed):
    rho = from_statevector(rand_state(n, np.random.default_rng(seed)))
    assert abs(rho.purity() - 1) < 1e-12
    assert abs(rho.trace() - 1) < 1e-12


def test_depolarizing_zero_is_identity():
    ch = depolarizing_channel(0.0)
    assert len(ch.operators) == 1
    np.testing.assert_array_equal(ch.operators[0], np.eye(2))


@pytest.mark.parametrize("p", [0.0, 0.01, 2.703e-4, 0.3, 0.75, 1.0])
def test_depolarizing_scales_z(p):
    rng = np.random.default_rng(0)
    rho = from_statevector(rand_state(1, rng))
    out = apply_channel(rho, depolarizing_channel(p), [0])
    assert abs(out.expect_z(0) - (1 - 4 * p / 3) * rho.expect_z(0)) < 1e-10
    # brute-force Kraus sum agrees
    ref = oracles.kraus_apply(rho.matrix, oracles.pauli_depolarizing(p, 1), [0], 1)
    np.testing.assert_allclose(out.matrix, ref, atol=1e-14)


def test_depolarizing_monotone_in_p():
    rho = from_statevector(new_zero_state(1))
    zs = [abs(apply_channel(rho, depolarizing_channel(p), [0]).expect_z(0)) for p in np.linspace(0, 0.75, 16)]
    assert all(a > b for a, b in zip(zs, zs[1:]))


def test_two_qubit_depolarizing_matches_oracle():
    rng = np.random.default_rng(3)
    rho = oracles.random_density(3, rng)
    for qubits in ([0, 1], [2, 0], [1, 2]):
        out = apply_channel(dm(rho), depolarizing_channel(0.2, 2), qubits).matrix
        ref = oracles.kraus_apply(rho, oracles.pauli_depolarizing(0.2, 2), qubits, 3)
        np.testing.assert_allclose(out, ref, atol=1e-13)


def test_full_depolarizing_marginals():
    # complete depolarization of q0 in this convention is p = 3/4
    rng = np.random.default_rng(4)
    rho = dm(oracles.random_density(2, rng))
    out = apply_channel(rho, depolarizing_channel(0.75), [0]).matrix
    t = out.reshape(2, 2, 2, 2)
    marginal_q0 = np.einsum("iaja->ij", t)
    np.testing.assert_allclose(marginal_q0, np.eye(2) / 2, atol=1e-12)
    # a channel on q0 cannot change the marginal of q1, whatever p is
    for p in (0.3, 1.0):
        out = apply_channel(rho, depolarizing_channel(p), [0]).matrix
        np.testing.assert_allclose(
            oracles.partial_trace_first(out, 2), oracles.partial_trace_first(rho.matrix, 2), atol=1e-12
        )


def test_amplitude_damping_closed_form():
    one = dm(np.diag([0.0, 1.0]))
    for gamma in (0.0, 0.1, 0.5, 1.0):
        out = apply_channel(one, amplitude_damping_channel(gamma), [0])
        assert abs(out.expect_z(0) - (2 * gamma - 1)) < 1e-10


def test_phase_damping_keeps_diagonals():
    rng = np.random.default_rng(5)
    diag = dm(np.diag(rng.dirichlet(np.ones(4))))
    for q in (0, 1):
        out = apply_channel(diag, phase_damping_channel(0.4), [q])
        np.testing.assert_allclose(out.matrix, diag.matrix, atol=1e-15)


def test_identity_channel_is_noop():
    rho = dm(oracles.random_density(2, np.random.default_rng(6)))
    np.testing.assert_allclose(apply_channel(rho, identity_channel(), [1]).matrix, rho.matrix, atol=1e-15)
    np.testing.assert_allclose(apply_channel(rho, identity_channel(2), [1, 0]).matrix, rho.matrix, atol=1e-15)


def test_channel_validation():
    with pytest.raises(DomainError):
        KrausChannel((np.eye(2) * 1.1,), 1)
    with pytest.raises(DomainError):
        depolarizing_channel(1.5)
    with pytest.raises(ShapeError):
        apply_channel(dm(np.eye(4) / 4), depolarizing_channel(0.1, 2), [0])
    with pytest.raises(ShapeError):
        apply_channel(dm(np.eye(4) / 4), depolarizing_channel(0.1, 2), [1, 1])


def test_catalog_is_bit_exact():
    profiles = load_profiles()
    assert list(profiles) == list(TABLE)
    for name, values in TABLE.items():
        p = profiles[name]
        got = (p.two_qubit_error, p.sx_error, p.readout_error, p.t1_seconds, p.t2_seconds, p.gate_time_seconds)
        assert got == values


@pytest.mark.parametrize("name", list(TABLE))
def test_catalog_channels_are_cptp(name):
    p = load_profiles()[name]
    amp, phase = damping_channels(p)
    for ch in (amp, phase, depolarizing_channel(p.sx_error, 1), depolarizing_channel(p.two_qubit_error, 2)):
        dim = 2**ch.arity
        assert np.max(np.abs(ch.completeness() - np.eye(dim))) < 1e-12


def test_fez_gamma():
    fez = load_profiles()["IBM-Fez"]
    assert fez.gamma() == pytest.approx(1 - math.exp(-6.8e-8 / 1.181e-4), rel=1e-12)
    rate = 1 / 9.141e-5 - 1 / (2 * 1.181e-4)
    assert fez.lam() == pytest.approx(1 - math.exp(-6.8e-8 * rate), rel=1e-12)


def test_infinite_t1_gives_identity_damping():
    amp, phase = damping_channels(NoiseProfile.noiseless())
    np.testing.assert_allclose(amp.operators[0], np.eye(2))
    np.testing.assert_allclose(amp.operators[1], 0)
    np.testing.assert_allclose(phase.operators[0], np.eye(2))


def test_negative_dephasing_rate_clamped(caplog):
    p = NoiseProfile("edge", 0, 0, 0, 1e-4, 2e-4, 1e-7)
    with caplog.at_level(logging.WARNING):
        assert p.lam() == 0.0
    p = NoiseProfile("edge", 0, 0, 0, 1e-4, 1.9999e-4, 1e-7)
    assert p.lam() > 0


def test_profile_validation():
    with pytest.raises(DomainError):
        NoiseProfile("bad", 0, 0, 0, 1e-4, 3e-4, 1e-7)
    with pytest.raises(DomainError):
        NoiseProfile("bad", -0.1, 0, 0, 1e-4, 1e-4, 1e-7)
    with pytest.raises(DomainError):
        NoiseProfile("bad", 0, 0, 0, 0.0, 1e-4, 1e-7)


def test_parse_profiles_errors(caplog):
    with caplog.at_level(logging.WARNING):
        assert parse_profiles("") == {}
    assert "empty" in caplog.text
    with pytest.raises(LoadError, match="row 2, field 'sx_error'"):
        parse_profiles(HEADER + "X,0.1,abc,0,1e-4,1e-4,1e-7\n")
    with pytest.raises(LoadError, match="t2_seconds"):
        parse_profiles(HEADER + "X,0.1,0,0,1e-4,5e-4,1e-7\n")
    with pytest.raises(LoadError, match="duplicate"):
        parse_profiles(HEADER + "X,0,0,0,1e-4,1e-4,1e-7\nX,0,0,0,1e-4,1e-4,1e-7\n")
    with pytest.raises(LoadError, match="header"):
        parse_profiles("name,sx_error\nX,0\n")


def test_load_profiles_from_file(tmp_path):
    f = tmp_path / "cat.csv"
    f.write_text(HEADER + "Zero,0,0,0,inf,inf,1e-7\n")
    prof = load_profiles(f)["Zero"]
    assert prof.gamma() == 0 and prof.lam() == 0
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert load_profiles(empty) == {}


@pytest.mark.parametrize("n,d", [(1, 0), (1, 2), (2, 1), (3, 2), (4, 3), (5, 1)])
def test_noise_free_limit(n, d):
    rng = np.random.default_rng(n * 7 + d)
    t = CircuitTemplate(n, d)
    for _ in range(3):
        enc, par = rng.uniform(-3, 3, n), rng.uniform(-3, 3, n * d)
        assert abs(run_noisy_template(t, enc, par, NoiseProfile.noiseless()) - run_template(t, enc, par)) < 1e-10


def test_readout_only():
    for p in (0.0, 0.1, 0.25):
        prof = NoiseProfile("ro", 0, 0, p, math.inf, math.inf, 1e-7)
        assert run_noisy_template(CircuitTemplate(1, 0), [0.0], [], prof) == pytest.approx(1 - 2 * p, abs=1e-12)
        assert run_noisy_template(CircuitTemplate(3, 0), [0.0] * 3, [], prof) == pytest.approx(3 * (1 - 2 * p), abs=1e-12)
    quarter = NoiseProfile("ro", 0, 0, 0.25, math.inf, math.inf, 1e-7)
    assert run_noisy_template(CircuitTemplate(1, 0), [0.0], [], quarter) == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("name", ["IBM-Fez", "IBM-Yonsei", "IBM-Brussels"])
def test_noisy_template_matches_kraus_oracle(name):
    prof = load_profiles()[name]
    rng = np.random.default_rng(8)
    for n, d in ((2, 1), (3, 2)):
        enc, par = rng.uniform(-3, 3, n), rng.uniform(-3, 3, n * d)
        ref = oracles.noisy_expectation(
            n, d, enc, par, prof.sx_error, prof.two_qubit_error, prof.gamma(), prof.lam(), prof.readout_error
        )
        assert abs(run_noisy_template(CircuitTemplate(n, d), enc, par, prof) - ref) < 1e-10


def test_noisy_batch_matches_single():
    prof = load_profiles()["IBM-Torino"]
    t = CircuitTemplate(3, 1)
    rng = np.random.default_rng(9)
    enc, par = rng.uniform(-3, 3, (4, 3)), rng.uniform(-3, 3, 3)
    batch = run_noisy_template_batch(t, enc, par, prof)
    np.testing.assert_allclose(batch, [run_noisy_template(t, e, par, prof) for e in enc], atol=1e-14)


def random_channel(rng, names):
    kind = rng.choice(names)
    if kind == "dep1":
        return depolarizing_channel(rng.uniform(), 1)
    if kind == "dep2":
        return depolarizing_channel(rng.uniform(), 2)
    if kind == "amp":
        return amplitude_damping_channel(rng.uniform())
    return phase_damping_channel(rng.uniform())


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_channel_sequences_stay_physical(seed):
    rng = np.random.default_rng(seed)
    n = 3
    rho = from_statevector(rand_state(n, rng))
    for _ in range(20):
        ch = random_channel(rng, ["dep1", "dep2", "amp", "phase"])
        qubits = list(rng.choice(n, size=ch.arity, replace=False))
        rho = apply_channel(rho, ch, qubits)
        m = rho.matrix
        assert abs(np.trace(m) - 1) < 1e-10
        assert np.max(np.abs(m - m.conj().T)) < 1e-10
        assert np.min(np.linalg.eigvalsh(m)) > -1e-10
