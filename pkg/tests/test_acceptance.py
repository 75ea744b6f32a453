"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import time
from importlib import resources

import numpy as np
import pytest

from hqnn.chem import parse_smiles
from hqnn.dataset import Dataset, Row, stratified_kfold
from hqnn.errors import ParseError
from hqnn.hybrid import compose, hybrid_backward, hybrid_forward, train_hybrid
from hqnn.metrics import MetricsReport, mae, r2, relative_performance
from hqnn.nn import MlpModel, TrainConfig, train_mlp
from hqnn.noise import (
    DensityMatrix,
    NoiseProfile,
    amplitude_damping_channel,
    apply_channel,
    damping_channels,
    depolarizing_channel,
    from_statevector,
    load_profiles,
    run_noisy_template,
)
from hqnn.quantum import CircuitTemplate, StateVector, new_zero_state, run_template
from hqnn.vqr import VqrParams, param_shift_grad, vqr_forward

from . import oracles

PROFILE_NAMES = [
    "IBM-Fez",
    "IBM-Marrakesh",
    "IBM-Torino",
    "IBM-Yonsei",
    "IBM-Brisbane",
    "IBM-Brussels",
    "IBM-Strasbourg",
]


@pytest.fixture
def verdict(capsys):
    def emit(criterion: int, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\nC{criterion}: {'PASS' if ok else 'FAIL'} ({detail})")
        assert ok, detail

    return emit


def test_c01_gradient_exactness(verdict):
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst, count = 0.0, 0
    for n in (2, 3, 4):
        for d in (1, 2, 3):
            t = CircuitTemplate(n, d)
            for _ in range(12):
                x = rng.normal(scale=2.0, size=n)
                p = VqrParams(rng.uniform(-np.pi, np.pi, n * d))
                g = param_shift_grad(x, p, t)
                fd_p = oracles.central_diff(lambda a: vqr_forward(x, VqrParams(a), t), p.angles)
                fd_x = oracles.central_diff(lambda e: vqr_forward(e, p, t), x)
                worst = max(worst, oracles.rel_err(g.d_params, fd_p), oracles.rel_err(g.d_inputs, fd_x))
                count += 1
    elapsed = time.perf_counter() - start
    verdict(1, count >= 100 and worst < 1e-4 and elapsed < 60, f"{count} instances, max rel err {worst:.2e}, {elapsed:.1f}s")


def test_c02_simulator_oracle_equivalence(verdict):
    rng = np.random.default_rng(102)
    dense, noisy = 0.0, 0.0
    for n in (1, 2, 3):
        for d in (0, 1, 2, 3):
            for _ in range(5):
                enc, par = rng.uniform(-np.pi, np.pi, n), rng.uniform(-np.pi, np.pi, n * d)
                dense = max(dense, abs(run_template(CircuitTemplate(n, d), enc, par) - oracles.expectation(n, d, enc, par)))
    clean = NoiseProfile.noiseless()
    for n in (1, 2, 3, 4, 5):
        for d in (0, 1, 2):
            t = CircuitTemplate(n, d)
            for _ in range(3):
                enc, par = rng.uniform(-np.pi, np.pi, n), rng.uniform(-np.pi, np.pi, n * d)
                noisy = max(noisy, abs(run_noisy_template(t, enc, par, clean) - run_template(t, enc, par)))
    verdict(2, dense < 1e-12 and noisy < 1e-10, f"dense oracle {dense:.1e}, noiseless density {noisy:.1e}")


def profile_channels(profile):
    amp, phase = damping_channels(profile)
    return [depolarizing_channel(profile.sx_error, 1), depolarizing_channel(profile.two_qubit_error, 2), amp, phase]


def test_c03_channel_physicality(verdict):
    profiles = load_profiles()
    channels = [ch for name in PROFILE_NAMES for ch in profile_channels(profiles[name])]
    completeness = max(float(np.max(np.abs(ch.completeness() - np.eye(2**ch.arity)))) for ch in channels)
    rng = np.random.default_rng(103)
    drift = 0.0
    for _ in range(30):
        n = int(rng.integers(2, 4))
        rho = DensityMatrix(n, oracles.random_density(n, rng))
        for _ in range(20):
            ch = channels[rng.integers(len(channels))]
            rho = apply_channel(rho, ch, rng.choice(n, size=ch.arity, replace=False).tolist())
            m = rho.matrix
            drift = max(
                drift,
                abs(np.trace(m) - 1.0),
                float(np.max(np.abs(m - m.conj().T))),
                max(0.0, -float(np.min(np.linalg.eigvalsh(m)))),
            )
    verdict(3, completeness < 1e-12 and drift < 1e-10, f"completeness {completeness:.1e}, state drift {drift:.1e}")


def test_c04_closed_form_noise(verdict):
    rng = np.random.default_rng(104)
    dep = 0.0
    for p in (0.0, 0.01, 0.2, 0.5, 0.75, 1.0):
        psi = rng.normal(size=2) + 1j * rng.normal(size=2)
        rho = from_statevector(StateVector(1, psi / np.linalg.norm(psi)))
        out = apply_channel(rho, depolarizing_channel(p), [0])
        dep = max(dep, abs(out.expect_z(0) - (1 - 4 * p / 3) * rho.expect_z(0)))
    amp = 0.0
    one = from_statevector(StateVector(1, np.array([0.0, 1.0], dtype=complex)))
    for gamma in (0.0, 0.1, 0.37, 1.0):
        amp = max(amp, abs(apply_channel(one, amplitude_damping_channel(gamma), [0]).expect_z(0) - (2 * gamma - 1)))
    ro = 0.0
    for n in (1, 2, 4):
        for p in (0.0, 0.0165, 0.2):
            prof = NoiseProfile("ro", 0.0, 0.0, p, np.inf, np.inf, 1e-7)
            ro = max(ro, abs(run_noisy_template(CircuitTemplate(n, 0), [0.0] * n, [], prof) - n * (1 - 2 * p)))
    assert new_zero_state(2).amplitudes[0] == 1
    ok = dep < 1e-10 and amp < 1e-10 and ro < 1e-12
    verdict(4, ok, f"depolarizing {dep:.1e}, amplitude damping {amp:.1e}, readout {ro:.1e}")


def test_c05_end_to_end_differentiation(verdict):
    rng = np.random.default_rng(105)
    m = compose(4, 1, "scratch", seed=5, n_features=4, hidden=[6], init_scale=1.0)
    x = rng.normal(size=(8, 4))
    t = rng.uniform(size=8)
    g = hybrid_backward(m, x, t)
    params = m.trainable_params()
    worst = 0.0
    for i, (p, grad) in enumerate(zip(params, g.trainable())):

        def loss(v, i=i):
            ps = [q.copy() for q in params]
            ps[i] = v
            m.set_trainable_params(ps)
            out = float(np.mean((hybrid_forward(m, x) - t) ** 2))
            m.set_trainable_params(params)
            return out

        worst = max(worst, oracles.rel_err(grad, oracles.central_diff(loss, p)))
    verdict(5, worst < 1e-4, f"{sum(p.size for p in params)} parameters, max rel err {worst:.2e}")


def test_c06_strategy_contracts(verdict):
    rng = np.random.default_rng(106)
    x = rng.normal(size=(40, 6))
    y = x.sum(axis=1)
    bb = MlpModel.build(6, (10, 8), 1, 0.1, seed=0)
    bb, _ = train_mlp(bb, x, y, TrainConfig(epochs=5), seed=0)
    backbone, projection, quantum = 6 * 10 + 10 + 10 * 8 + 8, 8 * 4 + 4, 4 * 2
    expected = {"scratch": backbone + projection + quantum, "finetune": backbone + projection + quantum, "frozen": projection + quantum}
    counts_ok = True
    for strategy, want in expected.items():
        m = compose(4, 2, strategy, seed=0, backbone=bb)
        counts_ok &= m.trainable_parameter_count() == want == sum(p.size for p in m.trainable_params())
    frozen = compose(4, 2, "frozen", seed=0, backbone=bb)
    before = [p.tobytes() for p in frozen.backbone.params()]
    train_hybrid(frozen, (x, y), config=TrainConfig(batch_size=8, epochs=5), seed=0)
    unchanged = [p.tobytes() for p in frozen.backbone.params()] == before
    verdict(6, counts_ok and unchanged, f"counts {expected}, frozen backbone unchanged: {unchanged}")


@pytest.fixture(scope="module")
def desk_run():
    rng = np.random.default_rng(2024)
    x = rng.normal(size=(200, 8))
    y = x @ rng.normal(size=8) + 0.3 * np.sin(x[:, 0]) + 0.1 * x[:, 1] ** 2
    train, test = np.arange(160), np.arange(160, 200)
    start = time.perf_counter()
    mlp = MlpModel.build(8, (64, 32), 1, 0.0, seed=0)
    mlp, _ = train_mlp(mlp, x[train], y[train], TrainConfig(batch_size=32, epochs=2000), seed=0)
    hq = compose(4, 2, "scratch", seed=0, n_features=8, hidden=[32, 16])
    cfg = TrainConfig(batch_size=32, lr=0.001, epochs=2000)
    hq, _ = train_hybrid(hq, (x[train], y[train]), config=cfg, seed=0, metrics_every=cfg.epochs)
    return {
        "x": x,
        "y": y,
        "train": train,
        "test": test,
        "mlp": mlp,
        "hqnn": hq,
        "seconds": time.perf_counter() - start,
    }


@pytest.mark.slow
def test_c07_desk_scale_learning(verdict, desk_run):
    x, y, tr = desk_run["x"], desk_run["y"], desk_run["train"]
    mlp_r2 = r2(y[tr], desk_run["mlp"].predict(x[tr]))
    hq_r2 = r2(y[tr], desk_run["hqnn"].predict(x[tr]))
    secs = desk_run["seconds"]
    verdict(7, mlp_r2 >= 0.99 and hq_r2 >= 0.95 and secs < 600, f"MLP train R2 {mlp_r2:.4f}, HQSc train R2 {hq_r2:.4f}, {secs:.0f}s")


@pytest.mark.slow
def test_c08_noise_robustness(verdict, desk_run):
    x, y, te, model = desk_run["x"], desk_run["y"], desk_run["test"], desk_run["hqnn"]
    start = time.perf_counter()
    clean = mae(y[te], model.predict(x[te]))
    noisy = mae(y[te], model.predict(x[te], noise=load_profiles()["IBM-Fez"]))
    change = abs(noisy - clean) / clean
    secs = time.perf_counter() - start
    verdict(8, change < 0.10 and secs < 300, f"test MAE {clean:.4f} -> {noisy:.4f} under IBM-Fez, change {100 * change:.2f}%")


def test_c09_relative_performance_rows(verdict):
    classical = MetricsReport.from_means(0.9082, 0.3746)
    rows = {
        "HQSc (4Q)": ((0.9088, 0.3514), (0.07, 6.19)),
        "HQFi (4Q)": ((0.9112, 0.3463), (0.33, 7.55)),
        "HQFr (4Q)": ((0.9093, 0.3663), (0.12, 2.22)),
        "HQSc (9Q)": ((0.9079, 0.3583), (-0.03, 4.35)),
        "HQFi (9Q)": ((0.9094, 0.3510), (0.13, 6.30)),
        "HQFr (9Q)": ((0.9093, 0.3665), (0.12, 2.16)),
    }
    ok, worst = True, 0.0
    for label, (means, want) in rows.items():
        rel = relative_performance(classical, MetricsReport.from_means(*means))
        err = max(abs(rel["r2_pct"] - want[0]), abs(rel["mae_pct"] - want[1]))
        ok &= err <= (0.01 if label == "HQFi (4Q)" else 0.02)
        worst = max(worst, err)
    verdict(9, ok, f"{len(rows)} rows, max deviation {worst:.4f} points")


def test_c10_noise_catalog(verdict):
    cat = load_profiles()
    ok = (
        sorted(cat) == sorted(PROFILE_NAMES)
        and cat["IBM-Fez"].two_qubit_error == 2.792e-3
        and cat["IBM-Torino"].two_qubit_error == 6.250e-3
        and cat["IBM-Brisbane"].gate_time_seconds == 6.600e-7
    )
    verdict(10, ok, f"{len(cat)} profiles loaded")


def test_c11_split_contracts(verdict):
    rng = np.random.default_rng(111)
    sizes = np.full(200, 5)
    rows = []
    for g, size in enumerate(sizes):
        base = rng.normal()
        rows += [Row(f"{g}-{j}", float(base + 0.2 * rng.normal()), features=(0.0,), scaffold_key=g + 1) for j in range(size)]
    ds = Dataset(rows)
    split = stratified_kfold(ds, 5, seed=7)
    owner = {}
    crossing = sum(owner.setdefault(r.scaffold_key, f) != f for r, f in zip(ds.rows, split.assignments))
    balanced = all(180 <= s <= 220 for s in split.sizes())
    deterministic = stratified_kfold(ds, 5, seed=7) == split
    verdict(11, crossing == 0 and balanced and deterministic, f"sizes {split.sizes()}, crossings {crossing}, deterministic {deterministic}")


def corpus(name):
    text = resources.files("hqnn.resources").joinpath(name).read_text()
    return [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]


@pytest.mark.slow
def test_c12_parser_corpus_and_fuzz(verdict):
    valid, malformed = corpus("smiles_valid.smi"), corpus("smiles_malformed.txt")
    parsed = sum(len(parse_smiles(s).atoms) > 0 for s in valid)
    structured = 0
    for s in malformed:
        try:
            parse_smiles(s)
        except ParseError as err:
            structured += 0 <= err.offset <= len(s)
    rng = np.random.default_rng(112)
    alphabet = list("CNOPSFIBcnosp()[]=#$:/\\@+-.%0123456789Hlr*")
    pieces = alphabet + valid
    start, cases, crashes = time.perf_counter(), 0, []
    while time.perf_counter() - start < 60:
        if cases % 3 == 0:
            raw = rng.integers(0, 256, size=rng.integers(0, 40), dtype=np.uint8).tobytes()
        else:
            raw = "".join(pieces[i] for i in rng.integers(len(pieces), size=rng.integers(0, 12)))
        try:
            parse_smiles(raw)
        except ParseError:
            pass
        except Exception as exc:  # any other exception is a crash
            crashes.append((raw, repr(exc)))
        cases += 1
    ok = len(valid) >= 50 and parsed == len(valid) and len(malformed) >= 20 and structured == len(malformed) and not crashes
    detail = f"{parsed}/{len(valid)} valid, {structured}/{len(malformed)} malformed rejected, {cases} fuzz cases, {len(crashes)} crashes"
    verdict(12, ok, detail)
