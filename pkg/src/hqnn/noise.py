"""Density-matrix simulation of the regressor circuit under hardware noise.

Noise placement:

* after every Ry gate: 1q depolarizing (``sx_error``), amplitude damping,
  phase damping on the rotated qubit;
* after every CNOT: 2q depolarizing (``two_qubit_error``), then amplitude
  and phase damping on control and target independently;
* readout: symmetric bit flip, folded into the expectation as
  ``(1 - 2 * readout_error) * <Z_i>``.

Damping strengths per gate, from T1, T2 and the gate time ``t``::

    gamma  = 1 - exp(-t / T1)
    1/Tphi = 1/T2 - 1/(2 T1)        (clamped at 0)
    lambda = 1 - exp(-t / Tphi)
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from itertools import product
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, DomainError, LoadError, ShapeError
from .quantum import (
    CircuitTemplate,
    GateKind,
    StateVector,
    _as_batch,
    _check_n_qubits,
    z_sum_weights,
)

log = logging.getLogger(__name__)

_I = np.eye(2, dtype=np.complex128)
_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
PAULIS = (_I, _X, _Y, _Z)

CPTP_TOL = 1e-10


@dataclass(frozen=True)
class DensityMatrix:
    n_qubits: int
    matrix: np.ndarray

    def __post_init__(self):
        _check_n_qubits(self.n_qubits)
        m = np.asarray(self.matrix, dtype=np.complex128)
        dim = 2**self.n_qubits
        if m.shape != (dim, dim):
            raise ShapeError(f"expected a {dim}x{dim} matrix, got shape {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def expect_z(self, qubit: int) -> float:
        diag = np.real(np.diag(self.matrix))
        bit = (np.arange(diag.size) >> (self.n_qubits - 1 - qubit)) & 1
        return float(diag @ (1 - 2 * bit))

    def expect_z_sum(self) -> float:
        return float(np.real(np.diag(self.matrix)) @ z_sum_weights(self.n_qubits))


def from_statevector(psi: StateVector) -> DensityMatrix:
    a = psi.amplitudes
    return DensityMatrix(psi.n_qubits, np.outer(a, a.conj()))


@dataclass(frozen=True)
class KrausChannel:
    operators: tuple
    arity: int

    def __post_init__(self):
        if self.arity not in (1, 2):
            raise ConfigurationError(f"channel arity must be 1 or 2, got {self.arity}")
        dim = 2**self.arity
        ops = tuple(np.asarray(k, dtype=np.complex128) for k in self.operators)
        if not ops:
            raise ConfigurationError("a channel needs at least one Kraus operator")
        for k in ops:
            if k.shape != (dim, dim):
                raise ShapeError(f"Kraus operator shape {k.shape} does not match arity {self.arity}")
            k.setflags(write=False)
        object.__setattr__(self, "operators", ops)
        dev = np.max(np.abs(self.completeness() - np.eye(dim)))
        if dev > CPTP_TOL:
            raise DomainError(f"Kraus operators are not trace preserving (deviation {dev:.3g})")

    def completeness(self) -> np.ndarray:
        """Sum of K^dagger K; the identity for a trace-preserving channel."""
        return sum(k.conj().T @ k for k in self.operators)

    def superoperator(self) -> np.ndarray:
        """Tensor S[out_rows, out_cols, in_rows, in_cols] with one axis per qubit."""
        m = sum(np.kron(k, k.conj()) for k in self.operators)
        return m.reshape((2,) * (4 * self.arity))


def identity_channel(arity: int = 1) -> KrausChannel:
    return KrausChannel((np.eye(2**arity),), arity)


def _check_probability(p: float, what: str = "probability") -> None:
    if not (0.0 <= p <= 1.0):
        raise DomainError(f"{what} must lie in [0, 1], got {p!r}")


def depolarizing_channel(p: float, arity: int = 1) -> KrausChannel:
    """Uniform Pauli mixture with total error probability ``p``."""
    _check_probability(p)
    if arity not in (1, 2):
        raise ConfigurationError(f"arity must be 1 or 2, got {arity}")
    if p == 0.0:
        return identity_channel(arity)
    n_err = 4**arity - 1
    ops = [math.sqrt(1.0 - p) * np.eye(2**arity)]
    for combo in product(PAULIS, repeat=arity):
        if all(m is _I for m in combo):
            continue
        mat = combo[0] if arity == 1 else np.kron(combo[0], combo[1])
        ops.append(math.sqrt(p / n_err) * mat)
    return KrausChannel(tuple(ops), arity)


def amplitude_damping_channel(gamma: float) -> KrausChannel:
    _check_probability(gamma, "gamma")
    k0 = np.array([[1, 0], [0, math.sqrt(1 - gamma)]])
    k1 = np.array([[0, math.sqrt(gamma)], [0, 0]])
    return KrausChannel((k0, k1), 1)


def phase_damping_channel(lam: float) -> KrausChannel:
    _check_probability(lam, "lambda")
    k0 = np.array([[1, 0], [0, math.sqrt(1 - lam)]])
    k1 = np.array([[0, 0], [0, math.sqrt(lam)]])
    return KrausChannel((k0, k1), 1)


# ---------------------------------------------------------------------------
# hardware profiles
# ---------------------------------------------------------------------------

PROFILE_FIELDS = (
    "name",
    "two_qubit_error",
    "sx_error",
    "readout_error",
    "t1_seconds",
    "t2_seconds",
    "gate_time_seconds",
)


@dataclass(frozen=True)
class NoiseProfile:
    name: str
    two_qubit_error: float
    sx_error: float
    readout_error: float
    t1_seconds: float
    t2_seconds: float
    gate_time_seconds: float

    def __post_init__(self):
        for f in ("two_qubit_error", "sx_error", "readout_error"):
            v = getattr(self, f)
            if not (0.0 <= v <= 1.0):
                raise DomainError(f"{self.name}: {f} must lie in [0, 1], got {v!r}")
        for f in ("t1_seconds", "t2_seconds", "gate_time_seconds"):
            v = getattr(self, f)
            if not v > 0 or math.isnan(v):
                raise DomainError(f"{self.name}: {f} must be > 0, got {v!r}")
        if math.isfinite(self.t2_seconds) and self.t2_seconds > 2.0 * self.t1_seconds:
            raise DomainError(
                f"{self.name}: t2_seconds ({self.t2_seconds}) exceeds 2*t1_seconds ({2 * self.t1_seconds})"
            )

    @classmethod
    def noiseless(cls, name: str = "noiseless") -> "NoiseProfile":
        return cls(name, 0.0, 0.0, 0.0, math.inf, math.inf, 1e-7)

    def gamma(self) -> float:
        return -math.expm1(-self.gate_time_seconds / self.t1_seconds)

    def dephasing_rate(self) -> float:
        rate = 1.0 / self.t2_seconds - 1.0 / (2.0 * self.t1_seconds)
        if rate < 0.0:
            log.warning("%s: negative pure-dephasing rate %.3g clamped to 0", self.name, rate)
            rate = 0.0
        return rate

    def lam(self) -> float:
        return -math.expm1(-self.gate_time_seconds * self.dephasing_rate())


def damping_channels(profile: NoiseProfile) -> tuple[KrausChannel, KrausChannel]:
    """(amplitude damping, phase damping) for one gate duration."""
    return amplitude_damping_channel(profile.gamma()), phase_damping_channel(profile.lam())


def _parse_field(raw: dict, fieldname: str, row: int) -> float:
    text = raw.get(fieldname)
    if text is None or text.strip() == "":
        raise LoadError("missing value", row, fieldname)
    try:
        return float(text)
    except ValueError:
        raise LoadError(f"not a number: {text!r}", row, fieldname) from None


def parse_profiles(text: str, source: str = "<string>") -> dict[str, NoiseProfile]:
    if not text.strip():
        log.warning("noise catalog %s is empty", source)
        return {}
    reader = csv.DictReader(io.StringIO(text))
    header = [h.strip() for h in (reader.fieldnames or [])]
    missing = [f for f in PROFILE_FIELDS if f not in header]
    if missing:
        raise LoadError(f"{source}: header lacks columns {missing}", 1)
    reader.fieldnames = header
    out: dict[str, NoiseProfile] = {}
    for row_no, raw in enumerate(reader, start=2):
        if None in raw:
            raise LoadError("too many fields", row_no)
        name = (raw.get("name") or "").strip()
        if not name:
            raise LoadError("missing value", row_no, "name")
        values = {f: _parse_field(raw, f, row_no) for f in PROFILE_FIELDS[1:]}
        try:
            profile = NoiseProfile(name, **values)
        except DomainError as exc:
            bad = next((f for f in PROFILE_FIELDS[1:] if f in str(exc)), None)
            raise LoadError(str(exc), row_no, bad) from None
        if name in out:
            raise LoadError(f"duplicate profile {name!r}", row_no, "name")
        out[name] = profile
    return out


def load_profiles(catalog_file: Optional[str | Path] = None) -> dict[str, NoiseProfile]:
    """Read a noise catalog; with no argument, the shipped IBM catalog."""
    if catalog_file is None:
        text = resources.files("hqnn.resources").joinpath("ibm_noise_profiles.csv").read_text()
        return parse_profiles(text, "ibm_noise_profiles.csv")
    path = Path(catalog_file)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise LoadError(f"cannot read noise catalog {path}: {exc}") from None
    return parse_profiles(text, str(path))


# ---------------------------------------------------------------------------
# batched density-matrix kernels: rho has shape (B, 2**n, 2**n)
# ---------------------------------------------------------------------------


def apply_superop_batch(rho: np.ndarray, superop: np.ndarray, qubits: Sequence[int], n_qubits: int) -> np.ndarray:
    k = len(qubits)
    b, dim = rho.shape[0], rho.shape[1]
    t = rho.reshape((b,) + (2,) * (2 * n_qubits))
    rows = [1 + q for q in qubits]
    cols = [1 + n_qubits + q for q in qubits]
    s_in = list(range(2 * k, 4 * k))
    res = np.tensordot(t, superop, axes=(rows + cols, s_in))
    res = np.moveaxis(res, list(range(res.ndim - 2 * k, res.ndim)), rows + cols)
    return res.reshape(b, dim, dim)


def _ry_rows_cols(rho: np.ndarray, qubit: int, n_qubits: int, theta: np.ndarray) -> np.ndarray:
    b, dim = rho.shape[0], rho.shape[1]
    half = np.asarray(theta, dtype=np.float64) / 2.0
    c = np.cos(half).reshape(-1, 1, 1)
    s = np.sin(half).reshape(-1, 1, 1)
    lo = 2**qubit
    hi = 2 ** (n_qubits - qubit - 1)
    # rows, then columns; Ry is real so R rho R^T is the full conjugation
    for pre, post in ((lo, hi * dim), (dim * lo, hi)):
        v = rho.reshape(b, pre, 2, post)
        out = np.empty_like(v)
        out[:, :, 0, :] = c * v[:, :, 0, :] - s * v[:, :, 1, :]
        out[:, :, 1, :] = s * v[:, :, 0, :] + c * v[:, :, 1, :]
        rho = out.reshape(b, dim, dim)
    return rho


@lru_cache(maxsize=None)
def _cnot_perm(control: int, target: int, n_qubits: int) -> np.ndarray:
    x = np.arange(2**n_qubits)
    cbit = (x >> (n_qubits - 1 - control)) & 1
    return x ^ (cbit << (n_qubits - 1 - target))


def _compose(*superops: np.ndarray) -> np.ndarray:
    """Apply left to right: the first argument acts first."""
    shape = superops[0].shape
    d = int(round(math.sqrt(superops[0].size)))
    total = np.eye(d, dtype=np.complex128)
    for s in superops:
        total = s.reshape(d, d) @ total
    return total.reshape(shape)


@dataclass(frozen=True)
class CompiledNoise:
    after_ry: np.ndarray  # 1q superop
    after_cnot_pair: np.ndarray  # 2q superop
    after_cnot_single: np.ndarray  # 1q superop, per touched qubit
    readout_scale: float


@lru_cache(maxsize=64)
def compile_noise(profile: NoiseProfile) -> CompiledNoise:
    amp, phase = damping_channels(profile)
    dep1 = depolarizing_channel(profile.sx_error, 1)
    dep2 = depolarizing_channel(profile.two_qubit_error, 2)
    damping = _compose(amp.superoperator(), phase.superoperator())
    return CompiledNoise(
        after_ry=_compose(dep1.superoperator(), damping),
        after_cnot_pair=dep2.superoperator(),
        after_cnot_single=damping,
        readout_scale=1.0 - 2.0 * profile.readout_error,
    )


def run_noisy_template_batch(
    template: CircuitTemplate, encoding_angles, params, profile: NoiseProfile
) -> np.ndarray:
    enc, par = _as_batch(template, encoding_angles, params)
    n = template.n_qubits
    dim = 2**n
    noise = compile_noise(profile)
    rho = np.zeros((enc.shape[0], dim, dim), dtype=np.complex128)
    rho[:, 0, 0] = 1.0
    for g in template.gates:
        if g.kind is GateKind.RY:
            theta = par[:, g.angle_slot] if g.trainable else enc[:, g.angle_slot]
            rho = _ry_rows_cols(rho, g.target, n, theta)
            rho = apply_superop_batch(rho, noise.after_ry, (g.target,), n)
        else:
            perm = _cnot_perm(g.control, g.target, n)
            rho = rho[:, perm][:, :, perm]
            rho = apply_superop_batch(rho, noise.after_cnot_pair, (g.control, g.target), n)
            rho = apply_superop_batch(rho, noise.after_cnot_single, (g.control,), n)
            rho = apply_superop_batch(rho, noise.after_cnot_single, (g.target,), n)
    diag = np.real(np.diagonal(rho, axis1=1, axis2=2))
    return noise.readout_scale * (diag @ z_sum_weights(n))


def run_noisy_template(template: CircuitTemplate, encoding_angles, params, profile: NoiseProfile) -> float:
    enc = np.asarray(encoding_angles, dtype=np.float64)
    if enc.ndim != 1:
        raise ShapeError(f"encoding angles must be 1-D, got shape {enc.shape}")
    return float(run_noisy_template_batch(template, enc, params, profile)[0])


def apply_channel(rho: DensityMatrix, ch: KrausChannel, qubits: Iterable[int]) -> DensityMatrix:
    """Sum of K rho K^dagger with the channel embedded on ``qubits``."""
    qubits = tuple(qubits)
    if len(qubits) != ch.arity:
        raise ShapeError(f"channel of arity {ch.arity} applied to {len(qubits)} qubits")
    if len(set(qubits)) != len(qubits):
        raise ShapeError(f"qubits must be distinct, got {qubits}")
    for q in qubits:
        if not 0 <= q < rho.n_qubits:
            raise IndexError(f"qubit {q} out of range for {rho.n_qubits} qubits")
    out = apply_superop_batch(rho.matrix[None], ch.superoperator(), qubits, rho.n_qubits)[0]
    return DensityMatrix(rho.n_qubits, out)
