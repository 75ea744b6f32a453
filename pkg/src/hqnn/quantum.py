"""Exact statevector simulation for the Ry/CNOT regressor circuit.

Qubit 0 is the most significant bit of the basis index, so the amplitude
of ``|q0 q1 ... q(n-1)>`` lives at index ``q0 * 2**(n-1) + ... + q(n-1)``.

Ry(theta) = [[cos(theta/2), -sin(theta/2)], [sin(theta/2), cos(theta/2)]].

The public single-state functions wrap batched kernels that act on arrays
of shape ``(batch, 2**n)``; training uses the batched path directly.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError, DomainError, ShapeError

MAX_QUBITS = 12


def _check_n_qubits(n_qubits: int) -> None:
    if not isinstance(n_qubits, (int, np.integer)) or not 1 <= n_qubits <= MAX_QUBITS:
        raise ConfigurationError(f"n_qubits must be an integer in [1, {MAX_QUBITS}], got {n_qubits!r}")


def _check_qubit(qubit: int, n_qubits: int) -> None:
    if not 0 <= qubit < n_qubits:
        raise IndexError(f"qubit {qubit} out of range for {n_qubits} qubits")


@dataclass(frozen=True)
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        _check_n_qubits(self.n_qubits)
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if amps.shape != (2**self.n_qubits,):
            raise ShapeError(f"expected {2**self.n_qubits} amplitudes, got shape {amps.shape}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def new_zero_state(n_qubits: int) -> StateVector:
    _check_n_qubits(n_qubits)
    amps = np.zeros(2**n_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(n_qubits, amps)


# ---------------------------------------------------------------------------
# batched kernels: psi has shape (B, 2**n)
# ---------------------------------------------------------------------------


def ry_batch(psi: np.ndarray, qubit: int, n_qubits: int, theta: np.ndarray | float) -> np.ndarray:
    """Apply Ry on ``qubit`` to every row of ``psi``; ``theta`` is scalar or (B,)."""
    b = psi.shape[0]
    view = psi.reshape(b, 2**qubit, 2, 2 ** (n_qubits - qubit - 1))
    half = np.asarray(theta, dtype=np.float64) / 2.0
    c = np.cos(half).reshape(-1, 1, 1)
    s = np.sin(half).reshape(-1, 1, 1)
    a0 = view[:, :, 0, :]
    a1 = view[:, :, 1, :]
    out = np.empty_like(view)
    out[:, :, 0, :] = c * a0 - s * a1
    out[:, :, 1, :] = s * a0 + c * a1
    return out.reshape(b, -1)


def cnot_batch(psi: np.ndarray, control: int, target: int, n_qubits: int) -> np.ndarray:
    b = psi.shape[0]
    view = psi.reshape((b,) + (2,) * n_qubits)
    out = view.copy()

    def idx(c_bit, t_bit):
        sl = [slice(None)] * (n_qubits + 1)
        sl[control + 1] = c_bit
        sl[target + 1] = t_bit
        return tuple(sl)

    out[idx(1, 0)] = view[idx(1, 1)]
    out[idx(1, 1)] = view[idx(1, 0)]
    return out.reshape(b, -1)


@lru_cache(maxsize=None)
def z_sum_weights(n_qubits: int) -> np.ndarray:
    """``n - 2*popcount(x)`` for every basis index ``x``."""
    idx = np.arange(2**n_qubits)
    pop = np.zeros_like(idx)
    for q in range(n_qubits):
        pop += (idx >> q) & 1
    w = (n_qubits - 2 * pop).astype(np.float64)
    w.setflags(write=False)
    return w


def expect_z_sum_batch(psi: np.ndarray, n_qubits: int) -> np.ndarray:
    probs = psi.real**2 + psi.imag**2
    return probs @ z_sum_weights(n_qubits)


# ---------------------------------------------------------------------------
# single-state gate API
# ---------------------------------------------------------------------------


def apply_ry(state: StateVector, qubit: int, theta: float) -> StateVector:
    _check_qubit(qubit, state.n_qubits)
    if not math.isfinite(theta):
        raise DomainError(f"rotation angle must be finite, got {theta!r}")
    out = ry_batch(state.amplitudes[None, :], qubit, state.n_qubits, theta)
    return StateVector(state.n_qubits, out[0])


def apply_cnot(state: StateVector, control: int, target: int) -> StateVector:
    if control == target:
        raise DomainError("CNOT control and target must differ")
    _check_qubit(control, state.n_qubits)
    _check_qubit(target, state.n_qubits)
    out = cnot_batch(state.amplitudes[None, :], control, target, state.n_qubits)
    return StateVector(state.n_qubits, out[0])


def expect_z_sum(state: StateVector) -> float:
    """Sum over qubits of <psi|Z_i|psi>; lies in [-n, n]."""
    return float(expect_z_sum_batch(state.amplitudes[None, :], state.n_qubits)[0])


# ---------------------------------------------------------------------------
# circuit template
# ---------------------------------------------------------------------------


class GateKind(enum.Enum):
    RY = "RY"
    CNOT = "CNOT"


@dataclass(frozen=True)
class GateOp:
    kind: GateKind
    target: int
    control: Optional[int] = None
    # for RY: index into the encoding angles (encoding gates) or the
    # trainable parameters (ansatz gates)
    angle_slot: Optional[int] = None
    trainable: bool = False

    def __post_init__(self):
        if self.kind is GateKind.CNOT:
            if self.control is None or self.control == self.target:
                raise DomainError("CNOT needs a control distinct from its target")
        elif self.control is not None:
            raise DomainError("RY takes no control qubit")


@dataclass(frozen=True)
class CircuitTemplate:
    """Encoding layer of Ry gates followed by ``depth`` ansatz blocks.

    Each block applies Ry on every qubit (ascending) and then the open
    CNOT chain q0->q1, q1->q2, ..., q(n-2)->q(n-1).  Parameters are laid
    out block-major.  ``depth=0`` is accepted and yields the encoder alone.
    """

    n_qubits: int
    depth: int
    gates: tuple = field(init=False, repr=False)

    def __post_init__(self):
        _check_n_qubits(self.n_qubits)
        if not isinstance(self.depth, (int, np.integer)) or self.depth < 0:
            raise ConfigurationError(f"depth must be a non-negative integer, got {self.depth!r}")
        n = self.n_qubits
        gates = [GateOp(GateKind.RY, q, angle_slot=q) for q in range(n)]
        for block in range(self.depth):
            gates += [
                GateOp(GateKind.RY, q, angle_slot=block * n + q, trainable=True) for q in range(n)
            ]
            gates += [GateOp(GateKind.CNOT, q + 1, control=q) for q in range(n - 1)]
        object.__setattr__(self, "gates", tuple(gates))

    @property
    def n_params(self) -> int:
        return self.depth * self.n_qubits

    @property
    def encoding_gates(self) -> tuple:
        return self.gates[: self.n_qubits]

    @property
    def ansatz_gates(self) -> tuple:
        return self.gates[self.n_qubits :]


def _as_batch(template: CircuitTemplate, encoding_angles, params):
    enc = np.asarray(encoding_angles, dtype=np.float64)
    par = np.asarray(params, dtype=np.float64)
    if enc.ndim == 1:
        enc = enc[None, :]
    if enc.ndim != 2 or enc.shape[1] != template.n_qubits:
        raise ShapeError(f"encoding angles must have {template.n_qubits} columns, got shape {enc.shape}")
    if par.ndim == 1:
        par = np.broadcast_to(par, (enc.shape[0], par.shape[0]))
    if par.ndim != 2 or par.shape[1] != template.n_params:
        raise ShapeError(f"params must have {template.n_params} entries, got shape {par.shape}")
    if par.shape[0] != enc.shape[0]:
        raise ShapeError(f"batch mismatch: {enc.shape[0]} encodings vs {par.shape[0]} param rows")
    return enc, par


def run_template_batch(template: CircuitTemplate, encoding_angles, params) -> np.ndarray:
    """Z-sum expectation for each row of ``encoding_angles`` (shape (B, n)).

    ``params`` is either one parameter vector shared by the batch or a
    (B, n_params) array.
    """
    enc, par = _as_batch(template, encoding_angles, params)
    n = template.n_qubits
    psi = np.zeros((enc.shape[0], 2**n), dtype=np.complex128)
    psi[:, 0] = 1.0
    for g in template.gates:
        if g.kind is GateKind.RY:
            theta = par[:, g.angle_slot] if g.trainable else enc[:, g.angle_slot]
            psi = ry_batch(psi, g.target, n, theta)
        else:
            psi = cnot_batch(psi, g.control, g.target, n)
    return expect_z_sum_batch(psi, n)


def run_template(template: CircuitTemplate, encoding_angles: Sequence[float], params: Sequence[float]) -> float:
    enc = np.asarray(encoding_angles, dtype=np.float64)
    if enc.ndim != 1:
        raise ShapeError(f"encoding angles must be 1-D, got shape {enc.shape}")
    return float(run_template_batch(template, enc, params)[0])
