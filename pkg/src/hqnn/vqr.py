"""Variational quantum regressor: arctan encoding, Ry/CNOT ansatz, Z-sum readout.

Gradients use the two-point parameter-shift rule.  Every angle in the
circuit (encoding or trainable) enters through an Ry gate, so

    dE/dtheta = (E(theta + pi/2) - E(theta - pi/2)) / 2

holds exactly, with or without the (linear) noise channels.  Input
gradients are chained through d/dx [arctan(x) + pi/2] = 1 / (1 + x**2).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, ShapeError
from .noise import NoiseProfile, run_noisy_template_batch
from .quantum import CircuitTemplate, run_template_batch

SHIFT = np.pi / 2


@dataclass
class VqrParams:
    angles: np.ndarray

    def __post_init__(self):
        self.angles = np.asarray(self.angles, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(self.angles)):
            raise DomainError("VQR angles must be finite")

    def check(self, template: CircuitTemplate) -> None:
        if self.angles.size != template.n_params:
            raise ShapeError(
                f"template needs {template.n_params} angles (depth {template.depth} x {template.n_qubits} qubits), "
                f"got {self.angles.size}"
            )

    @classmethod
    def random(cls, template: CircuitTemplate, rng: np.random.Generator, scale: float = np.pi) -> "VqrParams":
        return cls(rng.uniform(-scale, scale, size=template.n_params))


@dataclass
class VqrGradient:
    d_params: np.ndarray
    d_inputs: np.ndarray


def encode(embedding) -> np.ndarray:
    """Map real embeddings to Ry angles in (0, pi): arctan(x) + pi/2."""
    x = np.asarray(embedding, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise DomainError("embedding entries must be finite")
    return np.arctan(x) + np.pi / 2


def encode_derivative(embedding) -> np.ndarray:
    x = np.asarray(embedding, dtype=np.float64)
    return 1.0 / (1.0 + x * x)


def _evaluate(template, angles_enc, params, noise: Optional[NoiseProfile]):
    if noise is None:
        return run_template_batch(template, angles_enc, params)
    return run_noisy_template_batch(template, angles_enc, params, noise)


def _check_embeddings(template: CircuitTemplate, embeddings) -> np.ndarray:
    x = np.asarray(embeddings, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != template.n_qubits:
        raise ShapeError(f"embeddings need {template.n_qubits} columns, got shape {x.shape}")
    return x


def forward_batch(template: CircuitTemplate, embeddings, params: VqrParams, noise: Optional[NoiseProfile] = None):
    """Raw Z-sum expectation for each row of ``embeddings``."""
    params.check(template)
    x = _check_embeddings(template, embeddings)
    return _evaluate(template, encode(x), params.angles, noise)


def grad_batch(template: CircuitTemplate, embeddings, params: VqrParams, noise: Optional[NoiseProfile] = None):
    """Expectations and per-sample gradients for a batch.

    Returns ``(values (B,), d_params (B, P), d_inputs (B, n))``.  All shifted
    circuits are stacked into a single batched simulation.
    """
    params.check(template)
    x = _check_embeddings(template, embeddings)
    b, n, p = x.shape[0], template.n_qubits, template.n_params
    enc = encode(x)
    theta = params.angles

    n_shift = p + n
    enc_all = np.broadcast_to(enc, (1 + 2 * n_shift, b, n)).copy()
    par_all = np.broadcast_to(theta, (1 + 2 * n_shift, b, p)).copy()
    for j in range(p):
        par_all[1 + 2 * j, :, j] += SHIFT
        par_all[2 + 2 * j, :, j] -= SHIFT
    for i in range(n):
        k = 1 + 2 * (p + i)
        enc_all[k, :, i] += SHIFT
        enc_all[k + 1, :, i] -= SHIFT
    vals = _evaluate(template, enc_all.reshape(-1, n), par_all.reshape(-1, p), noise).reshape(1 + 2 * n_shift, b)

    plus = vals[1::2]
    minus = vals[2::2]
    diff = ((plus - minus) / 2.0).T  # (B, P + n)
    d_params = diff[:, :p]
    d_inputs = diff[:, p:] * encode_derivative(x)
    return vals[0], d_params, d_inputs


def vqr_forward(embedding, params: VqrParams, template: CircuitTemplate, noise: Optional[NoiseProfile] = None) -> float:
    x = np.asarray(embedding, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError(f"embedding must be 1-D, got shape {x.shape}")
    return float(forward_batch(template, x, params, noise)[0])


def param_shift_grad(
    embedding, params: VqrParams, template: CircuitTemplate, noise: Optional[NoiseProfile] = None
) -> VqrGradient:
    x = np.asarray(embedding, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError(f"embedding must be 1-D, got shape {x.shape}")
    _, dp, di = grad_batch(template, x, params, noise)
    return VqrGradient(d_params=dp[0], d_inputs=di[0])
