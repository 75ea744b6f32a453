"""Classical backbone -> projection -> VQR head, and the three training strategies.

Pipeline for one sample ``x``::

    h = backbone(x)                     # MLP minus its scalar head
    e = projection(h)                   # n_qubits reals
    E = vqr(e)                          # Z-sum in [-n, n]
    s = (E / n + 1) / 2                 # scaled target space [0, 1]

Strategies:

* ``HQSc`` - everything freshly initialised and trained;
* ``HQFi`` - backbone loaded from a pretrained MLP, everything trained;
* ``HQFr`` - backbone loaded and frozen (run in eval mode, never updated);
  projection and circuit parameters are trained.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError, ContractError, ShapeError
from .metrics import mae, r2
from .nn import (
    AdamState,
    DenseLayer,
    MinMaxScaler,
    MlpModel,
    TrainConfig,
    adam_step,
    decode_array,
    dump_json,
    encode_array,
    minibatches,
    mlp_backward,
    mlp_forward,
    mlp_from_dict,
    mlp_to_dict,
)
from .noise import NoiseProfile
from .quantum import CircuitTemplate
from .rng import substream
from .vqr import VqrParams, forward_batch, grad_batch

CHECKPOINT_FORMAT = "hqnn-hybrid"
CHECKPOINT_VERSION = 1
DEFAULT_DEPTH = 2


class Strategy(str, enum.Enum):
    SCRATCH = "HQSc"
    FINETUNE = "HQFi"
    FROZEN = "HQFr"

    @classmethod
    def parse(cls, value) -> "Strategy":
        if isinstance(value, cls):
            return value
        aliases = {"scratch": cls.SCRATCH, "finetune": cls.FINETUNE, "frozen": cls.FROZEN}
        key = str(value)
        if key.lower() in aliases:
            return aliases[key.lower()]
        for s in cls:
            if s.value.lower() == key.lower():
                return s
        raise ConfigurationError(f"unknown strategy {value!r}; use scratch, finetune or frozen")

    @property
    def uses_pretrained(self) -> bool:
        return self is not Strategy.SCRATCH

    @property
    def backbone_trainable(self) -> bool:
        return self is not Strategy.FROZEN


def params_digest(params: Sequence[np.ndarray]) -> str:
    """SHA-256 over the little-endian float64 bytes of each array in order."""
    h = hashlib.sha256()
    for p in params:
        h.update(np.ascontiguousarray(p, dtype="<f8").tobytes())
    return h.hexdigest()


@dataclass
class HybridModel:
    backbone: MlpModel
    projection: DenseLayer
    template: CircuitTemplate
    params: VqrParams
    strategy: Strategy
    seed: int = 0
    scaler: Optional[MinMaxScaler] = None

    def __post_init__(self):
        if not self.backbone.activate_output:
            raise ConfigurationError("backbone must be a feature extractor (final layer activated)")
        if self.projection.in_dim != self.backbone.out_dim:
            raise ShapeError(f"projection expects {self.projection.in_dim} inputs, backbone gives {self.backbone.out_dim}")
        if self.projection.out_dim != self.template.n_qubits:
            raise ShapeError(f"projection gives {self.projection.out_dim} outputs for {self.template.n_qubits} qubits")
        self.params.check(self.template)

    @property
    def n_qubits(self) -> int:
        return self.template.n_qubits

    @property
    def n_features(self) -> int:
        return self.backbone.in_dim

    def parameter_counts(self) -> dict:
        return {
            "backbone": self.backbone.n_parameters(),
            "projection": self.projection.weights.size + self.projection.bias.size,
            "quantum": self.template.n_params,
        }

    def trainable_parameter_count(self) -> int:
        c = self.parameter_counts()
        total = c["projection"] + c["quantum"]
        if self.strategy.backbone_trainable:
            total += c["backbone"]
        return total

    def trainable_params(self) -> list:
        out = list(self.backbone.params()) if self.strategy.backbone_trainable else []
        return out + [self.projection.weights, self.projection.bias, self.params.angles]

    def set_trainable_params(self, params: Sequence[np.ndarray]) -> None:
        params = list(params)
        if self.strategy.backbone_trainable:
            nb = 2 * len(self.backbone.layers)
            self.backbone.set_params(params[:nb])
            params = params[nb:]
        if len(params) != 3:
            raise ShapeError("wrong number of trainable arrays for this strategy")
        self.projection.weights, self.projection.bias = params[0], params[1]
        self.params = VqrParams(params[2])

    def backbone_digest(self) -> str:
        return params_digest(self.backbone.params())

    def output_map(self, expectation):
        return (np.asarray(expectation) / self.n_qubits + 1.0) / 2.0

    def predict(self, features, noise: Optional[NoiseProfile] = None) -> np.ndarray:
        """Eval-mode predictions in original target units."""
        if self.scaler is None:
            raise ContractError("model has no fitted target scaler; train it first")
        return self.scaler.inverse(hybrid_forward(self, features, "eval", noise=noise))


def compose(
    n_qubits: int,
    depth: int = DEFAULT_DEPTH,
    strategy=Strategy.SCRATCH,
    seed: int = 0,
    backbone: Optional[MlpModel] = None,
    n_features: Optional[int] = None,
    hidden: Optional[Sequence[int]] = None,
    dropout_rate: float = 0.0,
    init_scale: float = 0.1,
) -> HybridModel:
    """Assemble a hybrid model.

    ``backbone`` is a pretrained classical MLP (its scalar head is dropped).
    It is required for HQFi/HQFr.  For HQSc only its architecture is
    reused; otherwise ``n_features`` and ``hidden`` describe a fresh one.
    Circuit angles start uniform in ``[-init_scale, init_scale]``.
    """
    strategy = Strategy.parse(strategy)
    if not 2 <= n_qubits <= 12:
        raise ConfigurationError(f"n_qubits must lie in [2, 12], got {n_qubits}")
    if strategy.uses_pretrained:
        if backbone is None:
            raise ConfigurationError(f"{strategy.value} needs a pretrained backbone checkpoint")
        extractor = backbone if backbone.activate_output else backbone.feature_extractor()
        if extractor is backbone:
            extractor = mlp_from_dict(mlp_to_dict(backbone))
    else:
        if backbone is not None:
            dims = [backbone.in_dim] + [l.out_dim for l in backbone.layers]
            if not backbone.activate_output:
                dims = dims[:-1]
            n_features, hidden = dims[0], dims[1:]
            dropout_rate = backbone.dropout_rate
        if n_features is None or not hidden:
            raise ConfigurationError("HQSc needs n_features and at least one hidden layer size")
        extractor = MlpModel.build(n_features, hidden, out_dim=None, dropout_rate=dropout_rate, seed=seed)
    extractor.scaler = None
    template = CircuitTemplate(n_qubits, depth)
    projection = DenseLayer.init(extractor.out_dim, n_qubits, substream(seed, "init", 1))
    rng_q = substream(seed, "init", 2)
    params = VqrParams(rng_q.uniform(-init_scale, init_scale, size=template.n_params))
    return HybridModel(extractor, projection, template, params, strategy, seed)


# ---------------------------------------------------------------------------
# forward / backward
# ---------------------------------------------------------------------------


def _backbone_mode(model: HybridModel, mode: str) -> str:
    return mode if model.strategy.backbone_trainable else "eval"


def hybrid_forward(
    model: HybridModel,
    features,
    mode: str = "eval",
    rng: Optional[np.random.Generator] = None,
    noise: Optional[NoiseProfile] = None,
) -> np.ndarray:
    """Scaled predictions in [0, 1], one per row of ``features``."""
    h, _ = mlp_forward(model.backbone, features, _backbone_mode(model, mode), rng)
    e = model.projection.forward(h)
    return model.output_map(forward_batch(model.template, e, model.params, noise))


@dataclass
class HybridGradients:
    loss: float
    backbone: Optional[list]
    projection: list
    quantum: np.ndarray
    predictions: np.ndarray = field(repr=False)

    def trainable(self) -> list:
        out = list(self.backbone) if self.backbone is not None else []
        return out + list(self.projection) + [self.quantum]


def hybrid_backward(
    model: HybridModel,
    features,
    target,
    mode: str = "eval",
    rng: Optional[np.random.Generator] = None,
    noise: Optional[NoiseProfile] = None,
) -> HybridGradients:
    """Gradients of the batch-mean squared error on scaled targets.

    Frozen backbones get ``backbone=None``; nothing is propagated into them.
    """
    h, cache = mlp_forward(model.backbone, features, _backbone_mode(model, mode), rng)
    t = np.asarray(target, dtype=np.float64).reshape(-1)
    if t.shape[0] != h.shape[0]:
        raise ShapeError(f"{h.shape[0]} feature rows but {t.shape[0]} targets")
    e = model.projection.forward(h)
    values, d_params, d_inputs = grad_batch(model.template, e, model.params, noise)
    s = model.output_map(values)
    resid = s - t
    b = t.shape[0]
    d_e = (2.0 / b) * resid / (2.0 * model.n_qubits)  # dL/dE per sample
    d_quantum = d_e @ d_params
    d_embed = d_e[:, None] * d_inputs
    dw, db, dh = model.projection.backward(h, d_embed)
    backbone_grads = None
    if model.strategy.backbone_trainable:
        backbone_grads, _ = mlp_backward(model.backbone, cache, dh)
    return HybridGradients(float(np.mean(resid**2)), backbone_grads, [dw, db], d_quantum, s)


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


def _metrics(model: HybridModel, x, y, noise) -> tuple[float, float]:
    pred = model.predict(x, noise)
    try:
        score = r2(y, pred)
    except ArithmeticError:
        score = float("nan")
    return score, mae(y, pred)


def train_hybrid(
    model: HybridModel,
    train,
    test=None,
    config: TrainConfig = TrainConfig(),
    noise: Optional[NoiseProfile] = None,
    seed: int = 0,
    metrics_every: int = 1,
):
    """Train in place; returns ``(model, history)``.

    ``train`` and ``test`` are ``(features, targets)`` pairs in original
    units.  The target scaler is fitted on the training targets.  History
    entries hold R2/MAE in target units; entry 0 describes the initial
    model, then one entry per ``metrics_every`` epochs (and the last epoch).
    """
    x, y = (np.asarray(a, dtype=np.float64) for a in train)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ConfigurationError("cannot train on an empty fold")
    y = y.reshape(-1)
    if y.shape[0] != x.shape[0]:
        raise ShapeError(f"{x.shape[0]} feature rows but {y.shape[0]} targets")
    model.scaler = MinMaxScaler.fit(y)
    ys = model.scaler.transform(y)
    if test is not None:
        xt, yt = (np.asarray(a, dtype=np.float64) for a in test)
        yt = yt.reshape(-1)

    def record(epoch: int) -> dict:
        entry = {"epoch": epoch}
        entry["train_r2"], entry["train_mae"] = _metrics(model, x, y, noise)
        if test is not None and yt.size:
            entry["test_r2"], entry["test_mae"] = _metrics(model, xt, yt, noise)
        return entry

    history = [record(0)]
    frozen_digest = None if model.strategy.backbone_trainable else model.backbone_digest()
    state = AdamState.for_params(model.trainable_params(), lr=config.lr)
    for epoch in range(config.epochs):
        shuffle = substream(seed, "shuffle", epoch)
        drop = substream(seed, "dropout", epoch)
        for idx in minibatches(x.shape[0], config.batch_size, shuffle):
            g = hybrid_backward(model, x[idx], ys[idx], "train", drop, noise)
            new_params, state = adam_step(model.trainable_params(), g.trainable(), state)
            model.set_trainable_params(new_params)
        if (epoch + 1) % metrics_every == 0 or epoch + 1 == config.epochs:
            history.append(record(epoch + 1))
    if frozen_digest is not None and model.backbone_digest() != frozen_digest:
        raise ContractError("frozen backbone changed during training")
    return model, history


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


def hybrid_to_dict(model: HybridModel) -> dict:
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "strategy": model.strategy.value,
        "n_qubits": model.n_qubits,
        "depth": model.template.depth,
        "seed": model.seed,
        "output_map": {"scale": 0.5 / model.n_qubits, "offset": 0.5},
        "scaler": None if model.scaler is None else [model.scaler.y_min, model.scaler.y_max],
        "backbone": mlp_to_dict(model.backbone),
        "projection": {"weights": encode_array(model.projection.weights), "bias": encode_array(model.projection.bias)},
        "quantum_params": encode_array(model.params.angles),
    }


def hybrid_from_dict(d: dict) -> HybridModel:
    if d.get("format") != CHECKPOINT_FORMAT:
        raise ContractError(f"not a hybrid checkpoint (format={d.get('format')!r})")
    if d.get("version") != CHECKPOINT_VERSION:
        raise ContractError(f"unsupported hybrid checkpoint version {d.get('version')!r}")
    model = HybridModel(
        backbone=mlp_from_dict(d["backbone"]),
        projection=DenseLayer(decode_array(d["projection"]["weights"]), decode_array(d["projection"]["bias"])),
        template=CircuitTemplate(d["n_qubits"], d["depth"]),
        params=VqrParams(decode_array(d["quantum_params"])),
        strategy=Strategy.parse(d["strategy"]),
        seed=d["seed"],
        scaler=None if d["scaler"] is None else MinMaxScaler(*d["scaler"]),
    )
    return model


def save_hybrid(model: HybridModel, path: str | Path) -> None:
    Path(path).write_text(dump_json(hybrid_to_dict(model)), encoding="utf-8")


def load_hybrid(path: str | Path) -> HybridModel:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ContractError(f"cannot read hybrid checkpoint {path}: {exc}") from None
    return hybrid_from_dict(d)
