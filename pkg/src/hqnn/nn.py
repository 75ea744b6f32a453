"""Feed-forward MLP written against numpy: ReLU, inverted dropout, MSE, Adam."""

from __future__ import annotations

import base64
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError, ContractError, DataError, ShapeError
from .rng import substream

CHECKPOINT_FORMAT = "hqnn-mlp"
CHECKPOINT_VERSION = 1


@dataclass
class DenseLayer:
    weights: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ShapeError(f"inconsistent layer shapes {self.weights.shape} / {self.bias.shape}")

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def init(cls, in_dim: int, out_dim: int, rng: np.random.Generator) -> "DenseLayer":
        # He-uniform on fan-in; zero bias
        bound = math.sqrt(6.0 / in_dim)
        return cls(rng.uniform(-bound, bound, size=(out_dim, in_dim)), np.zeros(out_dim))

    def forward(self, x: np.ndarray) -> np.ndarray:
        return x @ self.weights.T + self.bias

    def backward(self, x: np.ndarray, upstream: np.ndarray):
        """Return ``(dW, db, dx)`` for upstream gradient w.r.t. the layer output."""
        return upstream.T @ x, upstream.sum(axis=0), upstream @ self.weights


@dataclass
class MinMaxScaler:
    y_min: float
    y_max: float

    def __post_init__(self):
        if not self.y_max > self.y_min:
            raise DataError(f"min-max scaling needs y_max > y_min, got [{self.y_min}, {self.y_max}]")

    @classmethod
    def fit(cls, y) -> "MinMaxScaler":
        y = np.asarray(y, dtype=np.float64)
        if y.size == 0:
            raise DataError("cannot fit a scaler on zero targets")
        lo, hi = float(np.min(y)), float(np.max(y))
        if hi == lo:
            raise DataError(f"targets are constant ({lo}); min-max scaling is undefined")
        return cls(lo, hi)

    def transform(self, y) -> np.ndarray:
        return (np.asarray(y, dtype=np.float64) - self.y_min) / (self.y_max - self.y_min)

    def inverse(self, s) -> np.ndarray:
        return np.asarray(s, dtype=np.float64) * (self.y_max - self.y_min) + self.y_min


@dataclass
class MlpModel:
    """Stack of dense layers with ReLU (+ dropout) after every hidden layer.

    With ``activate_output`` the last layer is also followed by
    ReLU/dropout, which is how a classical regressor is reused as a
    feature extractor once its scalar head is removed.
    """

    layers: list
    dropout_rate: float = 0.0
    activate_output: bool = False
    scaler: Optional[MinMaxScaler] = None
    seed: Optional[int] = None
    version: int = field(default=0, compare=False)

    def __post_init__(self):
        if not self.layers:
            raise ConfigurationError("an MLP needs at least one layer")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigurationError(f"dropout rate must lie in [0, 1), got {self.dropout_rate}")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.out_dim != b.in_dim:
                raise ShapeError(f"layer output {a.out_dim} does not feed next input {b.in_dim}")

    @classmethod
    def build(
        cls,
        in_dim: int,
        hidden: Sequence[int],
        out_dim: Optional[int] = 1,
        dropout_rate: float = 0.0,
        seed: int = 0,
    ) -> "MlpModel":
        """Fresh network; ``out_dim=None`` builds a feature extractor with no head."""
        rng = substream(seed, "init", 0)
        dims = [in_dim, *hidden] + ([] if out_dim is None else [out_dim])
        if len(dims) < 2:
            raise ConfigurationError("an MLP needs at least one layer")
        layers = [DenseLayer.init(a, b, rng) for a, b in zip(dims, dims[1:])]
        return cls(layers, dropout_rate, activate_output=out_dim is None, seed=seed)

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    def params(self) -> list:
        out = []
        for layer in self.layers:
            out += [layer.weights, layer.bias]
        return out

    def set_params(self, params: Sequence[np.ndarray]) -> None:
        if len(params) != 2 * len(self.layers):
            raise ShapeError(f"expected {2 * len(self.layers)} arrays, got {len(params)}")
        for layer, w, b in zip(self.layers, params[0::2], params[1::2]):
            if w.shape != layer.weights.shape or b.shape != layer.bias.shape:
                raise ShapeError("parameter shapes do not match the model")
            layer.weights, layer.bias = w, b
        self.version += 1

    def n_parameters(self) -> int:
        return sum(p.size for p in self.params())

    def feature_extractor(self) -> "MlpModel":
        """Copy of this network with its final (scalar) layer removed."""
        if len(self.layers) < 2:
            raise ConfigurationError("a single-layer MLP has no hidden representation to extract")
        layers = [DenseLayer(l.weights.copy(), l.bias.copy()) for l in self.layers[:-1]]
        return MlpModel(layers, self.dropout_rate, activate_output=True, seed=self.seed)

    def predict(self, features) -> np.ndarray:
        """Eval-mode output, inverse-scaled to target units when a scaler is attached."""
        out, _ = mlp_forward(self, features, "eval")
        out = out[:, 0] if out.shape[1] == 1 else out
        return self.scaler.inverse(out) if self.scaler is not None else out


@dataclass
class ForwardCache:
    model_id: int
    version: int
    inputs: list  # input to each layer
    pre: list  # pre-activations
    masks: list  # dropout masks (already scaled) or None


def _as_2d(features, in_dim: int) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != in_dim:
        raise ShapeError(f"features need {in_dim} columns, got shape {x.shape}")
    return x


def mlp_forward(model: MlpModel, features, mode: str = "eval", rng: Optional[np.random.Generator] = None):
    """Run the network; returns ``(output (B, out), cache)``.

    Train mode draws inverted-dropout masks from ``rng``; eval mode is
    deterministic and ignores ``rng``.
    """
    if mode not in ("train", "eval"):
        raise ConfigurationError(f"mode must be 'train' or 'eval', got {mode!r}")
    x = _as_2d(features, model.in_dim)
    p = model.dropout_rate
    use_dropout = mode == "train" and p > 0.0
    if use_dropout and rng is None:
        raise ConfigurationError("train mode with dropout needs an rng")
    inputs, pre, masks = [], [], []
    h = x
    last = len(model.layers) - 1
    for i, layer in enumerate(model.layers):
        inputs.append(h)
        z = layer.forward(h)
        pre.append(z)
        if i < last or model.activate_output:
            h = np.maximum(z, 0.0)
            if use_dropout:
                mask = (rng.random(h.shape) >= p) / (1.0 - p)
                h = h * mask
                masks.append(mask)
            else:
                masks.append(None)
        else:
            h = z
            masks.append(None)
    return h, ForwardCache(id(model), model.version, inputs, pre, masks)


def mlp_backward(model: MlpModel, cache: ForwardCache, upstream_grad):
    """Backpropagate ``upstream_grad`` (d loss / d output).

    Returns ``(grads, d_input)`` where ``grads`` follows ``model.params()``.
    """
    if cache.model_id != id(model) or cache.version != model.version or len(cache.inputs) != len(model.layers):
        raise ContractError("forward cache does not belong to this model state")
    g = np.asarray(upstream_grad, dtype=np.float64)
    if g.ndim == 1:
        g = g[:, None] if model.out_dim == 1 else g[None, :]
    if g.shape != cache.pre[-1].shape:
        raise ShapeError(f"upstream gradient shape {g.shape} does not match output {cache.pre[-1].shape}")
    grads = [None] * (2 * len(model.layers))
    last = len(model.layers) - 1
    for i in range(last, -1, -1):
        layer = model.layers[i]
        if i < last or model.activate_output:
            if cache.masks[i] is not None:
                g = g * cache.masks[i]
            g = g * (cache.pre[i] > 0.0)
        dw, db, g = layer.backward(cache.inputs[i], g)
        grads[2 * i], grads[2 * i + 1] = dw, db
    return grads, g


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------


@dataclass
class AdamState:
    m: list
    v: list
    step_count: int = 0
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_params(cls, params: Sequence[np.ndarray], lr: float = 0.001, **kw) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], lr=lr, **kw)


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState):
    """One bias-corrected Adam update; returns ``(new_params, new_state)``."""
    if not (len(params) == len(grads) == len(state.m)):
        raise ShapeError("params, grads and optimizer state differ in length")
    t = state.step_count + 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape or p.shape != m.shape:
            raise ShapeError(f"shape mismatch in Adam step: {p.shape} / {g.shape} / {m.shape}")
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        new_p.append(p - state.lr * (m / c1) / (np.sqrt(v / c2) + state.epsilon))
        new_m.append(m)
        new_v.append(v)
    return new_p, AdamState(new_m, new_v, t, state.lr, b1, b2, state.epsilon)


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


@dataclass
class TrainConfig:
    batch_size: int = 128
    lr: float = 0.001
    epochs: int = 300

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 0 or not self.lr > 0:
            raise ConfigurationError(f"invalid training config {self}")


def minibatches(n: int, batch_size: int, rng: np.random.Generator):
    """Shuffled index batches; the final short batch is kept."""
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def train_mlp(model: MlpModel, features, targets, config: TrainConfig = TrainConfig(), seed: int = 0):
    """Fit ``model`` in place on min-max scaled targets with MSE + Adam.

    The scaler is fitted on ``targets`` (the training fold) and attached to
    the model.  Returns ``(model, history)`` where ``history[e]`` is the mean
    minibatch loss of epoch ``e``.
    """
    x = _as_2d(features, model.in_dim)
    y = np.asarray(targets, dtype=np.float64).reshape(-1)
    if x.shape[0] == 0:
        raise ConfigurationError("cannot train on an empty fold")
    if y.shape[0] != x.shape[0]:
        raise ShapeError(f"{x.shape[0]} feature rows but {y.shape[0]} targets")
    if model.out_dim != 1:
        raise ConfigurationError("train_mlp fits scalar regressors only")
    model.scaler = MinMaxScaler.fit(y)
    ys = model.scaler.transform(y)
    state = AdamState.for_params(model.params(), lr=config.lr)
    history = []
    for epoch in range(config.epochs):
        shuffle = substream(seed, "shuffle", epoch)
        drop = substream(seed, "dropout", epoch)
        total, count = 0.0, 0
        for idx in minibatches(x.shape[0], config.batch_size, shuffle):
            out, cache = mlp_forward(model, x[idx], "train", drop)
            resid = out[:, 0] - ys[idx]
            total += float(np.sum(resid**2))
            count += idx.size
            grads, _ = mlp_backward(model, cache, (2.0 / idx.size) * resid)
            new_params, state = adam_step(model.params(), grads, state)
            model.set_params(new_params)
        history.append(total / count)
    return model, history


def mse(pred, target) -> float:
    d = np.asarray(pred, dtype=np.float64) - np.asarray(target, dtype=np.float64)
    return float(np.mean(d * d))


# ---------------------------------------------------------------------------
# checkpoints: JSON with base64 little-endian float64 payloads
# ---------------------------------------------------------------------------


def encode_array(a: np.ndarray) -> dict:
    a = np.ascontiguousarray(a, dtype="<f8")
    return {"shape": list(a.shape), "data": base64.b64encode(a.tobytes()).decode("ascii")}


def decode_array(d: dict) -> np.ndarray:
    raw = base64.b64decode(d["data"].encode("ascii"))
    return np.frombuffer(raw, dtype="<f8").reshape(d["shape"]).astype(np.float64)


def mlp_to_dict(model: MlpModel) -> dict:
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "dropout_rate": model.dropout_rate,
        "activate_output": model.activate_output,
        "seed": model.seed,
        "scaler": None if model.scaler is None else [model.scaler.y_min, model.scaler.y_max],
        "layers": [{"weights": encode_array(l.weights), "bias": encode_array(l.bias)} for l in model.layers],
    }


def mlp_from_dict(d: dict) -> MlpModel:
    if d.get("format") != CHECKPOINT_FORMAT:
        raise ContractError(f"not an MLP checkpoint (format={d.get('format')!r})")
    if d.get("version") != CHECKPOINT_VERSION:
        raise ContractError(f"unsupported MLP checkpoint version {d.get('version')!r}")
    layers = [DenseLayer(decode_array(l["weights"]), decode_array(l["bias"])) for l in d["layers"]]
    scaler = None if d["scaler"] is None else MinMaxScaler(*d["scaler"])
    return MlpModel(layers, d["dropout_rate"], d["activate_output"], scaler, d["seed"])


def dump_json(obj: dict) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def save_mlp(model: MlpModel, path: str | Path) -> None:
    Path(path).write_text(dump_json(mlp_to_dict(model)), encoding="utf-8")


def load_mlp(path: str | Path) -> MlpModel:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ContractError(f"cannot read MLP checkpoint {path}: {exc}") from None
    return mlp_from_dict(d)
