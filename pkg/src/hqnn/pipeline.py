"""Cross-validated training and evaluation of classical and hybrid models."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional, Sequence

import numpy as np

from .dataset import FoldSplit
from .errors import ConfigurationError
from .hybrid import HybridModel, Strategy, compose, train_hybrid
from .metrics import FoldMetrics, MetricsReport, mae, r2
from .nn import MlpModel, TrainConfig, train_mlp
from .noise import NoiseProfile

log = logging.getLogger(__name__)


def fold_seed(seed: int, fold: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(fold)]).generate_state(1)[0])


def _map(fn: Callable, items: Sequence, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _fold_metrics(predict, x, y, split: FoldSplit, fold: int) -> FoldMetrics:
    tr, te = split.train_indices(fold), split.test_indices(fold)
    ptr, pte = predict(x[tr]), predict(x[te])
    return FoldMetrics(r2(y[tr], ptr), mae(y[tr], ptr), r2(y[te], pte), mae(y[te], pte))


def run_classical_cv(
    x: np.ndarray,
    y: np.ndarray,
    split: FoldSplit,
    hidden: Sequence[int],
    dropout: float,
    config: TrainConfig,
    seed: int,
    threads: int = 1,
):
    """Train one MLP per fold; returns ``(report, models, histories)``."""

    def one(fold: int):
        s = fold_seed(seed, fold)
        tr = split.train_indices(fold)
        model = MlpModel.build(x.shape[1], hidden, 1, dropout, seed=s)
        model, hist = train_mlp(model, x[tr], y[tr], config, seed=s)
        log.info("mlp fold %d: final loss %.4g", fold, hist[-1] if hist else float("nan"))
        return model, hist, _fold_metrics(model.predict, x, y, split, fold)

    results = _map(one, list(range(split.k)), threads)
    report = MetricsReport([r[2] for r in results])
    return report, [r[0] for r in results], [r[1] for r in results]


def run_hybrid_cv(
    x: np.ndarray,
    y: np.ndarray,
    split: FoldSplit,
    strategy,
    n_qubits: int,
    depth: int,
    config: TrainConfig,
    seed: int,
    backbones: Optional[Sequence[MlpModel]] = None,
    hidden: Sequence[int] = (),
    dropout: float = 0.0,
    noise: Optional[NoiseProfile] = None,
    threads: int = 1,
    init_scale: float = 0.1,
    metrics_every: int = 1,
):
    """Train one hybrid model per fold; returns ``(report, models, histories)``.

    ``backbones`` holds one pretrained MLP per fold (or a single one reused
    for every fold) and is required unless the strategy is HQSc.
    """
    strategy = Strategy.parse(strategy)

    def one(fold: int):
        s = fold_seed(seed, fold)
        tr, te = split.train_indices(fold), split.test_indices(fold)
        bb = None
        if backbones:
            bb = backbones[fold] if len(backbones) > 1 else backbones[0]
        model = compose(
            n_qubits,
            depth,
            strategy,
            seed=s,
            backbone=bb,
            n_features=x.shape[1],
            hidden=hidden,
            dropout_rate=dropout,
            init_scale=init_scale,
        )
        model, hist = train_hybrid(
            model, (x[tr], y[tr]), (x[te], y[te]), config, noise=noise, seed=s, metrics_every=metrics_every
        )
        predict = lambda xx: model.predict(xx, noise)  # noqa: E731
        return model, hist, _fold_metrics(predict, x, y, split, fold)

    results = _map(one, list(range(split.k)), threads)
    report = MetricsReport([r[2] for r in results])
    return report, [r[0] for r in results], [r[1] for r in results]


def evaluate_hybrid_cv(
    models: Sequence[HybridModel],
    x: np.ndarray,
    y: np.ndarray,
    split: FoldSplit,
    noise: Optional[NoiseProfile] = None,
    threads: int = 1,
) -> MetricsReport:
    """Re-score trained fold models, optionally under a noise profile."""
    if len(models) != split.k:
        raise ConfigurationError(f"{len(models)} models for {split.k} folds")

    def one(fold: int):
        model = models[fold]
        return _fold_metrics(lambda xx: model.predict(xx, noise), x, y, split, fold)

    return MetricsReport(_map(one, list(range(split.k)), threads))
