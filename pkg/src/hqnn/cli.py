"""Command-line entry point: ``hqnn <subcommand> [flags]``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional

from . import __version__
from .config import QUBIT_CHOICES, STRATEGIES, RunConfig, load_config
from .dataset import Dataset, featurize, load_csv, stratified_kfold, write_csv
from .errors import ConfigurationError, DataError, HqnnError
from .hybrid import Strategy, load_hybrid, params_digest, save_hybrid
from .metrics import MetricsReport, relative_performance_csv, validate_metrics
from .nn import TrainConfig, dump_json, load_mlp, save_mlp
from .noise import NoiseProfile, load_profiles
from .pipeline import evaluate_hybrid_cv, run_classical_cv, run_hybrid_cv

log = logging.getLogger("hqnn")

# config fields that do not affect results and are left out of output metadata
_NON_RESULT_FIELDS = ("threads", "out")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI file; flags override its values")
    p.add_argument("--data", help="input CSV")
    p.add_argument("--out", help="output directory (or file for featurize)")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, help="maximum worker threads across folds")
    p.add_argument("--folds", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--radius", type=int)
    p.add_argument("--nbits", type=int)
    p.add_argument("--hidden", help="comma-separated hidden layer sizes, e.g. 1024,512,256")
    p.add_argument("--dropout", type=float)
    p.add_argument("--verbose", "-v", action="store_true")


def _add_quantum(p: argparse.ArgumentParser) -> None:
    p.add_argument("--qubits", type=int, choices=QUBIT_CHOICES)
    p.add_argument("--depth", type=int)
    p.add_argument("--init-scale", dest="init_scale", type=float)
    p.add_argument("--noise", help="noise profile name from the catalog, or 'none'")
    p.add_argument("--noise-catalog", dest="noise_catalog", help="CSV noise catalog (defaults to the shipped one)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hqnn", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"hqnn {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("featurize", help="append fingerprint columns and scaffold keys to a SMILES CSV")
    _add_common(p)
    p.add_argument("--strict", action="store_true", help="fail if any SMILES does not parse")

    p = sub.add_parser("pretrain", help="cross-validated classical MLP training")
    _add_common(p)

    p = sub.add_parser("train-hqnn", help="cross-validated hybrid model training")
    _add_common(p)
    _add_quantum(p)
    p.add_argument("--strategy", choices=STRATEGIES)
    p.add_argument("--backbone", help="pretrained MLP checkpoint file or directory of mlp_fold*.json")

    p = sub.add_parser("evaluate", help="re-score trained hybrid fold models, optionally under noise")
    _add_common(p)
    _add_quantum(p)
    p.add_argument("--models", help="directory holding hqnn_fold*.json checkpoints")

    p = sub.add_parser("report", help="relative-performance CSV from metrics JSON files")
    p.add_argument("classical", help="classical metrics JSON")
    p.add_argument("hqnn", nargs="+", help="hybrid metrics JSON files (optionally LABEL=path)")
    p.add_argument("--out", help="output CSV (stdout if omitted)")
    p.add_argument("--property", default="property", help="property name for the first column")
    p.add_argument("--model", default="MLP", help="classical model name for the second column")
    p.add_argument("--verbose", "-v", action="store_true")

    p = sub.add_parser("noise-catalog", help="list noise profiles with derived damping parameters")
    p.add_argument("--noise-catalog", dest="noise_catalog")
    p.add_argument("--out", help="write JSON here instead of stdout")
    p.add_argument("--verbose", "-v", action="store_true")
    return parser


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(getattr(args, "config", None))
    cfg.update({k: v for k, v in vars(args).items() if k not in ("config", "command", "verbose")})
    return cfg


def _train_config(cfg: RunConfig) -> TrainConfig:
    return TrainConfig(batch_size=cfg.batch_size, lr=cfg.lr, epochs=cfg.epochs)


def _features(cfg: RunConfig):
    """Load the data CSV, featurizing SMILES in memory when no f-columns exist."""
    ds = load_csv(cfg.data)
    if len(ds) == 0:
        raise DataError(f"{cfg.data} holds no rows")
    if not ds.has_features():
        ds, failures = featurize(ds, cfg.radius, cfg.nbits)
        for i, exc in failures:
            log.warning("row %d skipped: %s", i + 2, exc)
    return ds, ds.feature_matrix(), ds.y


def _split(cfg: RunConfig, ds: Dataset):
    split = stratified_kfold(ds, cfg.folds, cfg.seed)
    log.info("fold sizes %s", split.sizes())
    return split


def _noise(cfg: RunConfig) -> Optional[NoiseProfile]:
    if cfg.noise is None or cfg.noise.lower() == "none":
        return None
    profiles = load_profiles(cfg.noise_catalog)
    for name, prof in profiles.items():
        if name.lower() == cfg.noise.lower():
            return prof
    raise ConfigurationError(f"unknown noise profile {cfg.noise!r}; known: {', '.join(profiles)}")


def _meta(cfg: RunConfig, command: str, split=None, **extra) -> dict:
    d = {k: v for k, v in cfg.as_dict().items() if k not in _NON_RESULT_FIELDS}
    meta = {"command": command, "config": d, "version": __version__}
    if split is not None:
        meta["fold_sizes"] = split.sizes()
    meta.update(extra)
    return meta


def _write_report(report: MetricsReport, path: Path) -> None:
    d = report.to_dict()
    validate_metrics(d)
    path.write_text(dump_json(d), encoding="utf-8")
    log.info("wrote %s", path)


def _print_summary(label: str, report: MetricsReport) -> None:
    parts = [f"{k} {report.format(k)}" for k in ("train_r2", "train_mae", "test_r2", "test_mae")]
    print(f"{label}: " + ", ".join(parts))


def _load_backbones(path: str, k: int) -> list:
    p = Path(path)
    if p.is_dir():
        files = [p / f"mlp_fold{i}.json" for i in range(k)]
        missing = [str(f) for f in files if not f.exists()]
        if missing:
            raise ConfigurationError(f"backbone directory lacks {', '.join(missing)}")
        return [load_mlp(f) for f in files]
    return [load_mlp(p)]


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_featurize(args) -> int:
    cfg = _config(args)
    if not cfg.data:
        raise ConfigurationError("featurize needs --data")
    if not Path(cfg.data).exists():
        raise ConfigurationError(f"data path does not exist: {cfg.data}")
    out = Path(args.out) if args.out else Path(cfg.data).with_suffix(".features.csv")
    ds = load_csv(cfg.data)
    if any(r.smiles is None for r in ds.rows):
        raise DataError("featurize needs a smiles column on every row")
    featurized, failures = featurize(ds, cfg.radius, cfg.nbits, strict=False)
    for i, exc in failures:
        print(f"row {i + 2}: {ds.rows[i].smiles!r}: {exc}", file=sys.stderr)
    if failures and args.strict:
        raise DataError(f"{len(failures)} of {len(ds)} SMILES failed to parse (first at row {failures[0][0] + 2})")
    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(featurized, out)
    print(f"featurized {len(featurized)} rows ({len(failures)} skipped) -> {out}")
    return 0


def cmd_pretrain(args) -> int:
    cfg = _config(args).validate()
    ds, x, y = _features(cfg)
    split = _split(cfg, ds)
    report, models, _ = run_classical_cv(
        x, y, split, cfg.hidden, cfg.dropout, _train_config(cfg), cfg.seed, cfg.threads
    )
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, m in enumerate(models):
        save_mlp(m, out / f"mlp_fold{i}.json")
    report.meta = _meta(cfg, "pretrain", split, n_parameters=models[0].n_parameters())
    _write_report(report, out / "metrics_mlp.json")
    _print_summary("MLP", report)
    return 0


def cmd_train_hqnn(args) -> int:
    cfg = _config(args).validate()
    strategy = Strategy.parse(cfg.strategy)
    ds, x, y = _features(cfg)
    split = _split(cfg, ds)
    noise = _noise(cfg)
    backbones = _load_backbones(cfg.backbone, split.k) if cfg.backbone else None
    if backbones is not None:
        bad = [b.in_dim for b in backbones if b.in_dim != x.shape[1]]
        if bad:
            raise ConfigurationError(f"backbone expects {bad[0]} features, data has {x.shape[1]}")
    report, models, histories = run_hybrid_cv(
        x,
        y,
        split,
        strategy,
        cfg.qubits,
        cfg.depth,
        _train_config(cfg),
        cfg.seed,
        backbones=backbones,
        hidden=cfg.hidden,
        dropout=cfg.dropout,
        noise=noise,
        threads=cfg.threads,
        init_scale=cfg.init_scale,
        metrics_every=max(1, cfg.epochs // 20) if cfg.epochs else 1,
    )
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, m in enumerate(models):
        save_hybrid(m, out / f"hqnn_fold{i}.json")
    digests_after = [m.backbone_digest() for m in models]
    extra = {
        "strategy": strategy.value,
        "n_quantum_params": models[0].template.n_params,
        "parameter_counts": models[0].parameter_counts(),
        "trainable_parameters": models[0].trainable_parameter_count(),
        "noise": noise.name if noise else "none",
        "backbone_digests": digests_after,
        "history": histories,
    }
    if backbones is not None:
        before = [params_digest(backbones[min(i, len(backbones) - 1)].feature_extractor().params()) for i in range(split.k)]
        extra["backbone_digests_before"] = before
        extra["backbone_unchanged"] = before == digests_after
    report.meta = _meta(cfg, "train-hqnn", split, **extra)
    _write_report(report, out / "metrics_hqnn.json")
    log.info("%s with %d quantum parameters", strategy.value, models[0].template.n_params)
    print(f"quantum parameters: {models[0].template.n_params}")
    if "backbone_unchanged" in extra:
        print(f"backbone unchanged: {str(extra['backbone_unchanged']).lower()}")
    _print_summary(f"{strategy.value} ({cfg.qubits}Q)", report)
    return 0


def cmd_evaluate(args) -> int:
    cfg = _config(args).validate()
    if not cfg.models or not Path(cfg.models).is_dir():
        raise ConfigurationError("evaluate needs --models pointing to a directory of hqnn_fold*.json")
    ds, x, y = _features(cfg)
    split = _split(cfg, ds)
    files = [Path(cfg.models) / f"hqnn_fold{i}.json" for i in range(split.k)]
    missing = [str(f) for f in files if not f.exists()]
    if missing:
        raise ConfigurationError(f"missing checkpoints: {', '.join(missing)}")
    models = [load_hybrid(f) for f in files]
    noise = _noise(cfg)
    report = evaluate_hybrid_cv(models, x, y, split, noise, cfg.threads)
    label = noise.name if noise else "none"
    report.meta = _meta(cfg, "evaluate", split, noise=label, strategy=models[0].strategy.value)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_report(report, out / f"metrics_eval_{label}.json")
    _print_summary(f"evaluate [{label}]", report)
    return 0


def _read_report(path: str) -> MetricsReport:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path} is not valid JSON: {exc}") from None
    validate_metrics(d)
    return MetricsReport.from_dict(d)


def cmd_report(args) -> int:
    classical = _read_report(args.classical)
    hqnns = {}
    for item in args.hqnn:
        label, _, path = item.rpartition("=")
        rep = _read_report(path)
        if not label:
            m = rep.meta
            label = f"{m.get('strategy', 'HQNN')} ({m.get('config', {}).get('qubits', '?')}Q)"
        hqnns[label] = rep
    text = relative_performance_csv(args.property, args.model, classical, hqnns)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_noise_catalog(args) -> int:
    profiles = load_profiles(args.noise_catalog)
    rows = {}
    for name, p in profiles.items():
        rows[name] = {
            "two_qubit_error": p.two_qubit_error,
            "sx_error": p.sx_error,
            "readout_error": p.readout_error,
            "t1_seconds": p.t1_seconds,
            "t2_seconds": p.t2_seconds,
            "gate_time_seconds": p.gate_time_seconds,
            "gamma": p.gamma(),
            "lambda": p.lam(),
        }
    text = json.dumps(rows, indent=1)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return 0


COMMANDS = {
    "featurize": cmd_featurize,
    "pretrain": cmd_pretrain,
    "train-hqnn": cmd_train_hqnn,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
    "noise-catalog": cmd_noise_catalog,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return COMMANDS[args.command](args)
    except HqnnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
