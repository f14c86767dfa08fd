"""Command-line entry point.

Subcommands: ``synth`` (write a synthetic multimodal bundle), ``wavelet``
(per-scale basis diagnostics), ``train`` (full training run with a
metrics stream, summary, and parameter snapshot), ``eval`` (test accuracy
of a saved snapshot). Exit codes: 0 success, 1 runtime failure,
2 config/parameter error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import data as data_io
from .config import CONFIG_KEYS, RunConfig, build_run_config, parse_config_file, parse_value
from .errors import (ConfigError, ParameterError, SnapshotError, WavegraphError)
from .graphs import spectral_prep
from .linalg import densify
from .model import ModelConfig, build_bases, init_params
from .objective import LossWeights
from .training import TrainConfig, evaluate, train
from .wavelets import chebyshev_wavelet, dense_wavelet_oracle

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


def _fmt(x: float) -> str:
    return f"{x:.10g}"


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="key = value preset file")
    for key in CONFIG_KEYS:
        parser.add_argument(f"--{key}", default=None, metavar="V")


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    file_values = parse_config_file(args.config) if args.config else None
    flag_values = {}
    for key in CONFIG_KEYS:
        raw = getattr(args, key, None)
        if raw is not None:
            flag_values[key] = parse_value(key, raw)
    return build_run_config(file_values, flag_values)


def _load_dataset(cfg: RunConfig) -> data_io.DatasetBundle:
    if not cfg.data:
        raise ConfigError("no dataset: set 'data' in the config or --data")
    if not os.path.isdir(cfg.data):
        raise ConfigError(f"dataset directory {cfg.data!r} does not exist")
    return data_io.load_bundle(cfg.data, row_normalize=cfg.row_normalize)


def _apply_splits(bundle: data_io.DatasetBundle, cfg: RunConfig) -> None:
    for m, g in enumerate(bundle.modalities):
        seed = [cfg.seed, m]
        if cfg.split == "per-class":
            bundle.modalities[m] = data_io.semi_supervised_split(
                g, cfg.per_class, cfg.n_val, cfg.n_test, seed)
        elif cfg.split == "fractional":
            bundle.modalities[m] = data_io.fractional_split(
                g, cfg.train_frac, cfg.val_frac, seed)
        else:
            raise ConfigError(f"unknown split {cfg.split!r}")


def _model_config(cfg: RunConfig, bundle: data_io.DatasetBundle) -> ModelConfig:
    mc = ModelConfig(
        n_modalities=len(bundle.modalities),
        n_layers=cfg.n_layers,
        scales=cfg.scales,
        hidden_dims=cfg.expanded_hidden_dims(),
        cheby_order=cfg.cheby_order,
        wavelet_threshold=cfg.wavelet_threshold,
        dropout_rate=cfg.dropout_rate,
        activation=cfg.activation,
        n_classes=bundle.n_classes(),
        mode=cfg.mode,
        coeff_method=cfg.coeff_method,
        p_init=cfg.p_init,
    )
    mc.validate()
    return mc


def cmd_synth(cfg: RunConfig) -> int:
    bundle = data_io.synth_multimodal(
        cfg.synth_nodes, cfg.synth_classes, cfg.synth_modalities,
        list(cfg.synth_dims), cfg.synth_noise, cfg.synth_k, cfg.seed)
    data_io.save_bundle(bundle, cfg.out)
    print(f"wrote {len(bundle.modalities)} modalities to {cfg.out}")
    return EXIT_OK


def cmd_wavelet(cfg: RunConfig) -> int:
    bundle = _load_dataset(cfg)
    print("modality scale q threshold nnz density oracle_err")
    for m, g in enumerate(bundle.modalities):
        prep = spectral_prep(g)
        for s in cfg.scales:
            basis = chebyshev_wavelet(prep.rescaled, s, cfg.cheby_order,
                                      cfg.wavelet_threshold, cfg.coeff_method)
            n = g.n_nodes
            density = basis.psi.nnz / float(n * n)
            if n <= 200:
                oracle = dense_wavelet_oracle(prep.laplacian, s)
                err = _fmt(float(np.max(np.abs(densify(basis.psi) - oracle))))
            else:
                err = "n/a"
            print(f"{m} {_fmt(s)} {cfg.cheby_order} {_fmt(cfg.wavelet_threshold)} "
                  f"{basis.psi.nnz} {_fmt(density)} {err}")
    return EXIT_OK


def _train_once(cfg: RunConfig):
    bundle = _load_dataset(cfg)
    _apply_splits(bundle, cfg)
    mc = _model_config(cfg, bundle)
    if mc.mode == "mv-gwcn" and not bundle.correspondence:
        raise ConfigError("mv-gwcn needs correspondence files in the bundle")
    bases = build_bases(bundle.modalities, mc)
    tc = TrainConfig(
        learning_rate=cfg.learning_rate,
        max_epochs=cfg.max_epochs,
        patience=cfg.patience,
        seed=cfg.seed,
        loss_weights=LossWeights(alpha=cfg.alpha, beta=cfg.beta,
                                 gamma=cfg.gamma, lambda_wm=cfg.lambda_wm),
    )
    return bundle, mc, bases, tc


def cmd_train(cfg: RunConfig) -> int:
    bundle, mc, bases, tc = _train_once(cfg)
    os.makedirs(cfg.out, exist_ok=True)
    metrics_path = os.path.join(cfg.out, "metrics.txt")
    with open(metrics_path, "w", encoding="utf-8") as metrics:
        def stream(rec):
            line = (f"epoch={rec.epoch} train_loss={_fmt(rec.train_loss)} "
                    f"val_loss={_fmt(rec.val_loss)} val_acc={_fmt(rec.val_acc)}")
            print(line)
            metrics.write(line + "\n")

        params, report = train(
            bundle.modalities, bases, mc, tc,
            correspondences=bundle.correspondence if mc.mode == "mv-gwcn" else None,
            epoch_callback=stream)

    summary = {
        "mode": mc.mode,
        "best_epoch": report.best_epoch,
        "best_val_loss": report.best_val_loss,
        "test_accuracy": report.test_accuracy,
        "mean_test_accuracy": report.mean_test_accuracy,
        "final_test_accuracy": report.final_test_accuracy,
        "dsm_initial": report.dsm_initial,
        "dsm_at_best": report.dsm_at_best,
        "epochs_run": len(report.epochs),
        "wall_time_s": report.wall_time_s,
    }
    with open(os.path.join(cfg.out, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    np.savez(os.path.join(cfg.out, "params.npz"), **params.state_dict())
    for m, acc in enumerate(report.test_accuracy):
        print(f"test_acc_m{m}={_fmt(acc)}")
    print(f"mean_test_acc={_fmt(report.mean_test_accuracy)} "
          f"best_epoch={report.best_epoch} wall_time_s={report.wall_time_s:.3f}")
    return EXIT_OK


def cmd_eval(cfg: RunConfig, params_path: str) -> int:
    bundle, mc, bases, tc = _train_once(cfg)
    rng = np.random.default_rng(0)  # placeholder values; snapshot overwrites
    params = init_params(
        mc, bundle.modalities, rng,
        correspondences=bundle.correspondence if mc.mode == "mv-gwcn" else None)
    try:
        with np.load(params_path) as npz:
            state = {k: npz[k] for k in npz.files}
    except Exception as exc:
        raise SnapshotError(f"cannot read snapshot {params_path}: {exc}") from exc
    try:
        params.load_state(state)
    except WavegraphError as exc:
        raise SnapshotError(f"snapshot does not match config: {exc}") from exc
    from .autodiff import Tape
    from .model import forward_full
    tape = Tape()
    z = forward_full(tape, bundle.modalities, bases, params, mc, training=False)
    accs = evaluate([t.value for t in z], bundle.modalities, "test")
    for m, acc in enumerate(accs):
        print(f"test_acc_m{m}={_fmt(acc)}")
    print(f"mean_test_acc={_fmt(float(np.mean(accs)))}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wavegraph",
        description="graph wavelet convolutional networks, unimodal and multimodal")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("synth", "wavelet", "train"):
        p = sub.add_parser(name)
        _add_config_flags(p)
    p_eval = sub.add_parser("eval")
    _add_config_flags(p_eval)
    p_eval.add_argument("--params", required=True, help="params.npz snapshot")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config_from_args(args)
        if args.command == "synth":
            return cmd_synth(cfg)
        if args.command == "wavelet":
            return cmd_wavelet(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "eval":
            return cmd_eval(cfg, args.params)
        raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, ParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except WavegraphError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
