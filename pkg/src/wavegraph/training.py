"""Alternating projected SGD, early stopping, and evaluation.

Each epoch runs (a) a forward/backward pass and a plain SGD step on the
network weights, then for learned-correspondence mode (b) a fresh
forward/backward pass and an SGD step on the correspondence matrices with
nonnegativity clamping. Early stopping watches the validation
cross-entropy; the best-epoch parameters are restored at the end.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tape, zero_grads
from .errors import (ConfigError, DataError, DivergenceError, DomainError,
                     ParameterError)
from .graphs import UNLABELED, ModalityGraph
from .model import ModelConfig, ModelParams, forward_full
from .objective import LossWeights, total_objective
from .wavelets import WaveletBasis

MASK_KINDS = ("train", "val", "test")


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    max_epochs: int = 200
    patience: int = 50
    seed: int = 0
    loss_weights: LossWeights = field(default_factory=LossWeights)

    def validate(self) -> None:
        if self.learning_rate < 0:
            raise ParameterError("learning_rate must be >= 0")
        if self.max_epochs < 1:
            raise ParameterError("max_epochs must be >= 1")
        if self.patience < 1:
            raise ParameterError("patience must be >= 1")
        self.loss_weights.validate()


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_acc: float
    dsm: float | None = None


@dataclass
class TrainReport:
    epochs: list[EpochRecord]
    best_epoch: int
    best_val_loss: float
    test_accuracy: list[float]          # per modality, at the best epoch
    final_test_accuracy: list[float]    # per modality, at the last epoch
    dsm_initial: float | None
    dsm_at_best: float | None
    wall_time_s: float

    @property
    def mean_test_accuracy(self) -> float:
        return float(np.mean(self.test_accuracy))


def sgd_step_weights(params: ModelParams, eta: float) -> None:
    """W(t+1) = W(t) - eta * grad, for every non-correspondence tensor."""
    for t in params.weight_group():
        t.value -= eta * t.grad


def sgd_step_permutations(params: ModelParams, eta: float) -> None:
    """Gradient step on each P followed by clamping at zero."""
    if params.mode != "m-gwcn":
        raise ConfigError(
            f"correspondence updates only apply in m-gwcn mode, not {params.mode}")
    for t in params.permutation_group():
        t.value -= eta * t.grad
        np.maximum(t.value, 0.0, out=t.value)


def _mask_of(g: ModalityGraph, kind: str) -> np.ndarray:
    if kind not in MASK_KINDS:
        raise ParameterError(f"unknown mask kind {kind!r}")
    return {"train": g.train_mask, "val": g.val_mask, "test": g.test_mask}[kind]


def evaluate(z_all: list[np.ndarray], graphs: list[ModalityGraph],
             mask_kind: str) -> list[float]:
    """Per-modality accuracy of argmax predictions on the given mask.

    Ties break toward the lowest class index.
    """
    accs = []
    for z, g in zip(z_all, graphs):
        mask = _mask_of(g, mask_kind)
        idx = np.nonzero(mask)[0]
        if idx.size == 0:
            raise ParameterError(f"empty {mask_kind} mask")
        pred = np.argmax(z[idx], axis=1)
        accs.append(float(np.mean(pred == g.labels[idx])))
    return accs


def nll_on_mask(z_all: list[np.ndarray], graphs: list[ModalityGraph],
                mask_kind: str) -> float:
    """Summed negative log-likelihood over the masked labeled nodes."""
    total = 0.0
    for z, g in zip(z_all, graphs):
        mask = _mask_of(g, mask_kind)
        idx = np.nonzero(mask)[0]
        if idx.size == 0:
            raise ParameterError(f"empty {mask_kind} mask")
        labels = g.labels[idx]
        if np.any(labels == UNLABELED):
            raise DataError(f"{mask_kind} node without label")
        probs = z[idx, labels]
        total -= float(np.sum(np.log(np.maximum(probs, 1e-300))))
    return total


def _dsm_value(params: ModelParams) -> float | None:
    """Current doubly-stochastic penalty over unordered pairs (no tape)."""
    pairs = [p for (m, e), p in sorted(params.P.items()) if m < e]
    if not pairs:
        return None
    total = 0.0
    for p in pairs:
        pa = np.abs(p.value)
        total += float(np.sum(np.abs(pa.sum(axis=1) - 1.0)))
        total += float(np.sum(np.abs(pa.sum(axis=0) - 1.0)))
    return total


def _forward_values(graphs, bases, params, cfg) -> list[np.ndarray]:
    tape = Tape()
    z = forward_full(tape, graphs, bases, params, cfg, training=False)
    return [t.value for t in z]


def train(graphs: list[ModalityGraph], bases: list[list[WaveletBasis]],
          cfg: ModelConfig, tcfg: TrainConfig,
          params: ModelParams | None = None,
          correspondences: dict | None = None,
          epoch_callback=None) -> tuple[ModelParams, TrainReport]:
    """Run the alternating optimization until patience or max_epochs.

    Returns the best-validation parameters and the per-epoch report.
    `epoch_callback(record)` fires after each epoch (the CLI streams it);
    `correspondences` feeds the fixed permutations of mv-gwcn mode.
    """
    from .model import init_params  # local import to keep module load light

    tcfg.validate()
    cfg.validate()
    t_start = time.perf_counter()
    seed_seq = np.random.SeedSequence(tcfg.seed)
    init_ss, dropout_ss = seed_seq.spawn(2)
    if params is None:
        params = init_params(cfg, graphs, np.random.default_rng(init_ss),
                             correspondences=correspondences)
    dropout_rng = np.random.default_rng(dropout_ss)
    learn_p = cfg.mode == "m-gwcn"
    eta = tcfg.learning_rate

    dsm_initial = _dsm_value(params) if params.P else None
    records: list[EpochRecord] = []
    best_val = np.inf
    best_epoch = 0
    best_state = params.state_dict()
    best_dsm = dsm_initial
    since_improvement = 0

    def training_loss(epoch):
        tape = Tape()
        try:
            z = forward_full(tape, graphs, bases, params, cfg, training=True,
                             rng=dropout_rng)
            loss = total_objective(tape, z, params.P, params, graphs,
                                   tcfg.loss_weights)
        except DomainError as exc:
            # a saturated class probability hit log(0): the loss is +inf
            raise DivergenceError(
                f"non-finite training loss at epoch {epoch}: {exc}") from exc
        if not np.isfinite(float(loss.value[0, 0])):
            raise DivergenceError(f"non-finite training loss at epoch {epoch}")
        return tape, loss

    for epoch in range(1, tcfg.max_epochs + 1):
        # pass (a): network weights
        zero_grads(params.all_tensors())
        tape, loss = training_loss(epoch)
        train_loss = float(loss.value[0, 0])
        tape.backward(loss)
        sgd_step_weights(params, eta)

        # pass (b): correspondence matrices, then clamp
        if learn_p:
            zero_grads(params.all_tensors())
            tape, loss = training_loss(epoch)
            tape.backward(loss)
            sgd_step_permutations(params, eta)
        for p in params.permutation_group():
            assert p.value.min() >= 0.0, "P went negative"

        # evaluation pass (dropout off)
        z_eval = _forward_values(graphs, bases, params, cfg)
        val_loss = nll_on_mask(z_eval, graphs, "val")
        val_acc = float(np.mean(evaluate(z_eval, graphs, "val")))
        dsm_now = _dsm_value(params) if params.P else None
        rec = EpochRecord(epoch=epoch, train_loss=train_loss,
                          val_loss=val_loss, val_acc=val_acc, dsm=dsm_now)
        records.append(rec)
        if epoch_callback is not None:
            epoch_callback(rec)

        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best_state = params.state_dict()
            best_dsm = dsm_now
            since_improvement = 0
        else:
            since_improvement += 1
            if since_improvement >= tcfg.patience:
                break

    z_final = _forward_values(graphs, bases, params, cfg)
    final_test = evaluate(z_final, graphs, "test")
    params.load_state(best_state)
    z_best = _forward_values(graphs, bases, params, cfg)
    best_test = evaluate(z_best, graphs, "test")

    report = TrainReport(
        epochs=records,
        best_epoch=best_epoch,
        best_val_loss=float(best_val),
        test_accuracy=best_test,
        final_test_accuracy=final_test,
        dsm_initial=dsm_initial,
        dsm_at_best=best_dsm,
        wall_time_s=time.perf_counter() - t_start,
    )
    return params, report
