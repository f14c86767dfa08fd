"""The composite training objective.

total = CE + alpha * DSM + beta * sum ||W||_F^2 + gamma * BM + lambda * WM

CE is the (negative log-likelihood) cross-entropy summed over labeled
training nodes of every modality; DSM penalises distance of each
correspondence matrix from the doubly stochastic set; BM ties the class
distributions of modality pairs together through P; WM is the graph
Dirichlet energy of the class distributions. All terms are sums, not
means, so the learning rates quoted with the model apply as-is.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tape, Tensor, constant
from .errors import DataError, ParameterError, ShapeError
from .graphs import UNLABELED, ModalityGraph, unnormalized_laplacian
from .model import ModelParams


@dataclass
class LossWeights:
    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0
    lambda_wm: float = 0.0

    def validate(self) -> None:
        for name in ("alpha", "beta", "gamma", "lambda_wm"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ParameterError(f"loss weight {name} must be finite and >= 0")


def _scalar_zero(tape: Tape) -> Tensor:
    return constant([[0.0]])


def cross_entropy(tape: Tape, z_all: list[Tensor],
                  graphs: list[ModalityGraph]) -> Tensor:
    """- sum_m sum_{i in train(m)} ln Z_m(i, y_i)."""
    total = None
    for z, g in zip(z_all, graphs):
        train = np.nonzero(g.train_mask)[0]
        if train.size == 0:
            raise DataError("cross_entropy: empty training mask")
        labels = g.labels[train]
        if np.any(labels == UNLABELED):
            raise DataError("cross_entropy: train node without label")
        n, c = z.shape
        onehot = np.zeros((n, c))
        onehot[train, labels] = 1.0
        # select Z(i, y_i) on train rows; off-mask rows become 1 so their
        # log contribution is exactly zero
        picked = tape.matmul(tape.mul_elementwise(z, constant(onehot)),
                             constant(np.ones((c, 1))))
        offset = np.ones((n, 1))
        offset[train] = 0.0
        shifted = tape.add(picked, constant(offset))
        term = tape.sum_all(tape.log(shifted))
        total = term if total is None else tape.add(total, term)
    return tape.scale(total, -1.0)


def dsm_loss(tape: Tape, p_all: list[Tensor]) -> Tensor:
    """sum over P of sum_i |row_i(|P|) - 1| + sum_j |col_j(|P|) - 1|."""
    total = None
    for p in p_all:
        n_m, n_e = p.shape
        pa = tape.elementwise_abs(p)
        row_dev = tape.elementwise_abs(
            tape.sub(tape.matmul(pa, constant(np.ones((n_e, 1)))),
                     constant(np.ones((n_m, 1)))))
        col_dev = tape.elementwise_abs(
            tape.sub(tape.matmul(constant(np.ones((1, n_m))), pa),
                     constant(np.ones((1, n_e)))))
        term = tape.add(tape.sum_all(row_dev), tape.sum_all(col_dev))
        total = term if total is None else tape.add(total, term)
    return _scalar_zero(tape) if total is None else total


def weight_decay(tape: Tape, params: ModelParams) -> Tensor:
    """Sum of squared Frobenius norms over all W kernels."""
    total = None
    for w in params.w_kernels():
        term = tape.frobenius_sq(w)
        total = term if total is None else tape.add(total, term)
    return _scalar_zero(tape) if total is None else total


def between_modality_reg(tape: Tape, z_all: list[Tensor],
                         p_all: dict) -> Tensor:
    """sum_{m<e} ||P^T Z_m - Z_e||_F^2 + ||Z_m - P Z_e||_F^2."""
    total = None
    m_count = len(z_all)
    for m in range(m_count):
        for e in range(m + 1, m_count):
            p = p_all[(m, e)]
            if p.shape != (z_all[m].shape[0], z_all[e].shape[0]):
                raise ShapeError(
                    f"between_modality_reg: P{(m, e)} is {p.shape}")
            t1 = tape.frobenius_sq(
                tape.sub(tape.matmul(tape.transpose(p), z_all[m]), z_all[e]))
            t2 = tape.frobenius_sq(
                tape.sub(z_all[m], tape.matmul(p, z_all[e])))
            term = tape.add(t1, t2)
            total = term if total is None else tape.add(total, term)
    return _scalar_zero(tape) if total is None else total


def within_modality_reg(tape: Tape, z_all: list[Tensor],
                        graphs: list[ModalityGraph]) -> Tensor:
    """sum_m sum_{i<j} a_ij ||Z_m(i,:) - Z_m(j,:)||^2 = tr(Z^T (D - A) Z)."""
    total = None
    for z, g in zip(z_all, graphs):
        lap = unnormalized_laplacian(g.adjacency)
        term = tape.sum_all(tape.mul_elementwise(z, tape.spmm_const(lap, z)))
        total = term if total is None else tape.add(total, term)
    return _scalar_zero(tape) if total is None else total


def total_objective(tape: Tape, z_all: list[Tensor], p_all: dict,
                    params: ModelParams, graphs: list[ModalityGraph],
                    weights: LossWeights) -> Tensor:
    """Weighted sum of all terms; alpha/gamma terms vanish without P."""
    weights.validate()
    total = cross_entropy(tape, z_all, graphs)
    if p_all and weights.alpha != 0.0:
        total = tape.add(total, tape.scale(
            dsm_loss(tape, _unordered_pairs(p_all)), weights.alpha))
    if weights.beta != 0.0:
        total = tape.add(total, tape.scale(weight_decay(tape, params),
                                           weights.beta))
    if p_all and weights.gamma != 0.0:
        total = tape.add(total, tape.scale(
            between_modality_reg(tape, z_all, p_all), weights.gamma))
    if weights.lambda_wm != 0.0:
        total = tape.add(total, tape.scale(
            within_modality_reg(tape, z_all, graphs), weights.lambda_wm))
    return total


def _unordered_pairs(p_all: dict) -> list[Tensor]:
    """One P per unordered pair (the (m, e) with m < e)."""
    return [p for (m, e), p in sorted(p_all.items()) if m < e]
