"""Network layers and full forward passes.

One convolution unit filters in the wavelet domain (psi diag(theta)
psi_inv H W) and adds a dropout-regularised projection of the initial
features (X0 V) before the nonlinearity; units at different scales run in
parallel and are averaged into the layer output. Multimodal variants add
one cross-modality layer that re-expresses each modality's embeddings
through the other modalities' wavelet operators, conjugated by a
correspondence matrix P (learned and relaxed, or fixed 0/1), followed by
a shared softmax classifier head.

Modes: "gwcn" (single modality, no cross layer), "mv-gwcn" (fixed 0/1
correspondences), "m-gwcn" (learned nonnegative correspondences).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tape, Tensor, constant
from .errors import ConfigError, ParameterError, ShapeError
from .graphs import ModalityGraph, spectral_prep
from .linalg import SparseMatrix
from .wavelets import WaveletBasis, chebyshev_wavelet

MODES = ("gwcn", "mv-gwcn", "m-gwcn")
ACTIVATIONS = ("relu", "identity")
P_INITS = ("random", "uniform")


@dataclass
class ModelConfig:
    n_modalities: int = 1
    n_layers: int = 2
    scales: tuple[float, ...] = (0.7, 1.0)
    hidden_dims: tuple[int, ...] = (16, 16)
    cheby_order: int = 40
    wavelet_threshold: float = 1e-4
    dropout_rate: float = 0.5
    activation: str = "relu"
    n_classes: int = 2
    mode: str = "gwcn"
    coeff_method: str = "quadrature"
    p_init: str = "random"

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.p_init not in P_INITS:
            raise ConfigError(f"unknown p_init {self.p_init!r}")
        if not self.scales:
            raise ConfigError("scales must be nonempty")
        if any(s < 0 for s in self.scales):
            raise ConfigError("scales must be >= 0")
        if len(self.hidden_dims) != self.n_layers:
            raise ConfigError(
                f"hidden_dims has {len(self.hidden_dims)} entries for "
                f"{self.n_layers} layers")
        if self.n_layers < 1 or self.n_classes < 1 or self.n_modalities < 1:
            raise ConfigError("layer, class, and modality counts must be >= 1")
        if self.mode == "gwcn" and self.n_modalities != 1:
            raise ConfigError("gwcn mode is single-modality; use m-gwcn or mv-gwcn")
        if self.mode in ("m-gwcn", "mv-gwcn") and self.n_modalities < 2:
            raise ConfigError(
                f"{self.mode} needs at least two modalities; use gwcn for one")
        if not (0.0 <= self.dropout_rate < 1.0):
            raise ConfigError("dropout_rate must be in [0, 1)")


def activation_fn(tape: Tape, name: str):
    if name == "relu":
        return tape.relu
    if name == "identity":
        return lambda t: t
    raise ConfigError(f"unknown activation {name!r}")


@dataclass
class ModelParams:
    """All trainable tensors, grouped for the alternating optimizer."""

    mode: str
    # indexed [modality][layer][scale] / [modality][layer] / [modality]
    W: list = field(default_factory=list)
    V: list = field(default_factory=list)
    theta: list = field(default_factory=list)
    theta_cross: list = field(default_factory=list)
    W_cross: list = field(default_factory=list)
    W_cls: list = field(default_factory=list)
    P: dict = field(default_factory=dict)       # (m, e) -> Tensor

    def weight_group(self) -> list[Tensor]:
        """Everything updated in the first optimizer pass (not P)."""
        out: list[Tensor] = []
        for m in range(len(self.W)):
            for k in range(len(self.W[m])):
                out.extend(self.W[m][k])
                out.append(self.V[m][k])
                out.extend(self.theta[m][k])
        out.extend(self.theta_cross)
        out.extend(self.W_cross)
        out.extend(self.W_cls)
        return out

    def permutation_group(self) -> list[Tensor]:
        return list(self.P.values())

    def all_tensors(self) -> list[Tensor]:
        return self.weight_group() + self.permutation_group()

    def w_kernels(self) -> list[Tensor]:
        """The W matrices covered by weight decay (V, theta, P excluded)."""
        out: list[Tensor] = []
        for m in range(len(self.W)):
            for k in range(len(self.W[m])):
                out.extend(self.W[m][k])
        out.extend(self.W_cross)
        out.extend(self.W_cls)
        return out

    def state_dict(self) -> dict[str, np.ndarray]:
        state: dict[str, np.ndarray] = {}
        for m in range(len(self.W)):
            for k in range(len(self.W[m])):
                for si, t in enumerate(self.W[m][k]):
                    state[f"w_m{m}_k{k}_s{si}"] = t.value.copy()
                state[f"v_m{m}_k{k}"] = self.V[m][k].value.copy()
                for si, t in enumerate(self.theta[m][k]):
                    state[f"theta_m{m}_k{k}_s{si}"] = t.value.copy()
        for m, t in enumerate(self.theta_cross):
            state[f"theta_cross_m{m}"] = t.value.copy()
        for m, t in enumerate(self.W_cross):
            state[f"w_cross_m{m}"] = t.value.copy()
        for m, t in enumerate(self.W_cls):
            state[f"w_cls_m{m}"] = t.value.copy()
        for (m, e), t in self.P.items():
            state[f"p_{m}_{e}"] = t.value.copy()
        return state

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        own = self._named_tensors()
        if set(own) != set(state):
            missing = set(own) - set(state)
            extra = set(state) - set(own)
            raise ShapeError(
                f"snapshot key mismatch (missing={sorted(missing)}, "
                f"unexpected={sorted(extra)})")
        for name, tensor in own.items():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != tensor.value.shape:
                raise ShapeError(
                    f"snapshot {name}: shape {arr.shape} != {tensor.value.shape}")
            tensor.value[...] = arr

    def _named_tensors(self) -> dict[str, Tensor]:
        named: dict[str, Tensor] = {}
        for m in range(len(self.W)):
            for k in range(len(self.W[m])):
                for si, t in enumerate(self.W[m][k]):
                    named[f"w_m{m}_k{k}_s{si}"] = t
                named[f"v_m{m}_k{k}"] = self.V[m][k]
                for si, t in enumerate(self.theta[m][k]):
                    named[f"theta_m{m}_k{k}_s{si}"] = t
        for m, t in enumerate(self.theta_cross):
            named[f"theta_cross_m{m}"] = t
        for m, t in enumerate(self.W_cross):
            named[f"w_cross_m{m}"] = t
        for m, t in enumerate(self.W_cls):
            named[f"w_cls_m{m}"] = t
        for (m, e), t in self.P.items():
            named[f"p_{m}_{e}"] = t
        return named


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def layer_dims(cfg: ModelConfig, feature_dim: int) -> list[int]:
    return [feature_dim, *cfg.hidden_dims]


def init_params(cfg: ModelConfig, graphs: list[ModalityGraph],
                rng: np.random.Generator,
                correspondences: dict | None = None) -> ModelParams:
    """Fresh parameters: Glorot W/V, all-ones theta, and P per mode.

    In mv-gwcn mode `correspondences` must map (m, e) to a column-index
    array encoding the known hard permutations.
    """
    cfg.validate()
    if len(graphs) != cfg.n_modalities:
        raise ConfigError(
            f"config says {cfg.n_modalities} modalities, got {len(graphs)} graphs")
    multimodal = cfg.mode in ("m-gwcn", "mv-gwcn")
    params = ModelParams(mode=cfg.mode)
    n_scales = len(cfg.scales)
    for m, g in enumerate(graphs):
        dims = layer_dims(cfg, g.features.shape[1])
        w_m, v_m, th_m = [], [], []
        for k in range(cfg.n_layers):
            w_m.append([Tensor(_glorot(rng, dims[k], dims[k + 1]), requires_grad=True)
                        for _ in range(n_scales)])
            v_m.append(Tensor(_glorot(rng, dims[0], dims[k + 1]), requires_grad=True))
            th_m.append([Tensor(np.ones((g.n_nodes, 1)), requires_grad=True)
                         for _ in range(n_scales)])
        params.W.append(w_m)
        params.V.append(v_m)
        params.theta.append(th_m)
    f_last = cfg.hidden_dims[-1]
    for m, g in enumerate(graphs):
        if multimodal:
            params.theta_cross.append(
                Tensor(np.ones((g.n_nodes, 1)), requires_grad=True))
            # own-modality block Glorot, cross blocks zero: keeps early
            # training equivalent to the unimodal pipeline and stops the
            # untrained cross maps from kicking P off the feasible set
            w_cross = np.zeros((cfg.n_modalities * f_last, f_last))
            w_cross[:f_last] = _glorot(rng, f_last, f_last)
            params.W_cross.append(Tensor(w_cross, requires_grad=True))
        params.W_cls.append(
            Tensor(_glorot(rng, f_last, cfg.n_classes), requires_grad=True))
    if multimodal:
        for m in range(cfg.n_modalities):
            for e in range(cfg.n_modalities):
                if m == e:
                    continue
                n_m, n_e = graphs[m].n_nodes, graphs[e].n_nodes
                if cfg.mode == "mv-gwcn":
                    if correspondences is None or (m, e) not in correspondences:
                        raise ConfigError(
                            "mv-gwcn needs ground-truth correspondences for "
                            f"pair ({m}, {e})")
                    cols = np.asarray(correspondences[(m, e)], dtype=np.int64)
                    p = np.zeros((n_m, n_e))
                    p[np.arange(n_m), cols] = 1.0
                    params.P[(m, e)] = Tensor(p, requires_grad=False)
                elif cfg.p_init == "uniform":
                    params.P[(m, e)] = Tensor(
                        np.full((n_m, n_e), 1.0 / n_e), requires_grad=True)
                else:
                    # random positive start away from the doubly stochastic
                    # set (row/col mass ~2): training has to contract it
                    p = rng.uniform(0.0, 4.0, size=(n_m, n_e)) / n_e
                    params.P[(m, e)] = Tensor(p, requires_grad=True)
    return params


def build_bases(graphs: list[ModalityGraph], cfg: ModelConfig) -> list[list[WaveletBasis]]:
    """Wavelet bases for every (modality, scale), from L - I rescaling."""
    out = []
    for g in graphs:
        prep = spectral_prep(g)
        out.append([chebyshev_wavelet(prep.rescaled, s, cfg.cheby_order,
                                      cfg.wavelet_threshold, cfg.coeff_method)
                    for s in cfg.scales])
    return out


def wavelet_conv(tape: Tape, h_prev: Tensor, x0: Tensor, basis: WaveletBasis,
                 theta: Tensor, w: Tensor, v: Tensor, activation: str,
                 dropout_rate: float, training: bool,
                 rng: np.random.Generator | None) -> Tensor:
    """One scale's unit: act(psi diag(theta) psi_inv H W + dropout(X0) V)."""
    act = activation_fn(tape, activation)
    hw = tape.matmul(h_prev, w)
    filtered = tape.spmm_const(basis.psi_inv, hw)
    filtered = tape.row_scale(filtered, theta)
    filtered = tape.spmm_const(basis.psi, filtered)
    residual = tape.matmul(tape.dropout(x0, dropout_rate, training, rng), v)
    return act(tape.add(filtered, residual))


def multiscale_average(tape: Tape, outputs: list[Tensor]) -> Tensor:
    """Elementwise mean of the per-scale unit outputs."""
    if not outputs:
        raise ParameterError("multiscale_average needs at least one input")
    acc = outputs[0]
    for t in outputs[1:]:
        acc = tape.add(acc, t)
    if len(outputs) == 1:
        return acc
    return tape.scale(acc, 1.0 / len(outputs))


def cross_modal_map(tape: Tape, h_m: Tensor, basis_e: WaveletBasis,
                    theta_e: Tensor, p_me: Tensor) -> Tensor:
    """P (psi_e diag(theta_e) psi_e_inv) P^T H_m."""
    n_m = p_me.shape[0]
    n_e = p_me.shape[1]
    if basis_e.psi.rows != n_e or h_m.shape[0] != n_m:
        raise ShapeError(
            f"cross_modal_map: P {p_me.shape}, basis {basis_e.psi.rows}, "
            f"H {h_m.shape}")
    t1 = tape.matmul(tape.transpose(p_me), h_m)
    t2 = tape.spmm_const(basis_e.psi_inv, t1)
    t3 = tape.row_scale(t2, theta_e)
    t4 = tape.spmm_const(basis_e.psi, t3)
    return tape.matmul(p_me, t4)


def cross_modal_layer(tape: Tape, h_own: Tensor, maps: list[Tensor],
                      w_cross: Tensor, activation: str) -> Tensor:
    """act(con(H_m, cross maps) W_cross)."""
    act = activation_fn(tape, activation)
    cat = tape.concat_cols(h_own, *maps)
    if cat.shape[1] != w_cross.shape[0]:
        raise ShapeError(
            f"cross layer: concat width {cat.shape[1]} vs kernel {w_cross.shape}")
    return act(tape.matmul(cat, w_cross))


def classify(tape: Tape, h: Tensor, w_cls: Tensor) -> Tensor:
    return tape.softmax_rows(tape.matmul(h, w_cls))


def gcn_layer(tape: Tape, a_hat: SparseMatrix, h: Tensor, w: Tensor,
              activation: str = "relu") -> Tensor:
    """Baseline propagation act(A_hat H W)."""
    act = activation_fn(tape, activation)
    return act(tape.matmul(tape.spmm_const(a_hat, h), w))


def forward_full(tape: Tape, graphs: list[ModalityGraph],
                 bases: list[list[WaveletBasis]], params: ModelParams,
                 cfg: ModelConfig, training: bool,
                 rng: np.random.Generator | None = None) -> list[Tensor]:
    """Per-modality class distributions Z_m.

    Stacks n_layers multi-scale layers; in multimodal modes one
    cross-modality layer (first scale only) precedes the classifier.
    """
    cfg.validate()
    if len(graphs) != cfg.n_modalities or len(bases) != cfg.n_modalities:
        raise ConfigError("graphs/bases count does not match config modalities")
    multimodal = cfg.mode in ("m-gwcn", "mv-gwcn")
    x0 = [constant(g.features) for g in graphs]
    h_final: list[Tensor] = []
    for m in range(cfg.n_modalities):
        h = x0[m]
        for k in range(cfg.n_layers):
            per_scale = [
                wavelet_conv(tape, h, x0[m], bases[m][si],
                             params.theta[m][k][si], params.W[m][k][si],
                             params.V[m][k], cfg.activation,
                             cfg.dropout_rate, training, rng)
                for si in range(len(cfg.scales))
            ]
            h = multiscale_average(tape, per_scale)
        h_final.append(h)
    z_all: list[Tensor] = []
    for m in range(cfg.n_modalities):
        h = h_final[m]
        if multimodal:
            maps = [cross_modal_map(tape, h_final[m], bases[e][0],
                                    params.theta_cross[e], params.P[(m, e)])
                    for e in range(cfg.n_modalities) if e != m]
            h = cross_modal_layer(tape, h, maps, params.W_cross[m],
                                  cfg.activation)
        z_all.append(classify(tape, h, params.W_cls[m]))
    return z_all
