"""Minimal reverse-mode differentiation over dense float64 tensors.

A Tape records every operation whose output needs a gradient, in
execution (hence topological) order. backward() walks the records once in
reverse, accumulating vector-Jacobian products into the .grad buffers of
every tensor with requires_grad. Sparse operands are always constants
(precomputed wavelet bases, Laplacians); all learnable state is dense.

Gradient rules are local to each op and are validated against central
finite differences in the test suite.
"""

from __future__ import annotations

import itertools

import numpy as np

from .errors import DomainError, ParameterError, ShapeError
from .linalg import SparseMatrix

_ids = itertools.count()


class Tensor:
    """A dense matrix paired with an accumulated gradient."""

    __slots__ = ("value", "grad", "requires_grad", "node_id")

    def __init__(self, value, requires_grad: bool = False):
        v = np.ascontiguousarray(value, dtype=np.float64)
        if v.ndim != 2:
            raise ShapeError(f"tensors are 2-D matrices, got ndim={v.ndim}")
        self.value = v
        self.grad = np.zeros_like(v)
        self.requires_grad = requires_grad
        self.node_id = next(_ids)

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self) -> None:
        self.grad[...] = 0.0

    def __repr__(self):
        return f"Tensor(shape={self.value.shape}, requires_grad={self.requires_grad})"


def constant(value) -> Tensor:
    return Tensor(value, requires_grad=False)


def zero_grads(tensors) -> None:
    for t in tensors:
        t.zero_grad()


class Tape:
    """Recorded computation for one forward pass."""

    def __init__(self):
        self._records: list[tuple[Tensor, tuple[Tensor, ...], object]] = []

    def __len__(self):
        return len(self._records)

    def _emit(self, out_value, inputs: tuple[Tensor, ...], backward) -> Tensor:
        out = Tensor(out_value, requires_grad=any(t.requires_grad for t in inputs))
        if out.requires_grad:
            self._records.append((out, inputs, backward))
        return out

    # ---- forward ops -------------------------------------------------

    def add(self, a: Tensor, b: Tensor) -> Tensor:
        if a.shape != b.shape:
            raise ShapeError(f"add: {a.shape} vs {b.shape}")
        return self._emit(a.value + b.value, (a, b),
                          lambda g: (g.copy(), g.copy()))

    def sub(self, a: Tensor, b: Tensor) -> Tensor:
        if a.shape != b.shape:
            raise ShapeError(f"sub: {a.shape} vs {b.shape}")
        return self._emit(a.value - b.value, (a, b),
                          lambda g: (g.copy(), -g))

    def scale(self, a: Tensor, c: float) -> Tensor:
        c = float(c)
        return self._emit(c * a.value, (a,), lambda g: (c * g,))

    def matmul(self, a: Tensor, b: Tensor) -> Tensor:
        if a.shape[1] != b.shape[0]:
            raise ShapeError(f"matmul: {a.shape} @ {b.shape}")

        def backward(g):
            ga = g @ b.value.T if a.requires_grad else None
            gb = a.value.T @ g if b.requires_grad else None
            return ga, gb

        return self._emit(a.value @ b.value, (a, b), backward)

    def spmm_const(self, s: SparseMatrix, a: Tensor) -> Tensor:
        """Constant sparse matrix times tensor; gradient is S^T g."""
        if s.cols != a.shape[0]:
            raise ShapeError(f"spmm_const: {s.rows}x{s.cols} @ {a.shape}")
        m = s.to_scipy()
        mt = m.T.tocsr()
        return self._emit(np.ascontiguousarray(m @ a.value), (a,),
                          lambda g: (np.ascontiguousarray(mt @ g),))

    def relu(self, a: Tensor) -> Tensor:
        mask = a.value > 0
        return self._emit(np.where(mask, a.value, 0.0), (a,),
                          lambda g: (g * mask,))

    def softmax_rows(self, a: Tensor) -> Tensor:
        shifted = a.value - np.max(a.value, axis=1, keepdims=True)
        e = np.exp(shifted)
        z = e / np.sum(e, axis=1, keepdims=True)

        def backward(g):
            dot = np.sum(g * z, axis=1, keepdims=True)
            return (z * (g - dot),)

        return self._emit(z, (a,), backward)

    def dropout(self, a: Tensor, rate: float, training: bool,
                rng: np.random.Generator | None) -> Tensor:
        """Inverted dropout: kept entries scaled by 1/(1-rate)."""
        if not (0.0 <= rate < 1.0):
            raise ParameterError(f"dropout rate must be in [0, 1), got {rate}")
        if not training or rate == 0.0:
            return a
        if rng is None:
            raise ParameterError("dropout in training mode needs an rng")
        mask = (rng.random(a.shape) >= rate) / (1.0 - rate)
        return self._emit(a.value * mask, (a,), lambda g: (g * mask,))

    def concat_cols(self, *tensors: Tensor) -> Tensor:
        if not tensors:
            raise ParameterError("concat_cols needs at least one input")
        rows = tensors[0].shape[0]
        if any(t.shape[0] != rows for t in tensors):
            raise ShapeError("concat_cols: row counts differ")
        widths = [t.shape[1] for t in tensors]
        splits = np.cumsum(widths)[:-1]

        def backward(g):
            return tuple(np.ascontiguousarray(part)
                         for part in np.split(g, splits, axis=1))

        return self._emit(np.hstack([t.value for t in tensors]), tensors, backward)

    def frobenius_sq(self, a: Tensor) -> Tensor:
        return self._emit([[float(np.sum(a.value * a.value))]], (a,),
                          lambda g: (2.0 * g[0, 0] * a.value,))

    def sum_all(self, a: Tensor) -> Tensor:
        return self._emit([[float(np.sum(a.value))]], (a,),
                          lambda g: (np.full(a.shape, g[0, 0]),))

    def elementwise_abs(self, a: Tensor) -> Tensor:
        return self._emit(np.abs(a.value), (a,),
                          lambda g: (g * np.sign(a.value),))

    def log(self, a: Tensor) -> Tensor:
        if np.any(a.value <= 0.0):
            raise DomainError("log of a nonpositive entry")
        return self._emit(np.log(a.value), (a,), lambda g: (g / a.value,))

    def mul_elementwise(self, a: Tensor, b: Tensor) -> Tensor:
        if a.shape != b.shape:
            raise ShapeError(f"mul_elementwise: {a.shape} vs {b.shape}")

        def backward(g):
            ga = g * b.value if a.requires_grad else None
            gb = g * a.value if b.requires_grad else None
            return ga, gb

        return self._emit(a.value * b.value, (a, b), backward)

    def transpose(self, a: Tensor) -> Tensor:
        return self._emit(np.ascontiguousarray(a.value.T), (a,),
                          lambda g: (np.ascontiguousarray(g.T),))

    def row_scale(self, a: Tensor, d: Tensor) -> Tensor:
        """Scale row i of `a` by d[i, 0] (a diagonal kernel applied densely)."""
        if d.shape != (a.shape[0], 1):
            raise ShapeError(f"row_scale: diag {d.shape} vs matrix {a.shape}")

        def backward(g):
            ga = g * d.value if a.requires_grad else None
            gd = (np.sum(g * a.value, axis=1, keepdims=True)
                  if d.requires_grad else None)
            return ga, gd

        return self._emit(a.value * d.value, (a, d), backward)

    # ---- reverse sweep -----------------------------------------------

    def backward(self, objective: Tensor) -> None:
        """Accumulate d(objective)/d(tensor) into .grad for every
        requires_grad tensor reachable from the objective.

        Repeated calls accumulate; use zero_grads between steps.
        """
        if objective.shape != (1, 1):
            raise ShapeError(f"objective must be 1x1, got {objective.shape}")
        if not self._records:
            raise ParameterError("backward on an empty tape")
        pending: dict[int, list] = {
            objective.node_id: [objective, np.ones((1, 1))]
        }
        for out, inputs, rule in reversed(self._records):
            entry = pending.pop(out.node_id, None)
            if entry is None:
                continue
            g = entry[1]
            out.grad += g
            for t, gin in zip(inputs, rule(g)):
                if gin is None or not t.requires_grad:
                    continue
                slot = pending.get(t.node_id)
                if slot is None:
                    pending[t.node_id] = [t, gin]
                else:
                    slot[1] = slot[1] + gin
        for t, g in pending.values():
            t.grad += g
