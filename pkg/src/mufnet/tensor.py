"""Minimal reverse-mode autodiff over 2-D float64 matrices.

Everything the fusion network computes is a composition of the ops in this
module. Forward evaluation is plain numpy; when a :class:`GradTape` is
active, each op appends a backward closure to the tape, and
``tape.backward(loss)`` replays the closures in reverse to accumulate
``.grad`` on every tensor with ``requires_grad=True``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erf

from .errors import ContractError, ShapeError

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


class Tensor2:
    """A rows x cols float64 matrix, optionally tracked for gradients."""

    __slots__ = ("data", "requires_grad", "grad", "_tracked")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr.reshape(1, -1)
        if arr.ndim != 2:
            raise ShapeError(f"Tensor2 is 2-D, got array of shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ShapeError(f"Tensor2 needs rows >= 1 and cols >= 1, got {arr.shape}")
        self.data = arr
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        # set when an active tape recorded the op that produced this tensor
        self._tracked = requires_grad

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def item(self) -> float:
        if self.data.shape != (1, 1):
            raise ContractError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.data[0, 0])

    def zero_grad(self) -> None:
        self.grad = None

    def _add_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = g.copy()
        else:
            self.grad += g

    def __repr__(self) -> str:
        return f"Tensor2(shape={self.shape}, requires_grad={self.requires_grad})"


_ACTIVE_TAPE: "GradTape | None" = None


class GradTape:
    """Records ops in execution order (a valid topological order).

    One tape per training step; ``backward`` may be called once. Ops run
    outside any active tape are forward-only.
    """

    def __init__(self):
        self._records: list[tuple[Tensor2, object]] = []
        self._consumed = False

    def __enter__(self) -> "GradTape":
        global _ACTIVE_TAPE
        if _ACTIVE_TAPE is not None:
            raise ContractError("a GradTape is already active; tapes do not nest")
        _ACTIVE_TAPE = self
        return self

    def __exit__(self, exc_type, exc, tb):
        global _ACTIVE_TAPE
        _ACTIVE_TAPE = None
        return False

    def _record(self, out: Tensor2, backward_fn) -> None:
        out._tracked = True
        self._records.append((out, backward_fn))

    def backward(self, loss: Tensor2) -> None:
        """Accumulate dLoss/dt into ``t.grad`` for every requires_grad tensor."""
        if self._consumed:
            raise ContractError(
                "backward() was already called on this tape; build a new tape"
            )
        if loss.shape != (1, 1):
            raise ContractError(f"backward() needs a scalar (1x1) loss, got {loss.shape}")
        if not loss._tracked:
            raise ContractError("loss was not computed under this tape")
        self._consumed = True
        loss._add_grad(np.ones((1, 1)))
        for out, backward_fn in reversed(self._records):
            if out.grad is None:
                continue
            backward_fn(out.grad)
            if not out.requires_grad:
                # intermediate buffers are not needed once propagated
                out.grad = None


def _tape_for(*tensors: Tensor2) -> "GradTape | None":
    if _ACTIVE_TAPE is None:
        return None
    if any(t._tracked for t in tensors):
        return _ACTIVE_TAPE
    return None


# ---------------------------------------------------------------------------
# ops
# ---------------------------------------------------------------------------


def matmul(a: Tensor2, b: Tensor2) -> Tensor2:
    if a.cols != b.rows:
        raise ShapeError(f"matmul: inner dims differ, {a.shape} x {b.shape}")
    out = Tensor2(a.data @ b.data)
    tape = _tape_for(a, b)
    if tape is not None:
        a_data, b_data = a.data, b.data

        def backward(g):
            if a._tracked:
                a._add_grad(g @ b_data.T)
            if b._tracked:
                b._add_grad(a_data.T @ g)

        tape._record(out, backward)
    return out


def transpose(a: Tensor2) -> Tensor2:
    out = Tensor2(a.data.T.copy())
    tape = _tape_for(a)
    if tape is not None:
        tape._record(out, lambda g: a._add_grad(g.T))
    return out


def add(a: Tensor2, b: Tensor2) -> Tensor2:
    if a.shape != b.shape:
        raise ShapeError(f"add: shapes differ, {a.shape} vs {b.shape}")
    out = Tensor2(a.data + b.data)
    tape = _tape_for(a, b)
    if tape is not None:

        def backward(g):
            if a._tracked:
                a._add_grad(g)
            if b._tracked:
                b._add_grad(g)

        tape._record(out, backward)
    return out


def add_rowvec(x: Tensor2, b: Tensor2) -> Tensor2:
    """Add a 1 x cols row vector to every row of x."""
    if b.rows != 1 or b.cols != x.cols:
        raise ShapeError(f"add_rowvec: need 1x{x.cols} vector for {x.shape}, got {b.shape}")
    out = Tensor2(x.data + b.data)
    tape = _tape_for(x, b)
    if tape is not None:

        def backward(g):
            if x._tracked:
                x._add_grad(g)
            if b._tracked:
                b._add_grad(g.sum(axis=0, keepdims=True))

        tape._record(out, backward)
    return out


def mul(a: Tensor2, b: Tensor2) -> Tensor2:
    if a.shape != b.shape:
        raise ShapeError(f"mul: shapes differ, {a.shape} vs {b.shape}")
    out = Tensor2(a.data * b.data)
    tape = _tape_for(a, b)
    if tape is not None:
        a_data, b_data = a.data, b.data

        def backward(g):
            if a._tracked:
                a._add_grad(g * b_data)
            if b._tracked:
                b._add_grad(g * a_data)

        tape._record(out, backward)
    return out


def scale(a: Tensor2, c: float) -> Tensor2:
    c = float(c)
    out = Tensor2(a.data * c)
    tape = _tape_for(a)
    if tape is not None:
        tape._record(out, lambda g: a._add_grad(g * c))
    return out


def concat_cols(parts: list[Tensor2]) -> Tensor2:
    if not parts:
        raise ContractError("concat_cols: empty input")
    n = parts[0].rows
    for p in parts:
        if p.rows != n:
            raise ShapeError(
                f"concat_cols: row counts differ, {parts[0].shape} vs {p.shape}"
            )
    out = Tensor2(np.concatenate([p.data for p in parts], axis=1))
    tape = _tape_for(*parts)
    if tape is not None:
        widths = [p.cols for p in parts]

        def backward(g):
            j = 0
            for p, w in zip(parts, widths):
                if p._tracked:
                    p._add_grad(g[:, j : j + w])
                j += w

        tape._record(out, backward)
    return out


def stack_rows(parts: list[Tensor2]) -> Tensor2:
    if not parts:
        raise ContractError("stack_rows: empty input")
    m = parts[0].cols
    for p in parts:
        if p.cols != m:
            raise ShapeError(
                f"stack_rows: col counts differ, {parts[0].shape} vs {p.shape}"
            )
    out = Tensor2(np.concatenate([p.data for p in parts], axis=0))
    tape = _tape_for(*parts)
    if tape is not None:
        heights = [p.rows for p in parts]

        def backward(g):
            i = 0
            for p, h in zip(parts, heights):
                if p._tracked:
                    p._add_grad(g[i : i + h, :])
                i += h

        tape._record(out, backward)
    return out


def slice_cols(a: Tensor2, j0: int, j1: int) -> Tensor2:
    if not (0 <= j0 < j1 <= a.cols):
        raise ShapeError(f"slice_cols: [{j0}:{j1}] out of range for {a.shape}")
    out = Tensor2(a.data[:, j0:j1].copy())
    tape = _tape_for(a)
    if tape is not None:

        def backward(g):
            full = np.zeros_like(a.data)
            full[:, j0:j1] = g
            a._add_grad(full)

        tape._record(out, backward)
    return out


def mean_rows(a: Tensor2) -> Tensor2:
    """Collapse the token axis: mean over rows, keeping a 1 x cols result."""
    n = a.rows
    out = Tensor2(a.data.mean(axis=0, keepdims=True))
    tape = _tape_for(a)
    if tape is not None:
        tape._record(out, lambda g: a._add_grad(np.repeat(g / n, n, axis=0)))
    return out


def sum_all(a: Tensor2) -> Tensor2:
    out = Tensor2([[a.data.sum()]])
    tape = _tape_for(a)
    if tape is not None:
        tape._record(out, lambda g: a._add_grad(np.full_like(a.data, g[0, 0])))
    return out


def softmax_rows(x: Tensor2) -> Tensor2:
    """Row-wise softmax with per-row max subtraction for stability."""
    shifted = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=1, keepdims=True)
    out = Tensor2(s)
    tape = _tape_for(x)
    if tape is not None:

        def backward(g):
            dot = (s * g).sum(axis=1, keepdims=True)
            x._add_grad(s * (g - dot))

        tape._record(out, backward)
    return out


def sigmoid(x: Tensor2) -> Tensor2:
    # split by sign to avoid overflow in exp
    d = x.data
    s = np.where(d >= 0, 1.0 / (1.0 + np.exp(-np.clip(d, 0, None))),
                 np.exp(np.clip(d, None, 0)) / (1.0 + np.exp(np.clip(d, None, 0))))
    out = Tensor2(s)
    tape = _tape_for(x)
    if tape is not None:
        tape._record(out, lambda g: x._add_grad(g * s * (1.0 - s)))
    return out


def gelu(x: Tensor2) -> Tensor2:
    """Exact Gaussian-error-function GELU."""
    d = x.data
    cdf = 0.5 * (1.0 + erf(d * _INV_SQRT2))
    out = Tensor2(d * cdf)
    tape = _tape_for(x)
    if tape is not None:

        def backward(g):
            pdf = _INV_SQRT2PI * np.exp(-0.5 * d * d)
            x._add_grad(g * (cdf + d * pdf))

        tape._record(out, backward)
    return out


def linear(x: Tensor2, weight: Tensor2, bias: Tensor2) -> Tensor2:
    """y = x @ weight + bias, bias broadcast per row."""
    if x.cols != weight.rows:
        raise ShapeError(
            f"linear: input {x.shape} does not conform with weight {weight.shape}"
        )
    if bias.rows != 1 or bias.cols != weight.cols:
        raise ShapeError(
            f"linear: bias {bias.shape} does not match weight {weight.shape}"
        )
    return add_rowvec(matmul(x, weight), bias)


def scaled_dot_attention(q: Tensor2, k: Tensor2, v: Tensor2) -> Tensor2:
    """softmax(q @ k.T / sqrt(d_k)) @ v."""
    if q.cols != k.cols:
        raise ShapeError(f"attention: q {q.shape} and k {k.shape} differ in width")
    if k.rows != v.rows:
        raise ShapeError(f"attention: k {k.shape} and v {v.shape} differ in length")
    scores = scale(matmul(q, transpose(k)), 1.0 / math.sqrt(q.cols))
    weights = softmax_rows(scores)
    return matmul(weights, v)


def binary_ce(probs: Tensor2, label: int) -> Tensor2:
    """Cross-entropy of a 1x2 probability row against a {0,1} label.

    p_hat = probs[0, 1] is clamped into [1e-12, 1 - 1e-12] per log argument,
    so an exact prediction still yields exactly 0; a clamped argument
    contributes zero gradient.
    """
    if probs.shape != (1, 2):
        raise ShapeError(f"binary_ce: need a 1x2 probability row, got {probs.shape}")
    if label not in (0, 1):
        raise ContractError(f"binary_ce: label must be 0 or 1, got {label!r}")
    eps = 1e-12
    p = probs.data[0, 1]
    pos_arg = max(p, eps)
    neg_arg = max(1.0 - p, eps)
    loss = -(label * math.log(pos_arg) + (1 - label) * math.log(neg_arg))
    out = Tensor2([[loss]])
    tape = _tape_for(probs)
    if tape is not None:

        def backward(g):
            dp = np.zeros_like(probs.data)
            d = 0.0
            if label == 1 and p > eps:
                d -= 1.0 / pos_arg
            if label == 0 and 1.0 - p > eps:
                d += 1.0 / neg_arg
            dp[0, 1] = g[0, 0] * d
            probs._add_grad(dp)

        tape._record(out, backward)
    return out
