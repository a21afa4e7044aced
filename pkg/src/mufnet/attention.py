"""Multi-head scaled-dot-product attention with learned projections.

One block = Q/K/V input projections, per-head scaled-dot attention over
column slices, and an output projection. No residual connection, no layer
norm, no feed-forward sublayer: the smallest mechanism that covers the
cross-attention, self-attention and co-attention roles in the fusion net.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .tensor import Tensor2, concat_cols, linear, scaled_dot_attention, slice_cols


@dataclass
class AttentionParams:
    """Projection weights for one attention block (all trainable)."""

    wq: Tensor2
    bq: Tensor2
    wk: Tensor2
    bk: Tensor2
    wv: Tensor2
    bv: Tensor2
    wo: Tensor2
    bo: Tensor2
    heads: int

    def named(self, prefix: str):
        for field in ("wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo"):
            yield f"{prefix}.{field}", getattr(self, field)


def _xavier(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_attention(dim: int, heads: int, rng: np.random.Generator) -> AttentionParams:
    if dim % heads != 0:
        raise ConfigError(f"dim {dim} is not divisible by heads {heads}")
    kwargs = {}
    for name in ("wq", "wk", "wv", "wo"):
        kwargs[name] = Tensor2(_xavier(rng, dim, dim), requires_grad=True)
        kwargs["b" + name[1]] = Tensor2(np.zeros((1, dim)), requires_grad=True)
    return AttentionParams(heads=heads, **kwargs)


def identity_attention(dim: int, heads: int = 1) -> AttentionParams:
    """Identity projections, zero biases; useful for degenerate-case checks."""
    eye = np.eye(dim)
    zero = np.zeros((1, dim))
    return AttentionParams(
        wq=Tensor2(eye), bq=Tensor2(zero),
        wk=Tensor2(eye), bk=Tensor2(zero),
        wv=Tensor2(eye), bv=Tensor2(zero),
        wo=Tensor2(eye), bo=Tensor2(zero),
        heads=heads,
    )


def multi_head_attention(
    q_in: Tensor2, k_in: Tensor2, v_in: Tensor2, params: AttentionParams
) -> Tensor2:
    dim = params.wq.rows
    if q_in.cols != dim or k_in.cols != dim or v_in.cols != dim:
        raise ShapeError(
            f"attention block of width {dim} got inputs "
            f"{q_in.shape}, {k_in.shape}, {v_in.shape}"
        )
    q = linear(q_in, params.wq, params.bq)
    k = linear(k_in, params.wk, params.bk)
    v = linear(v_in, params.wv, params.bv)
    head_dim = dim // params.heads
    outs = []
    for h in range(params.heads):
        j0, j1 = h * head_dim, (h + 1) * head_dim
        outs.append(
            scaled_dot_attention(
                slice_cols(q, j0, j1), slice_cols(k, j0, j1), slice_cols(v, j0, j1)
            )
        )
    merged = outs[0] if len(outs) == 1 else concat_cols(outs)
    return linear(merged, params.wo, params.bo)
