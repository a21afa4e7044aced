"""Multi-head attention block tests."""

import math

import numpy as np
import pytest

from mufnet.attention import identity_attention, init_attention, multi_head_attention
from mufnet.errors import ConfigError, ShapeError
from mufnet.tensor import GradTape, Tensor2, mul, sum_all

from test_tensor import attention_oracle, fd_gradient, rel_err


def mha_oracle(q_in, k_in, v_in, p):
    """Recompose the block from numpy primitives and the attention oracle."""
    q = q_in @ p.wq.data + p.bq.data
    k = k_in @ p.wk.data + p.bk.data
    v = v_in @ p.wv.data + p.bv.data
    hd = q.shape[1] // p.heads
    outs = [
        attention_oracle(q[:, h * hd : (h + 1) * hd], k[:, h * hd : (h + 1) * hd],
                         v[:, h * hd : (h + 1) * hd])
        for h in range(p.heads)
    ]
    return np.concatenate(outs, axis=1) @ p.wo.data + p.bo.data


def test_identity_block_with_single_key_passes_value_through():
    p = identity_attention(4)
    x = np.array([[0.3, -1.2, 0.8, 2.0]])
    out = multi_head_attention(Tensor2(x), Tensor2(x), Tensor2(x), p)
    np.testing.assert_array_equal(out.data, x)


def test_multi_head_matches_per_head_recomposition():
    rng = np.random.default_rng(11)
    for seed in range(10):
        p = init_attention(8, 2, np.random.default_rng(seed))
        q = rng.standard_normal((3, 8))
        k = rng.standard_normal((5, 8))
        v = rng.standard_normal((5, 8))
        got = multi_head_attention(Tensor2(q), Tensor2(k), Tensor2(v), p).data
        np.testing.assert_allclose(got, mha_oracle(q, k, v, p), atol=1e-10)


def test_init_rejects_indivisible_heads():
    with pytest.raises(ConfigError):
        init_attention(6, 4, np.random.default_rng(0))


def test_block_rejects_wrong_width():
    p = init_attention(4, 2, np.random.default_rng(0))
    with pytest.raises(ShapeError):
        multi_head_attention(Tensor2(np.ones((1, 3))), Tensor2(np.ones((1, 4))),
                             Tensor2(np.ones((1, 4))), p)


def test_block_gradients_match_finite_differences():
    for seed in range(5):
        rng = np.random.default_rng(seed)
        p = init_attention(4, 2, np.random.default_rng(seed + 100))
        q_in = rng.standard_normal((2, 4))
        kv_in = rng.standard_normal((3, 4))
        probe = rng.standard_normal((2, 4))

        def forward_value():
            out = multi_head_attention(Tensor2(q_in), Tensor2(kv_in), Tensor2(kv_in), p)
            return float((out.data * probe).sum())

        for t in (p.wq, p.bq, p.wk, p.bk, p.wv, p.bv, p.wo, p.bo):
            t.requires_grad = True
            t.zero_grad()
        with GradTape() as tape:
            out = multi_head_attention(Tensor2(q_in), Tensor2(kv_in), Tensor2(kv_in), p)
            loss = sum_all(mul(out, Tensor2(probe)))
        tape.backward(loss)
        for name in ("wq", "wk", "wv", "wo", "bv", "bo"):
            t = getattr(p, name)
            numeric = fd_gradient(forward_value, t.data)
            analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
            assert rel_err(analytic, numeric) < 1e-3, name
