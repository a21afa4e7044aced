"""The fusion network: shallow interaction, relational context learning,
CLIP-view fusion, multiplex fusion, and the 2-class head.

All stages operate on pooled 1 x d rows at this scale. Each stage is a
standalone function so tests can recompose it from tensor-core ops;
``model_forward`` wires them per the configured ablation variant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attention import AttentionParams, init_attention, multi_head_attention
from .encoders import FeatureSeq
from .errors import ConfigError, ContractError, ShapeError
from .tensor import (
    Tensor2,
    add,
    binary_ce,
    concat_cols,
    gelu,
    linear,
    mean_rows,
    mul,
    scale,
    sigmoid,
    softmax_rows,
    stack_rows,
)

VARIANTS = (
    "full",
    "no_rclm",
    "no_muffm",
    "no_sfim",
    "no_clip_vffm",
    "no_rclm_image",
    "no_rclm_text",
    "no_sfim_image",
    "no_sfim_text",
)


@dataclass
class FusionConfig:
    dim: int = 768
    heads: int = 4
    alpha: float = 0.6
    beta: float = 0.7
    gamma: float = 0.5
    mlp_hidden: int | None = None  # None -> dim
    variant: str = "full"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.dim < 1:
            raise ConfigError(f"dim must be >= 1, got {self.dim}")
        if self.heads < 1 or self.dim % self.heads != 0:
            raise ConfigError(f"dim {self.dim} must be divisible by heads {self.heads}")
        for name in ("alpha", "beta", "gamma"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {v}")
        if self.mlp_hidden is not None and self.mlp_hidden < 1:
            raise ConfigError(f"mlp_hidden must be >= 1, got {self.mlp_hidden}")
        if self.variant not in VARIANTS:
            raise ConfigError(
                f"unknown variant {self.variant!r}; expected one of {', '.join(VARIANTS)}"
            )

    @property
    def hidden(self) -> int:
        return self.dim if self.mlp_hidden is None else self.mlp_hidden


@dataclass
class LinearParams:
    weight: Tensor2
    bias: Tensor2

    def named(self, prefix: str):
        yield f"{prefix}.weight", self.weight
        yield f"{prefix}.bias", self.bias


@dataclass
class RclmStreamParams:
    squeeze: LinearParams
    sa: AttentionParams
    ca: AttentionParams

    def named(self, prefix: str):
        yield from self.squeeze.named(f"{prefix}.squeeze")
        yield from self.sa.named(f"{prefix}.sa")
        yield from self.ca.named(f"{prefix}.ca")


@dataclass
class ModelParams:
    """Trainable weights; blocks unused by the configured variant are None.

    The SFIM cross-attention is one shared block used for both directions.
    """

    classifier: LinearParams
    deep_vt: AttentionParams
    deep_tv: AttentionParams
    sfim_proj_v: LinearParams | None = None
    sfim_proj_t: LinearParams | None = None
    sfim_shared_ca: AttentionParams | None = None
    rclm_v: RclmStreamParams | None = None
    rclm_t: RclmStreamParams | None = None
    clip_vt: AttentionParams | None = None
    clip_tv: AttentionParams | None = None
    muffm_fc1: LinearParams | None = None
    muffm_fc2: LinearParams | None = None

    def named(self) -> dict[str, Tensor2]:
        out: dict[str, Tensor2] = {}
        blocks = [
            ("sfim.proj_v", self.sfim_proj_v),
            ("sfim.proj_t", self.sfim_proj_t),
            ("sfim.ca", self.sfim_shared_ca),
            ("rclm_v", self.rclm_v),
            ("rclm_t", self.rclm_t),
            ("deep.vt", self.deep_vt),
            ("deep.tv", self.deep_tv),
            ("clip.vt", self.clip_vt),
            ("clip.tv", self.clip_tv),
            ("muffm.fc1", self.muffm_fc1),
            ("muffm.fc2", self.muffm_fc2),
            ("classifier", self.classifier),
        ]
        for prefix, block in blocks:
            if block is not None:
                out.update(block.named(prefix))
        return out

    def tensors(self) -> list[Tensor2]:
        return list(self.named().values())

    def zero_grads(self) -> None:
        for t in self.tensors():
            t.zero_grad()


@dataclass
class Prediction:
    probs: Tensor2  # 1x2, rows sum to 1
    label: int  # argmax; ties resolve to 0 (non-sarcasm)


def _block_seed(seed: int, name: str) -> np.random.Generator:
    # key init streams by block name so identical names across variants
    # (and across ablation comparisons) get identical initial weights
    digest = np.frombuffer(name.encode("utf-8").ljust(4, b"\0"), dtype=np.uint8)
    return np.random.default_rng(
        np.random.SeedSequence([seed & 0xFFFFFFFF, *digest.tolist()])
    )


def _init_linear(d_in: int, d_out: int, seed: int, name: str) -> LinearParams:
    rng = _block_seed(seed, name)
    limit = np.sqrt(6.0 / (d_in + d_out))
    return LinearParams(
        weight=Tensor2(rng.uniform(-limit, limit, size=(d_in, d_out)), requires_grad=True),
        bias=Tensor2(np.zeros((1, d_out)), requires_grad=True),
    )


def _init_rclm(d: int, heads: int, seed: int, name: str) -> RclmStreamParams:
    return RclmStreamParams(
        squeeze=_init_linear(2 * d, d, seed, f"{name}.squeeze"),
        sa=init_attention(d, heads, _block_seed(seed, f"{name}.sa")),
        ca=init_attention(d, heads, _block_seed(seed, f"{name}.ca")),
    )


def init_params(cfg: FusionConfig, seed: int) -> ModelParams:
    """Fresh parameters for the configured variant, keyed by (seed, block name)."""
    cfg.validate()
    d, h = cfg.dim, cfg.heads
    v = cfg.variant
    rclm_disabled = v in ("no_rclm_image", "no_rclm_text")
    params = ModelParams(
        classifier=_init_linear(d, 2, seed, "classifier"),
        deep_vt=init_attention(d, h, _block_seed(seed, "deep.vt")),
        deep_tv=init_attention(d, h, _block_seed(seed, "deep.tv")),
    )
    if v not in ("no_sfim_image",) and not rclm_disabled:
        params.sfim_proj_v = _init_linear(d, d, seed, "sfim.proj_v")
    if v not in ("no_sfim_text",) and not rclm_disabled:
        params.sfim_proj_t = _init_linear(d, d, seed, "sfim.proj_t")
    if v != "no_sfim" and not rclm_disabled:
        params.sfim_shared_ca = init_attention(d, h, _block_seed(seed, "sfim.ca"))
    if v not in ("no_rclm", "no_rclm_image"):
        params.rclm_v = _init_rclm(d, h, seed, "rclm_v")
    if v not in ("no_rclm", "no_rclm_text"):
        params.rclm_t = _init_rclm(d, h, seed, "rclm_t")
    if v != "no_clip_vffm":
        params.clip_vt = init_attention(d, h, _block_seed(seed, "clip.vt"))
        params.clip_tv = init_attention(d, h, _block_seed(seed, "clip.tv"))
    if v != "no_muffm":
        params.muffm_fc1 = _init_linear(2 * d, cfg.hidden, seed, "muffm.fc1")
        params.muffm_fc2 = _init_linear(cfg.hidden, d, seed, "muffm.fc2")
    return params


def _as_row(x, what: str, dim: int | None = None) -> Tensor2:
    """Coerce a FeatureSeq / Tensor2 / array to a pooled 1 x d Tensor2."""
    if isinstance(x, FeatureSeq):
        t = Tensor2(x.tokens)
    elif isinstance(x, Tensor2):
        t = x
    else:
        t = Tensor2(x)
    if t.rows != 1:
        raise ContractError(
            f"{what} must be pooled to a single token (got {t.rows}); "
            "apply mean pooling before this stage"
        )
    if dim is not None and t.cols != dim:
        raise ShapeError(f"{what} has width {t.cols}, expected {dim}")
    return t


def _as_seq(x, what: str) -> Tensor2:
    if isinstance(x, FeatureSeq):
        return Tensor2(x.tokens)
    if isinstance(x, Tensor2):
        return x
    return Tensor2(x)


# ---------------------------------------------------------------------------
# fusion stages
# ---------------------------------------------------------------------------


def sfim_forward(h_rv, h_bt, params: ModelParams, cfg: FusionConfig):
    """Shallow feature interaction: pool, project, cross-attend both ways
    with one shared attention block.

    Returns (interacted image row, interacted text row), each 1 x d.
    """
    img = _as_seq(h_rv, "resnet image stream")
    txt = _as_seq(h_bt, "bert text stream")
    if img.cols != txt.cols:
        raise ShapeError(f"sfim: stream widths differ, {img.shape} vs {txt.shape}")
    img_hat = linear(mean_rows(img), params.sfim_proj_v.weight, params.sfim_proj_v.bias)
    txt_hat = linear(mean_rows(txt), params.sfim_proj_t.weight, params.sfim_proj_t.bias)
    ca = params.sfim_shared_ca
    tilde_v = multi_head_attention(img_hat, txt_hat, txt_hat, ca)
    tilde_t = multi_head_attention(txt_hat, img_hat, img_hat, ca)
    return tilde_v, tilde_t


def rclm_stream(h_clip, h_tilde, stream_params: RclmStreamParams, cfg: FusionConfig) -> Tensor2:
    """Relational context for one modality.

    Query = squeeze(concat of the two pooled rows); keys/values = self-
    attention over their 2-token stack; output = cross-attention, 1 x d.
    """
    a = _as_row(h_clip, "rclm clip input", cfg.dim)
    b = _as_row(h_tilde, "rclm interacted input", cfg.dim)
    query = linear(
        concat_cols([a, b]), stream_params.squeeze.weight, stream_params.squeeze.bias
    )
    stacked = stack_rows([a, b])
    context = multi_head_attention(stacked, stacked, stacked, stream_params.sa)
    return multi_head_attention(query, context, context, stream_params.ca)


def _co_attention_mix(h_a, h_b, block_ab: AttentionParams, block_ba: AttentionParams,
                      weight: float, weight_name: str, cfg: FusionConfig) -> Tensor2:
    if not 0.0 <= weight <= 1.0:
        raise ConfigError(f"{weight_name} must be in [0, 1], got {weight}")
    a = _as_row(h_a, f"{weight_name}-mix first input", cfg.dim)
    b = _as_row(h_b, f"{weight_name}-mix second input", cfg.dim)
    branch_ab = multi_head_attention(a, b, b, block_ab)
    branch_ba = multi_head_attention(b, a, a, block_ba)
    return add(scale(branch_ab, weight), scale(branch_ba, 1.0 - weight))


def deep_fuse(h_v, h_t, params: ModelParams, cfg: FusionConfig) -> Tensor2:
    """alpha-weighted bidirectional co-attention over the relational rows."""
    return _co_attention_mix(h_v, h_t, params.deep_vt, params.deep_tv,
                             cfg.alpha, "alpha", cfg)


def clip_view_fuse(h_cv, h_ct, params: ModelParams, cfg: FusionConfig) -> Tensor2:
    """beta-weighted bidirectional co-attention over the raw CLIP rows."""
    return _co_attention_mix(h_cv, h_ct, params.clip_vt, params.clip_tv,
                             cfg.beta, "beta", cfg)


def muffm_forward(h_deep, h_clip, params: ModelParams, cfg: FusionConfig) -> Tensor2:
    """MLP over the concatenated streams, sigmoid self-gated, gamma-mixed
    with the CLIP-view row."""
    if not 0.0 <= cfg.gamma <= 1.0:
        raise ConfigError(f"gamma must be in [0, 1], got {cfg.gamma}")
    a = _as_row(h_deep, "muffm deep input", cfg.dim)
    b = _as_row(h_clip, "muffm clip input", cfg.dim)
    hidden = gelu(linear(concat_cols([a, b]), params.muffm_fc1.weight, params.muffm_fc1.bias))
    fused = linear(hidden, params.muffm_fc2.weight, params.muffm_fc2.bias)
    gated = mul(sigmoid(fused), fused)
    return add(scale(gated, cfg.gamma), scale(b, 1.0 - cfg.gamma))


def predict(f_star, params: ModelParams, cfg: FusionConfig) -> Prediction:
    """Two-class softmax head; ties resolve to label 0."""
    x = _as_row(f_star, "classifier input", cfg.dim)
    logits = linear(x, params.classifier.weight, params.classifier.bias)
    probs = softmax_rows(logits)
    label = int(probs.data[0, 1] > probs.data[0, 0])
    return Prediction(probs=probs, label=label)


def ce_loss(pred: Prediction, y: int) -> Tensor2:
    """Binary cross-entropy against the sarcasm probability probs[1]."""
    return binary_ce(pred.probs, y)


def batch_loss(losses: list[Tensor2]) -> Tensor2:
    """Mean of per-sample scalar losses."""
    if not losses:
        raise ContractError("batch_loss: empty batch")
    if len(losses) == 1:
        return losses[0]
    return mean_rows(stack_rows(losses))


def model_forward(streams, params: ModelParams, cfg: FusionConfig) -> Prediction:
    """Full forward pass over one sample's four streams, honoring the variant.

    ``streams`` is the provider quadruple (clip_image, resnet_image,
    clip_text, bert_text).
    """
    h_cv_raw, h_rv, h_ct_raw, h_bt = streams
    h_cv = mean_rows(_as_seq(h_cv_raw, "clip image stream"))
    h_ct = mean_rows(_as_seq(h_ct_raw, "clip text stream"))
    if h_cv.cols != cfg.dim:
        raise ShapeError(f"streams have width {h_cv.cols}, model expects {cfg.dim}")
    v = cfg.variant
    zero_row = Tensor2(np.zeros((1, cfg.dim)))

    # shallow interaction
    if v in ("no_rclm_image", "no_rclm_text"):
        tilde_v = tilde_t = None  # entire SFIM output is severed with the modality
    elif v == "no_sfim":
        tilde_v = linear(mean_rows(_as_seq(h_rv, "resnet image stream")),
                         params.sfim_proj_v.weight, params.sfim_proj_v.bias)
        tilde_t = linear(mean_rows(_as_seq(h_bt, "bert text stream")),
                         params.sfim_proj_t.weight, params.sfim_proj_t.bias)
    elif v == "no_sfim_image":
        surv = linear(mean_rows(_as_seq(h_bt, "bert text stream")),
                      params.sfim_proj_t.weight, params.sfim_proj_t.bias)
        tilde_v = multi_head_attention(surv, surv, surv, params.sfim_shared_ca)
        tilde_t = multi_head_attention(surv, surv, surv, params.sfim_shared_ca)
    elif v == "no_sfim_text":
        surv = linear(mean_rows(_as_seq(h_rv, "resnet image stream")),
                      params.sfim_proj_v.weight, params.sfim_proj_v.bias)
        tilde_v = multi_head_attention(surv, surv, surv, params.sfim_shared_ca)
        tilde_t = multi_head_attention(surv, surv, surv, params.sfim_shared_ca)
    else:
        tilde_v, tilde_t = sfim_forward(h_rv, h_bt, params, cfg)

    # relational context + deep fusion
    if v == "no_rclm":
        h_deep = deep_fuse(tilde_v, tilde_t, params, cfg)
    elif v == "no_rclm_image":
        h_t = rclm_stream(h_ct, zero_row, params.rclm_t, cfg)
        h_deep = deep_fuse(h_t, h_t, params, cfg)
    elif v == "no_rclm_text":
        h_v = rclm_stream(h_cv, zero_row, params.rclm_v, cfg)
        h_deep = deep_fuse(h_v, h_v, params, cfg)
    else:
        h_v = rclm_stream(h_cv, tilde_v, params.rclm_v, cfg)
        h_t = rclm_stream(h_ct, tilde_t, params.rclm_t, cfg)
        h_deep = deep_fuse(h_v, h_t, params, cfg)

    # CLIP-view fusion
    if v == "no_clip_vffm":
        h_clip = scale(add(h_cv, h_ct), 0.5)
    else:
        h_clip = clip_view_fuse(h_cv, h_ct, params, cfg)

    # multiplex fusion
    if v == "no_muffm":
        f_star = add(h_deep, h_clip)
    else:
        f_star = muffm_forward(h_deep, h_clip, params, cfg)

    return predict(f_star, params, cfg)


def sample_loss(streams, label: int, params: ModelParams, cfg: FusionConfig) -> Tensor2:
    return ce_loss(model_forward(streams, params, cfg), label)
