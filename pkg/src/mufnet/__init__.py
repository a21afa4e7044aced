"""Multimodal sarcasm-detection fusion network, desk-scale and self-contained.

Four feature streams (CLIP-image, ResNet-image, CLIP-text, BERT-text; here
stubbed or precomputed) flow through shallow cross-modal interaction,
per-modality relational context learning, CLIP-view co-attention fusion and
a sigmoid-gated multiplex fusion stage into a 2-class head. Everything runs
on a small float64 autodiff core so gradients are checkable against finite
differences.
"""

from .attention import AttentionParams, init_attention, multi_head_attention
from .checkpoint import load_checkpoint, save_checkpoint
from .data import Manifest, Sample, batches, gen_synth, load_manifest, save_manifest
from .encoders import FeatureSeq, StoreProvider, StubProvider, StubSpec, get_streams, stub_encode
from .errors import (
    ConfigError,
    ContractError,
    DivergenceError,
    FormatError,
    MissingIdError,
    MufnetError,
    ShapeError,
)
from .fusion import (
    VARIANTS,
    FusionConfig,
    ModelParams,
    Prediction,
    ce_loss,
    clip_view_fuse,
    deep_fuse,
    init_params,
    model_forward,
    muffm_forward,
    predict,
    rclm_stream,
    sfim_forward,
)
from .metrics import Metrics, confusion, evaluate, f1_score
from .optim import AdamW, ParamGroup
from .store import FeatureStore, load_feature_store, write_feature_store
from .tensor import GradTape, Tensor2, scaled_dot_attention, softmax_rows
from .train import TrainConfig, TrainResult, ablate, sweep, train

__version__ = "0.1.0"
