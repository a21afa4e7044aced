"""Feature providers: the boundary where the four raw streams come from.

Real pretrained encoders never run inside this package. A provider either
synthesizes deterministic pseudo-embeddings (stub) or reads precomputed
ones from a feature store. Provider outputs are plain inputs to the model:
gradients never flow past this boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, MissingIdError

STREAM_TAGS = ("clip_image", "resnet_image", "clip_text", "bert_text")

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = (1 << 64) - 1


@dataclass
class FeatureSeq:
    """A token sequence of embeddings; one of the model's input streams."""

    tokens: np.ndarray  # len x dim, float64
    stream_tag: str

    def __post_init__(self):
        self.tokens = np.asarray(self.tokens, dtype=np.float64)
        if self.tokens.ndim != 2 or self.tokens.shape[0] < 1 or self.tokens.shape[1] < 1:
            raise ContractError(f"FeatureSeq needs a len x dim matrix, got {self.tokens.shape}")

    @property
    def len(self) -> int:
        return self.tokens.shape[0]

    @property
    def dim(self) -> int:
        return self.tokens.shape[1]


@dataclass(frozen=True)
class StubSpec:
    """Addressing for one deterministic pseudo-encoder stream."""

    namespace: str
    dim: int
    len: int
    global_seed: int = 0

    def __post_init__(self):
        if self.dim < 1 or self.len < 1:
            raise ContractError(f"StubSpec needs dim >= 1 and len >= 1, got {self}")


def _fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _U64
    return h


def _splitmix64_fill(seed: int, count: int) -> np.ndarray:
    """count uniform [-1, 1) doubles from a splitmix64 stream."""
    state = seed & _U64
    out = np.empty(count)
    for i in range(count):
        state = (state + 0x9E3779B97F4A7C15) & _U64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _U64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _U64
        z = z ^ (z >> 31)
        out[i] = (z >> 11) * (2.0 ** -53) * 2.0 - 1.0
    return out


def stub_encode(spec: StubSpec, input_key: str) -> FeatureSeq:
    """Deterministic pseudo-embedding for (spec, key), identical across runs.

    Seed = FNV-1a-64 over UTF-8 of ``namespace ++ 0x1F ++ key``, XORed with
    the global seed; values come from a splitmix64 stream mapped to
    [-1, 1); every token row is L2-normalized.
    """
    if not input_key:
        raise ContractError("stub_encode: input_key must be non-empty")
    material = spec.namespace.encode("utf-8") + b"\x1f" + input_key.encode("utf-8")
    seed = _fnv1a64(material) ^ (spec.global_seed & _U64)
    tokens = _splitmix64_fill(seed, spec.len * spec.dim).reshape(spec.len, spec.dim)
    norms = np.linalg.norm(tokens, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    tokens /= norms
    tag = spec.namespace if spec.namespace in STREAM_TAGS else "derived"
    return FeatureSeq(tokens, tag)


class StubProvider:
    """Synthesizes all four streams; image streams keyed by sample id,
    text streams keyed by the raw text."""

    def __init__(
        self,
        dim: int,
        global_seed: int = 0,
        clip_len: int = 1,
        resnet_len: int = 49,
        bert_len: int = 77,
    ):
        self.dim = dim
        self.specs = {
            "clip_image": StubSpec("clip_image", dim, clip_len, global_seed),
            "resnet_image": StubSpec("resnet_image", dim, resnet_len, global_seed),
            "clip_text": StubSpec("clip_text", dim, clip_len, global_seed),
            "bert_text": StubSpec("bert_text", dim, bert_len, global_seed),
        }

    def get_streams(self, sample_id: str, text: str):
        return (
            stub_encode(self.specs["clip_image"], sample_id),
            stub_encode(self.specs["resnet_image"], sample_id),
            stub_encode(self.specs["clip_text"], text),
            stub_encode(self.specs["bert_text"], text),
        )


class StoreProvider:
    """Serves streams recorded in a loaded FeatureStore."""

    def __init__(self, store):
        self.store = store
        self.dim = store.dim

    def get_streams(self, sample_id: str, text: str):
        entry = self.store.entries.get(sample_id)
        if entry is None:
            raise MissingIdError(f"sample id {sample_id!r} not present in feature store")
        return entry


def get_streams(provider, sample_id: str, text: str):
    """Four FeatureSeq values in (clip_image, resnet_image, clip_text,
    bert_text) order."""
    return provider.get_streams(sample_id, text)
