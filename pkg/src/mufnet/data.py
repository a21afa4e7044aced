"""Dataset plumbing: manifests, synthetic task generation, batching.

Manifest files are UTF-8 text, one record per line, tab-separated fields
in order: id, split, label, text. The text field is last and may itself
contain tabs; it may not contain newlines.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .encoders import FeatureSeq
from .errors import ConfigError, ContractError, FormatError
from .store import FeatureStore

SPLITS = ("train", "validation", "test")


@dataclass
class Sample:
    id: str
    text: str
    label: int
    split: str


@dataclass
class Manifest:
    samples: list[Sample] = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for s in self.samples:
            if s.id in seen:
                raise FormatError(f"duplicate sample id {s.id!r}")
            seen.add(s.id)
            if s.label not in (0, 1):
                raise FormatError(f"sample {s.id!r}: label must be 0 or 1, got {s.label}")
            if s.split not in SPLITS:
                raise FormatError(f"sample {s.id!r}: unknown split {s.split!r}")

    def __len__(self) -> int:
        return len(self.samples)

    def split_samples(self, split: str) -> list[Sample]:
        if split not in SPLITS:
            raise ContractError(f"unknown split {split!r}")
        return [s for s in self.samples if s.split == split]

    def counts(self) -> dict[str, int]:
        out = {name: 0 for name in SPLITS}
        for s in self.samples:
            out[s.split] += 1
        return out

    def by_id(self) -> dict[str, Sample]:
        return {s.id: s for s in self.samples}


def load_manifest(path) -> Manifest:
    """Parse a manifest file; malformed lines are rejected with line numbers."""
    samples = []
    seen = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t", 3)
            if len(parts) != 4:
                raise FormatError(
                    f"line {lineno}: expected 4 tab-separated fields, got {len(parts)}"
                )
            sample_id, split, label_str, text = parts
            if not sample_id:
                raise FormatError(f"line {lineno}: empty id")
            if sample_id in seen:
                raise FormatError(f"line {lineno}: duplicate id {sample_id!r}")
            seen.add(sample_id)
            if split not in SPLITS:
                raise FormatError(f"line {lineno}: unknown split {split!r}")
            if label_str not in ("0", "1"):
                raise FormatError(f"line {lineno}: bad label {label_str!r}")
            samples.append(Sample(id=sample_id, text=text, label=int(label_str), split=split))
    return Manifest(samples)


def save_manifest(path, manifest: Manifest) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in manifest.samples:
            if "\n" in s.text or "\t" in s.id:
                raise FormatError(f"sample {s.id!r}: id/text not representable in manifest")
            fh.write(f"{s.id}\t{s.split}\t{s.label}\t{s.text}\n")


def planted_rule(u: np.ndarray, v: np.ndarray, clip_image: np.ndarray,
                 clip_text: np.ndarray) -> int:
    """Cross-modal incongruity label: 1 iff the two projections disagree in sign."""
    return int(float(clip_image @ u) * float(clip_text @ v) < 0.0)


def rule_vectors(seed: int, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """The fixed random unit vectors the planted rule projects onto."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x52554C45]))
    u = rng.standard_normal(dim)
    v = rng.standard_normal(dim)
    return u / np.linalg.norm(u), v / np.linalg.norm(v)


_MARGIN = 0.05  # keep |projection| away from 0 so f32 storage cannot flip signs


def gen_synth(n: int, seed: int, dim: int,
              resnet_len: int = 49, bert_len: int = 77,
              noise: float = 0.5) -> tuple[Manifest, FeatureStore]:
    """Synthetic cross-modal task: balanced labels from the planted rule.

    Per sample an image latent and a text latent (random unit vectors)
    define the pooled CLIP streams; the ResNet/BERT streams are noisy
    token-level views of the same latents, row-normalized like stub
    encodings. Neither modality alone predicts the label. Splits are
    assigned 80/10/10 in order. All floats are quantized to f32 so the
    in-memory store matches its on-disk form bit for bit.
    """
    if n < 10:
        raise ContractError(f"gen_synth needs n >= 10, got {n}")
    if dim < 2:
        raise ConfigError(f"gen_synth needs dim >= 2, got {dim}")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x53594E54]))
    u, v = rule_vectors(seed, dim)

    targets = np.zeros(n, dtype=int)
    targets[: n // 2] = 1
    rng.shuffle(targets)

    def unit_latent(project_onto: np.ndarray) -> np.ndarray:
        while True:
            z = rng.standard_normal(dim)
            z /= np.linalg.norm(z)
            if abs(z @ project_onto) >= _MARGIN:
                return z

    def token_view(latent: np.ndarray, count: int) -> np.ndarray:
        tokens = latent + noise * rng.standard_normal((count, dim))
        return tokens / np.linalg.norm(tokens, axis=1, keepdims=True)

    samples = []
    entries = {}
    for i in range(n):
        while True:
            z_img = unit_latent(u)
            z_txt = unit_latent(v)
            if planted_rule(u, v, z_img, z_txt) == targets[i]:
                break
        sample_id = f"synth-{i:05d}"
        quads = (
            z_img.reshape(1, dim),
            token_view(z_img, resnet_len),
            z_txt.reshape(1, dim),
            token_view(z_txt, bert_len),
        )
        tags = ("clip_image", "resnet_image", "clip_text", "bert_text")
        entries[sample_id] = tuple(
            FeatureSeq(q.astype(np.float32).astype(np.float64), tag)
            for q, tag in zip(quads, tags)
        )
        if i < int(n * 0.8):
            split = "train"
        elif i < int(n * 0.9):
            split = "validation"
        else:
            split = "test"
        samples.append(
            Sample(id=sample_id, text=f"synthetic caption {i}", label=int(targets[i]),
                   split=split)
        )
    return Manifest(samples), FeatureStore(dim=dim, entries=entries)


def batches(manifest: Manifest, split: str, batch_size: int, seed: int,
            epoch: int = 0) -> list[list[str]]:
    """Shuffled id batches; the final partial batch is kept.

    The permutation is a pure function of (seed, epoch).
    """
    if batch_size < 1:
        raise ContractError(f"batch_size must be >= 1, got {batch_size}")
    ids = [s.id for s in manifest.split_samples(split)]
    if not ids:
        return []
    rng = np.random.default_rng(np.random.SeedSequence([seed, epoch]))
    order = rng.permutation(len(ids))
    shuffled = [ids[i] for i in order]
    return [shuffled[i : i + batch_size] for i in range(0, len(shuffled), batch_size)]
