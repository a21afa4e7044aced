"""The export pipeline: encode image-text pairs, write store + manifest.

All four blocks are width-normalized to the target dim (768) before
writing. Native 768-wide streams pass through unchanged; narrower or wider
ones go through one fixed-seed Gaussian projection per native width, shared
across streams of that width, so CLIP's image and text rows stay in a
common space and their cosine geometry is approximately preserved.
"""

from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np
import torch
from PIL import Image

from .listing import Pair, write_manifest
from .writer import write_store


class ExportError(Exception):
    """Raised when any pair fails; carries the per-id error report."""

    def __init__(self, failures: dict[str, str]):
        self.failures = dict(failures)
        lines = "; ".join(f"{k}: {v}" for k, v in sorted(self.failures.items()))
        super().__init__(f"{len(self.failures)} pair(s) failed, no output written: {lines}")


@dataclass
class ExportJob:
    pairs: list[Pair]
    store_path: str
    manifest_path: str
    dim: int = 768
    resnet_len: int = 49
    projection_seed: int = 20240601
    batch_size: int = 8
    clip_sequence_mode: bool = False  # pooled rows by default


@dataclass
class ExportReport:
    count: int
    dim: int
    stream_lens: dict[str, int] = field(default_factory=dict)


def _projection(native: int, dim: int, seed: int) -> np.ndarray | None:
    if native == dim:
        return None
    rng = np.random.default_rng(np.random.SeedSequence([seed, native, dim]))
    return rng.normal(0.0, 1.0 / math.sqrt(native), size=(native, dim))


def _widen(block: np.ndarray, proj: np.ndarray | None) -> np.ndarray:
    return block if proj is None else block @ proj


def _grid_side(resnet_len: int) -> int:
    side = math.isqrt(resnet_len)
    if side * side != resnet_len:
        raise ValueError(f"resnet_len must be a perfect square, got {resnet_len}")
    return side


def _validate_job(job: ExportJob) -> None:
    if job.dim < 1:
        raise ValueError(f"dim must be >= 1, got {job.dim}")
    _grid_side(job.resnet_len)
    seen = set()
    failures = {}
    for pair in job.pairs:
        if pair.id in seen:
            raise ValueError(f"duplicate id {pair.id!r}")
        seen.add(pair.id)
    # every image must be decodable before any encoding starts
    for pair in job.pairs:
        try:
            with Image.open(pair.image_path) as img:
                img.verify()
        except Exception as exc:
            failures[pair.id] = f"undecodable image {pair.image_path!r}: {exc}"
    if failures:
        raise ExportError(failures)


def export(job: ExportJob, encoders) -> ExportReport:
    """Encode every pair and atomically write the store and manifest."""
    _validate_job(job)
    side = _grid_side(job.resnet_len)
    entries = []
    failures: dict[str, str] = {}
    projections: dict[int, np.ndarray | None] = {}

    def encode_pairs(pairs: list[Pair]):
        images = [Image.open(p.image_path) for p in pairs]
        try:
            batch = encoders.encode(images, [p.text for p in pairs])
        finally:
            for img in images:
                img.close()
        for width in (batch.clip_image.shape[1], batch.resnet_map.shape[1],
                      batch.bert_tokens.shape[2]):
            if width not in projections:
                projections[width] = _projection(width, job.dim, job.projection_seed)
        resnet_grid = torch.nn.functional.adaptive_avg_pool2d(
            torch.from_numpy(batch.resnet_map), side
        ).numpy()
        b, channels = resnet_grid.shape[0], resnet_grid.shape[1]
        resnet_tokens = resnet_grid.reshape(b, channels, side * side).transpose(0, 2, 1)
        for i, pair in enumerate(pairs):
            streams = {
                "clip_image": _widen(batch.clip_image[i : i + 1],
                                     projections[batch.clip_image.shape[1]]),
                "resnet_image": _widen(resnet_tokens[i],
                                       projections[channels]),
                "clip_text": _widen(batch.clip_text[i : i + 1],
                                    projections[batch.clip_text.shape[1]]),
                "bert_text": _widen(batch.bert_tokens[i],
                                    projections[batch.bert_tokens.shape[2]]),
            }
            entries.append((pair.id, streams))

    for start in range(0, len(job.pairs), job.batch_size):
        chunk = job.pairs[start : start + job.batch_size]
        try:
            encode_pairs(chunk)
        except Exception:
            # attribute the failure to specific pairs
            for pair in chunk:
                try:
                    encode_pairs([pair])
                except Exception as exc:
                    failures[pair.id] = f"encoding failed: {exc}"
    if failures:
        raise ExportError(failures)

    # partial output is forbidden: write to temp files, rename on success
    store_dir = os.path.dirname(os.path.abspath(job.store_path)) or "."
    os.makedirs(store_dir, exist_ok=True)
    fd, tmp_store = tempfile.mkstemp(dir=store_dir, suffix=".mfs.tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            write_store(fh, job.dim, entries)
        os.replace(tmp_store, job.store_path)
    except BaseException:
        if os.path.exists(tmp_store):
            os.unlink(tmp_store)
        raise
    manifest_dir = os.path.dirname(os.path.abspath(job.manifest_path)) or "."
    os.makedirs(manifest_dir, exist_ok=True)
    tmp_manifest = job.manifest_path + ".tmp"
    write_manifest(tmp_manifest, job.pairs)
    os.replace(tmp_manifest, job.manifest_path)

    lens = {}
    if entries:
        lens = {tag: block.shape[0] for tag, block in entries[0][1].items()}
    return ExportReport(count=len(entries), dim=job.dim, stream_lens=lens)
