"""Standalone writer for the mufnet feature-store container.

The byte layout is the exporter's contract with the primary package, so it
is implemented here from the format description rather than imported:

    magic "MFS1" | version u32 = 1 | dim u32 | entry count u64
    per entry: id length u16 | id UTF-8 |
               4 blocks (clip_image, resnet_image, clip_text, bert_text),
               each: seq_len u32 | seq_len * dim f32 row-major

Little-endian throughout.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"MFS1"
VERSION = 1
STREAM_ORDER = ("clip_image", "resnet_image", "clip_text", "bert_text")


class StoreWriteError(Exception):
    pass


def write_store(fh, dim: int, entries: list[tuple[str, dict[str, np.ndarray]]]) -> None:
    """Write entries ([(id, {stream: len x dim array})]) to a binary stream."""
    fh.write(MAGIC)
    fh.write(struct.pack("<IIQ", VERSION, dim, len(entries)))
    for sample_id, streams in entries:
        raw_id = sample_id.encode("utf-8")
        if not 1 <= len(raw_id) <= 4096:
            raise StoreWriteError(f"id {sample_id!r} must be 1..4096 UTF-8 bytes")
        fh.write(struct.pack("<H", len(raw_id)))
        fh.write(raw_id)
        for tag in STREAM_ORDER:
            block = np.asarray(streams[tag], dtype=np.float32)
            if block.ndim != 2 or block.shape[1] != dim or block.shape[0] < 1:
                raise StoreWriteError(
                    f"{sample_id!r}/{tag}: need a len x {dim} block, got {block.shape}"
                )
            if not np.isfinite(block).all():
                raise StoreWriteError(f"{sample_id!r}/{tag}: non-finite values")
            fh.write(struct.pack("<I", block.shape[0]))
            fh.write(np.ascontiguousarray(block, dtype="<f4").tobytes())
