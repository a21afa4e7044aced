"""Binary feature-store container: precomputed per-id embedding quadruples.

Layout, little-endian throughout:

    magic "MFS1" | version u32 = 1 | dim u32 | entry count u64
    then per entry, in file order:
        id length u16 | id UTF-8 bytes
        4 stream blocks in fixed order
        (clip_image, resnet_image, clip_text, bert_text), each:
            seq_len u32 | seq_len * dim f32 values, row-major

Trailing bytes after the last entry are rejected. Every malformed input
raises :class:`FormatError` naming the byte offset; the reader never
raises anything else on bad bytes.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .encoders import STREAM_TAGS, FeatureSeq
from .errors import FormatError

MAGIC = b"MFS1"
VERSION = 1

# u16 id-length field bounds ids at 65535, but the documented limit is 4096
MAX_ID_BYTES = 4096


@dataclass
class FeatureStore:
    """Immutable map from sample id to its four feature streams."""

    dim: int
    entries: dict[str, tuple[FeatureSeq, FeatureSeq, FeatureSeq, FeatureSeq]]

    def __len__(self) -> int:
        return len(self.entries)


class _Cursor:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.buf):
            raise FormatError(
                f"truncated file: needed {n} bytes for {what}, "
                f"{len(self.buf) - self.pos} left",
                offset=self.pos,
            )
        chunk = self.buf[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u16(self, what: str) -> int:
        return struct.unpack("<H", self.take(2, what))[0]

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]

    def u64(self, what: str) -> int:
        return struct.unpack("<Q", self.take(8, what))[0]


def load_feature_store(path) -> FeatureStore:
    """Parse and fully validate a feature-store file."""
    with open(path, "rb") as fh:
        buf = fh.read()
    cur = _Cursor(buf)
    magic = cur.take(4, "magic")
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}", offset=0)
    version = cur.u32("format version")
    if version != VERSION:
        raise FormatError(f"unsupported format version {version}", offset=4)
    dim = cur.u32("dim")
    if dim < 1:
        raise FormatError("dim must be >= 1", offset=8)
    count = cur.u64("entry count")
    entries: dict[str, tuple] = {}
    for i in range(count):
        entry_offset = cur.pos
        id_len = cur.u16(f"id length of entry {i}")
        if id_len == 0 or id_len > MAX_ID_BYTES:
            raise FormatError(
                f"entry {i}: id length {id_len} outside 1..{MAX_ID_BYTES}",
                offset=entry_offset,
            )
        raw_id = cur.take(id_len, f"id of entry {i}")
        try:
            sample_id = raw_id.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(
                f"entry {i}: id is not valid UTF-8 ({exc})", offset=entry_offset + 2
            ) from None
        if sample_id in entries:
            raise FormatError(
                f"duplicate id {sample_id!r} at entry {i}", offset=entry_offset
            )
        streams = []
        for tag in STREAM_TAGS:
            block_offset = cur.pos
            seq_len = cur.u32(f"{tag} length of {sample_id!r}")
            if seq_len < 1:
                raise FormatError(
                    f"entry {sample_id!r}: {tag} block has seq_len 0",
                    offset=block_offset,
                )
            payload = cur.take(
                seq_len * dim * 4, f"{tag} payload of {sample_id!r}"
            )
            values = np.frombuffer(payload, dtype="<f4").reshape(seq_len, dim)
            streams.append(FeatureSeq(values.astype(np.float64), tag))
        entries[sample_id] = tuple(streams)
    if cur.pos != len(buf):
        raise FormatError(
            f"{len(buf) - cur.pos} trailing bytes after the last entry",
            offset=cur.pos,
        )
    return FeatureStore(dim=dim, entries=entries)


def write_feature_store(path, dim: int, entries) -> None:
    """Write entries ({id: 4-tuple of FeatureSeq} or iterable of pairs).

    Payloads are stored as f32; callers should treat a written store as the
    source of truth for downstream float values.
    """
    if isinstance(entries, dict):
        items = list(entries.items())
    else:
        items = list(entries)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIQ", VERSION, dim, len(items)))
        for sample_id, streams in items:
            raw_id = sample_id.encode("utf-8")
            if not 1 <= len(raw_id) <= MAX_ID_BYTES:
                raise FormatError(f"id {sample_id!r} is empty or over {MAX_ID_BYTES} bytes")
            if len(streams) != 4:
                raise FormatError(f"entry {sample_id!r} needs 4 streams, got {len(streams)}")
            fh.write(struct.pack("<H", len(raw_id)))
            fh.write(raw_id)
            for seq, tag in zip(streams, STREAM_TAGS):
                if seq.dim != dim:
                    raise FormatError(
                        f"entry {sample_id!r} stream {tag}: dim {seq.dim} != store dim {dim}"
                    )
                fh.write(struct.pack("<I", seq.len))
                fh.write(np.ascontiguousarray(seq.tokens, dtype="<f4").tobytes())
