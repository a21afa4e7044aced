"""Model checkpoint format.

Layout, little-endian:

    magic "RCMF" | version u32 = 1
    config block: field count u32, then per field:
        key length u16 | key UTF-8 | tag u8 (1 = int, 2 = float, 3 = str) |
        payload (i64 / f64 / u16 length + UTF-8)
    then per parameter tensor, in name order:
        name length u16 | name UTF-8 | rows u32 | cols u32 | f64 payload

Loading validates the config, the exact parameter-name set expected for
the declared variant, and every tensor shape. All malformations raise
:class:`FormatError`.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import ConfigError, FormatError
from .fusion import FusionConfig, ModelParams, init_params
from .store import _Cursor

MAGIC = b"RCMF"
VERSION = 1

_TAG_INT, _TAG_FLOAT, _TAG_STR = 1, 2, 3


def _config_items(cfg: FusionConfig) -> list[tuple[str, object]]:
    return [
        ("dim", cfg.dim),
        ("heads", cfg.heads),
        ("alpha", cfg.alpha),
        ("beta", cfg.beta),
        ("gamma", cfg.gamma),
        ("mlp_hidden", cfg.hidden),
        ("variant", cfg.variant),
    ]


def save_checkpoint(path, params: ModelParams, cfg: FusionConfig) -> None:
    named = params.named()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        items = _config_items(cfg)
        fh.write(struct.pack("<I", len(items)))
        for key, value in items:
            raw_key = key.encode("utf-8")
            fh.write(struct.pack("<H", len(raw_key)))
            fh.write(raw_key)
            if isinstance(value, bool):
                raise FormatError(f"config key {key}: bool not representable")
            if isinstance(value, int):
                fh.write(struct.pack("<bq", _TAG_INT, value))
            elif isinstance(value, float):
                fh.write(struct.pack("<bd", _TAG_FLOAT, value))
            else:
                raw = str(value).encode("utf-8")
                fh.write(struct.pack("<bH", _TAG_STR, len(raw)))
                fh.write(raw)
        for name, tensor in named.items():
            raw_name = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw_name)))
            fh.write(raw_name)
            fh.write(struct.pack("<II", tensor.rows, tensor.cols))
            fh.write(np.ascontiguousarray(tensor.data, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[ModelParams, FusionConfig]:
    with open(path, "rb") as fh:
        buf = fh.read()
    cur = _Cursor(buf)
    magic = cur.take(4, "magic")
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}", offset=0)
    version = cur.u32("version")
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}", offset=4)
    n_fields = cur.u32("config field count")
    fields: dict[str, object] = {}
    for i in range(n_fields):
        at = cur.pos
        key_len = cur.u16(f"config key length {i}")
        try:
            key = cur.take(key_len, f"config key {i}").decode("utf-8")
        except UnicodeDecodeError:
            raise FormatError(f"config key {i} is not valid UTF-8", offset=at) from None
        tag = cur.take(1, f"tag of config key {key!r}")[0]
        if tag == _TAG_INT:
            fields[key] = struct.unpack("<q", cur.take(8, f"value of {key!r}"))[0]
        elif tag == _TAG_FLOAT:
            fields[key] = struct.unpack("<d", cur.take(8, f"value of {key!r}"))[0]
        elif tag == _TAG_STR:
            str_len = cur.u16(f"string length of {key!r}")
            try:
                fields[key] = cur.take(str_len, f"value of {key!r}").decode("utf-8")
            except UnicodeDecodeError:
                raise FormatError(f"value of {key!r} is not valid UTF-8", offset=at) from None
        else:
            raise FormatError(f"unknown config tag {tag} for key {key!r}", offset=at)
    expected_keys = {k for k, _ in _config_items(FusionConfig())}
    if set(fields) != expected_keys:
        raise FormatError(
            f"config block has keys {sorted(fields)}, expected {sorted(expected_keys)}"
        )
    try:
        cfg = FusionConfig(
            dim=int(fields["dim"]),
            heads=int(fields["heads"]),
            alpha=float(fields["alpha"]),
            beta=float(fields["beta"]),
            gamma=float(fields["gamma"]),
            mlp_hidden=int(fields["mlp_hidden"]),
            variant=str(fields["variant"]),
        )
    except (ConfigError, TypeError, ValueError) as exc:
        raise FormatError(f"invalid checkpoint config: {exc}") from None

    loaded: dict[str, np.ndarray] = {}
    while cur.pos != len(buf):
        at = cur.pos
        name_len = cur.u16("parameter name length")
        try:
            name = cur.take(name_len, "parameter name").decode("utf-8")
        except UnicodeDecodeError:
            raise FormatError("parameter name is not valid UTF-8", offset=at) from None
        if name in loaded:
            raise FormatError(f"duplicate parameter {name!r}", offset=at)
        rows = cur.u32(f"rows of {name!r}")
        cols = cur.u32(f"cols of {name!r}")
        if rows < 1 or cols < 1:
            raise FormatError(f"parameter {name!r} has degenerate shape {rows}x{cols}",
                              offset=at)
        payload = cur.take(rows * cols * 8, f"payload of {name!r}")
        loaded[name] = np.frombuffer(payload, dtype="<f8").reshape(rows, cols).copy()

    params = init_params(cfg, seed=0)
    expected = params.named()
    if set(loaded) != set(expected):
        missing = sorted(set(expected) - set(loaded))
        extra = sorted(set(loaded) - set(expected))
        raise FormatError(
            f"parameter set mismatch for variant {cfg.variant!r}: "
            f"missing {missing}, unexpected {extra}"
        )
    for name, tensor in expected.items():
        if loaded[name].shape != tensor.data.shape:
            raise FormatError(
                f"parameter {name!r} has shape {loaded[name].shape}, "
                f"expected {tensor.data.shape}"
            )
        if not np.isfinite(loaded[name]).all():
            raise FormatError(f"parameter {name!r} contains non-finite values")
        tensor.data = loaded[name]
    return params, cfg
