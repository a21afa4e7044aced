"""Checkpoint format tests: round-trips, variant validation, malformed files."""

import struct

import numpy as np
import pytest

from mufnet.checkpoint import load_checkpoint, save_checkpoint
from mufnet.errors import FormatError
from mufnet.fusion import VARIANTS, FusionConfig, init_params


def desk_cfg(**kw):
    base = dict(dim=8, heads=2, mlp_hidden=8)
    base.update(kw)
    return FusionConfig(**base)


def test_round_trip_exact(tmp_path):
    cfg = desk_cfg(alpha=0.25, beta=0.5, gamma=0.75)
    params = init_params(cfg, seed=3)
    path = tmp_path / "model.rcmf"
    save_checkpoint(path, params, cfg)
    loaded, loaded_cfg = load_checkpoint(path)
    assert loaded_cfg == FusionConfig(dim=8, heads=2, alpha=0.25, beta=0.5,
                                      gamma=0.75, mlp_hidden=8, variant="full")
    orig = params.named()
    for name, t in loaded.named().items():
        np.testing.assert_array_equal(t.data, orig[name].data)
        assert t.requires_grad


@pytest.mark.parametrize("variant", VARIANTS)
def test_round_trip_every_variant(tmp_path, variant):
    cfg = desk_cfg(variant=variant)
    params = init_params(cfg, seed=4)
    path = tmp_path / f"{variant}.rcmf"
    save_checkpoint(path, params, cfg)
    loaded, loaded_cfg = load_checkpoint(path)
    assert loaded_cfg.variant == variant
    assert set(loaded.named()) == set(params.named())


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.rcmf"
    path.write_bytes(b"NOPE" + struct.pack("<I", 1))
    with pytest.raises(FormatError, match="magic"):
        load_checkpoint(path)


def test_truncation_rejected(tmp_path):
    cfg = desk_cfg()
    path = tmp_path / "model.rcmf"
    save_checkpoint(path, init_params(cfg, 0), cfg)
    blob = path.read_bytes()
    path.write_bytes(blob[: len(blob) - 17])
    with pytest.raises(FormatError, match="truncated"):
        load_checkpoint(path)


def test_shape_lie_rejected(tmp_path):
    cfg = desk_cfg()
    path = tmp_path / "model.rcmf"
    save_checkpoint(path, init_params(cfg, 0), cfg)
    blob = bytearray(path.read_bytes())
    at = blob.find(b"classifier.weight")
    rows_at = at + len(b"classifier.weight")
    struct.pack_into("<II", blob, rows_at, 1000, 1000)
    path.write_bytes(bytes(blob))
    with pytest.raises(FormatError):
        load_checkpoint(path)


def test_renamed_parameter_rejected(tmp_path):
    cfg = desk_cfg()
    path = tmp_path / "model.rcmf"
    save_checkpoint(path, init_params(cfg, 0), cfg)
    blob = path.read_bytes().replace(b"classifier.bias", b"classifier.bi_s")
    path.write_bytes(blob)
    with pytest.raises(FormatError, match="mismatch"):
        load_checkpoint(path)


def test_variant_parameter_set_is_validated(tmp_path):
    # a checkpoint that claims "full" but carries no_muffm's parameter set
    cfg = desk_cfg(variant="no_muffm")
    path = tmp_path / "model.rcmf"
    save_checkpoint(path, init_params(cfg, 0), cfg)
    blob = bytearray(path.read_bytes())
    at = blob.find(b"no_muffm")
    assert at > 0
    # shrink the tagged string in place: length field sits 2 bytes before
    struct.pack_into("<H", blob, at - 2, 4)
    new = bytes(blob[: at]) + b"full" + bytes(blob[at + len(b"no_muffm"):])
    path.write_bytes(new)
    with pytest.raises(FormatError, match="missing.*muffm"):
        load_checkpoint(path)


def test_non_finite_parameter_rejected(tmp_path):
    cfg = desk_cfg()
    params = init_params(cfg, 0)
    params.classifier.weight.data[0, 0] = np.nan
    path = tmp_path / "model.rcmf"
    save_checkpoint(path, params, cfg)
    with pytest.raises(FormatError, match="non-finite"):
        load_checkpoint(path)


def test_unknown_config_tag_rejected(tmp_path):
    cfg = desk_cfg()
    path = tmp_path / "model.rcmf"
    save_checkpoint(path, init_params(cfg, 0), cfg)
    blob = bytearray(path.read_bytes())
    at = blob.find(b"dim", 8)
    blob[at + 3] = 77  # stomp the type tag that follows the key
    path.write_bytes(bytes(blob))
    with pytest.raises(FormatError, match="tag"):
        load_checkpoint(path)


def test_invalid_config_value_rejected(tmp_path):
    cfg = desk_cfg()
    path = tmp_path / "model.rcmf"
    save_checkpoint(path, init_params(cfg, 0), cfg)
    blob = bytearray(path.read_bytes())
    at = blob.find(b"heads", 8)
    struct.pack_into("<q", blob, at + len(b"heads") + 1, 5)  # 8 % 5 != 0
    path.write_bytes(bytes(blob))
    with pytest.raises(FormatError, match="invalid checkpoint config"):
        load_checkpoint(path)
