import json

import numpy as np
import pytest

from faceinpaint.checkpoint import (
    FORMAT_VERSION,
    MAGIC,
    Checkpoint,
    CheckpointError,
    CheckpointKindError,
    CheckpointVersionError,
    config_fingerprint,
    load_checkpoint,
    save_checkpoint,
)


def sample_checkpoint():
    rng = np.random.default_rng(0)
    return Checkpoint(
        kind="landmark",
        step=42,
        config={"image_size": 64, "seed": 7},
        arrays={
            "params/net/w": rng.normal(size=(3, 4)).astype(np.float32),
            "params/net/b": rng.normal(size=(4,)).astype(np.float32),
            "opt/net/0/exp_avg": rng.normal(size=(3, 4)).astype(np.float32),
        },
        meta={"opt/net/param_groups": [{"lr": 1e-3}]},
    )


def test_round_trip_is_lossless(tmp_path):
    ckpt = sample_checkpoint()
    path = tmp_path / "a.ckpt"
    save_checkpoint(ckpt, path)
    loaded = load_checkpoint(path)
    assert loaded.kind == ckpt.kind
    assert loaded.step == ckpt.step
    assert loaded.config == ckpt.config
    assert loaded.meta == ckpt.meta
    assert set(loaded.arrays) == set(ckpt.arrays)
    for key in ckpt.arrays:
        np.testing.assert_array_equal(loaded.arrays[key], ckpt.arrays[key])
        assert loaded.arrays[key].dtype == ckpt.arrays[key].dtype


def test_save_load_save_is_byte_identical(tmp_path):
    first = tmp_path / "a.ckpt"
    second = tmp_path / "b.ckpt"
    save_checkpoint(sample_checkpoint(), first)
    save_checkpoint(load_checkpoint(first), second)
    assert first.read_bytes() == second.read_bytes()


def test_truncated_file_raises_corruption_error(tmp_path):
    path = tmp_path / "a.ckpt"
    save_checkpoint(sample_checkpoint(), path)
    data = path.read_bytes()
    path.write_bytes(data[: len(data) - 8])
    with pytest.raises(CheckpointError, match="truncated"):
        load_checkpoint(path)


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "junk.ckpt"
    path.write_bytes(b"definitely not a checkpoint")
    with pytest.raises(CheckpointError, match="magic"):
        load_checkpoint(path)


def test_version_mismatch_rejected(tmp_path):
    path = tmp_path / "future.ckpt"
    header = json.dumps(
        {
            "version": FORMAT_VERSION + 1,
            "kind": "landmark",
            "step": 0,
            "config": {},
            "meta": {},
            "blobs": [],
        }
    ).encode()
    path.write_bytes(MAGIC + len(header).to_bytes(8, "little") + header)
    with pytest.raises(CheckpointVersionError):
        load_checkpoint(path)


def test_kind_mismatch_is_typed(tmp_path):
    path = tmp_path / "a.ckpt"
    save_checkpoint(sample_checkpoint(), path)
    loaded = load_checkpoint(path)
    with pytest.raises(CheckpointKindError, match="inpaint"):
        loaded.require_kind("inpaint")
    assert loaded.require_kind("landmark") is loaded


def test_missing_file_raises(tmp_path):
    with pytest.raises(CheckpointError, match="cannot read"):
        load_checkpoint(tmp_path / "nope.ckpt")


def test_fingerprint_depends_only_on_config():
    a = config_fingerprint({"x": 1, "y": 2})
    b = config_fingerprint({"y": 2, "x": 1})
    c = config_fingerprint({"x": 1, "y": 3})
    assert a == b
    assert a != c
    assert sample_checkpoint().fingerprint == config_fingerprint(
        {"image_size": 64, "seed": 7}
    )
