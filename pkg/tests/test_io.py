import numpy as np
import pytest

from romrl import io
from romrl.errors import DataIntegrityError


def test_table_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(0)
    cols = [rng.normal(size=50) * 10.0 ** rng.integers(-300, 300, 50), np.arange(50.0),
            np.r_[np.pi, np.nextafter(1.0, 2.0), 1e-320, -0.0, np.zeros(46)]]
    path = tmp_path / "t.csv"
    io.write_table(path, ["a", "b", "c"], cols)
    header, data = io.read_table(path)
    assert header == ["a", "b", "c"]
    np.testing.assert_array_equal(data.T, np.array(cols))


def test_table_rejects_ragged_columns(tmp_path):
    with pytest.raises(ValueError):
        io.write_table(tmp_path / "t.csv", ["a", "b"], [np.zeros(3), np.zeros(4)])


def test_snapshot_round_trip(tmp_path):
    X = np.random.default_rng(1).normal(size=(7, 13))
    path = tmp_path / "s.bin"
    io.write_snapshots(path, X)
    np.testing.assert_array_equal(io.read_snapshots(path), X)
    assert path.read_bytes()[:8] == io.MAGIC


def test_corrupt_snapshots_rejected(tmp_path):
    path = tmp_path / "s.bin"
    io.write_snapshots(path, np.ones((3, 4)))
    raw = path.read_bytes()
    path.write_bytes(b"XOMSNAP1" + raw[8:])
    with pytest.raises(DataIntegrityError, match="magic"):
        io.read_snapshots(path)
    path.write_bytes(raw[:-8])
    with pytest.raises(DataIntegrityError):
        io.read_snapshots(path)
    path.write_bytes(raw + b"\0")
    with pytest.raises(DataIntegrityError):
        io.read_snapshots(path)


def test_blocks_round_trip(tmp_path):
    blocks = {"A": np.eye(3), "b": np.arange(4.0), "s": np.array(2.5)}
    layout = io.write_blocks(tmp_path / "b.bin", blocks)
    out = io.read_blocks(tmp_path / "b.bin", layout)
    for k, v in blocks.items():
        np.testing.assert_array_equal(out[k], v)
        assert out[k].shape == v.shape


def test_config_hash_ignores_key_order():
    assert io.config_hash({"a": 1, "b": [1.5, 2]}) == io.config_hash({"b": [1.5, 2], "a": 1})
    assert io.config_hash({"a": 1}) != io.config_hash({"a": 2})
