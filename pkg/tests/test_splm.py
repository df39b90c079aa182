import numpy as np
import pytest

from covlab import splm


def test_round_trip(tmp_path, rng):
    a = rng.standard_normal((7, 3))
    path = tmp_path / "m.splm"
    splm.write_matrix(path, a)
    np.testing.assert_array_equal(splm.read_matrix(path), a)
    assert path.stat().st_size == 16 + 7 * 3 * 8


def test_header_layout(tmp_path):
    path = tmp_path / "m.splm"
    splm.write_matrix(path, np.array([[1.5, -2.0]]))
    raw = path.read_bytes()
    assert raw[:4] == b"SPLM"
    assert int.from_bytes(raw[4:8], "little") == 1
    assert int.from_bytes(raw[8:12], "little") == 2
    assert np.frombuffer(raw[16:], dtype="<f8").tolist() == [1.5, -2.0]


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "m.splm"
    path.write_bytes(b"NOPE" + bytes(12))
    with pytest.raises(ValueError, match="magic"):
        splm.read_matrix(path)


def test_truncated_rejected(tmp_path):
    path = tmp_path / "m.splm"
    splm.write_matrix(path, np.ones((4, 4)))
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(ValueError, match="truncated"):
        splm.read_matrix(path)
