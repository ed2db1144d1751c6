import numpy as np
import pytest

from acmax.errors import GridMismatch
from acmax.fieldio import MAGIC, read_field, write_field
from acmax.grid import ScalarField, make_grid


def _sample_field(rng, n=1, N=8):
    g = make_grid(n, N)
    return ScalarField(g, rng.standard_normal(g.shape))


def test_binary_roundtrip(tmp_path, rng):
    f = _sample_field(rng)
    path = tmp_path / "field.bin"
    write_field(path, f)
    back = read_field(path, f.grid)
    np.testing.assert_array_equal(back.values, f.values)


def test_binary_header_layout(tmp_path, rng):
    f = _sample_field(rng, n=2, N=8)
    path = tmp_path / "field.bin"
    write_field(path, f)
    raw = path.read_bytes()
    assert raw[:4] == MAGIC
    assert int.from_bytes(raw[4:8], "little") == 2
    assert int.from_bytes(raw[8:12], "little") == 8
    assert len(raw) == 16 + 8 * f.grid.num_points


def test_binary_rejects_bad_magic(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"NOPE" + b"\0" * 12)
    with pytest.raises(ValueError):
        read_field(path)


def test_binary_grid_mismatch(tmp_path, rng):
    f = _sample_field(rng, n=1, N=8)
    path = tmp_path / "field.bin"
    write_field(path, f)
    with pytest.raises(GridMismatch):
        read_field(path, make_grid(1, 16))


def test_csv_roundtrip(tmp_path, rng):
    f = _sample_field(rng)
    path = tmp_path / "field.csv"
    write_field(path, f)
    header = path.read_text().splitlines()[0]
    assert header == "i0,i1,value"
    back = read_field(path, f.grid)
    np.testing.assert_allclose(back.values, f.values, rtol=0, atol=0)


def test_csv_binary_agree(tmp_path, rng):
    f = _sample_field(rng, n=2, N=8)
    write_field(tmp_path / "f.bin", f)
    write_field(tmp_path / "f.csv", f)
    a = read_field(tmp_path / "f.bin")
    b = read_field(tmp_path / "f.csv")
    np.testing.assert_array_equal(a.values, b.values)
