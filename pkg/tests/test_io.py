import os
import stat

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wiredyn.io import (format_csv, read_checkpoint, read_csv, read_raster, read_yaml,
                        write_checkpoint, write_csv, write_raster, write_yaml)
from wiredyn.observables import DensityMap


def test_csv_roundtrip_nine_digits(tmp_path):
    x = np.array([0.1, 1.0 / 3.0, -2.5e-12])
    path = write_csv(tmp_path / "a.csv", ["x_nm", "y"], [x, 2 * x])
    header, data = read_csv(path)
    assert header == ["x_nm", "y"]
    np.testing.assert_allclose(data[:, 0], x, rtol=1e-8)
    assert path.read_text().splitlines()[2] == "3.33333333e-01,6.66666667e-01"


def test_csv_permissions_follow_umask(tmp_path):
    path = write_csv(tmp_path / "p.csv", ["a"], [[1.0]])
    mask = os.umask(0)
    os.umask(mask)
    assert stat.S_IMODE(path.stat().st_mode) == 0o666 & ~mask
    assert not list(tmp_path.glob(".*tmp"))


def test_csv_shape_errors():
    with pytest.raises(ValueError):
        format_csv(["a", "b"], [[1.0]])
    with pytest.raises(ValueError):
        format_csv(["a", "b"], [[1.0], [1.0, 2.0]])


def test_empty_csv(tmp_path):
    path = write_csv(tmp_path / "e.csv", ["a", "b"], [[], []])
    header, data = read_csv(path)
    assert data.shape == (0, 2)


def test_raster_roundtrip(tmp_path):
    t = np.arange(4) * 10.0
    x = np.linspace(-1, 1, 9)
    rho = np.add.outer(t, x)
    path = write_raster(tmp_path / "d.csv", DensityMap(t, x, rho), 2, 4)
    tt, xx, rr = read_raster(path)
    np.testing.assert_allclose(tt, t[::2])
    np.testing.assert_allclose(xx, x[::4])
    np.testing.assert_allclose(rr, rho[::2, ::4], rtol=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.complex_numbers(max_magnitude=1e6, allow_nan=False), min_size=0, max_size=50),
       st.floats(-1e4, 1e4))
def test_checkpoint_roundtrip_exact(tmp_path_factory, values, time):
    path = tmp_path_factory.mktemp("ck") / "c.bin"
    write_checkpoint(path, np.array(values, dtype=complex), time)
    back, t = read_checkpoint(path)
    np.testing.assert_array_equal(back, np.array(values, dtype=complex))
    assert t == time


def test_checkpoint_layout(tmp_path):
    path = write_checkpoint(tmp_path / "c.bin", np.array([1 + 2j]), 0.5)
    raw = path.read_bytes()
    assert len(raw) == 8 + 8 + 16
    assert int.from_bytes(raw[:8], "little") == 1


def test_truncated_checkpoint(tmp_path):
    path = write_checkpoint(tmp_path / "c.bin", np.ones(4, complex), 1.0)
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(ValueError, match="expected 4 sites"):
        read_checkpoint(path)


def test_yaml_roundtrip_keeps_order(tmp_path):
    data = {"z": 1, "a": [1.5, None], "m": {"k": "v"}}
    path = write_yaml(tmp_path / "c.yaml", data)
    assert read_yaml(path) == data
    assert path.read_text().startswith("z:")
