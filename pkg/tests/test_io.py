import numpy as np
import pytest

from rasterpty import io as pio
from rasterpty.forward import measure
from rasterpty.grid import GridGeometry
from rasterpty.scan import perturbed_separable, random_perturbation, raster


def test_ptyc_roundtrip_and_layout(tmp_path):
    x = np.array([[1 + 2j, -3.5], [0.25j, 7]])
    path = tmp_path / "x.ptyc"
    pio.write_ptyc(path, x)
    raw = path.read_bytes()
    head, body = raw.split(b"\n", 1)
    assert head == b"PTYC 2 2"
    np.testing.assert_array_equal(np.frombuffer(body, "<f8"), [1, 2, -3.5, 0, 0, 0.25, 7, 0])
    np.testing.assert_array_equal(pio.read_ptyc(path), x)


def test_ptyc_errors(tmp_path):
    p = tmp_path / "bad.ptyc"
    p.write_bytes(b"PTYC 2 2\n" + b"\0" * 10)
    with pytest.raises(ValueError):
        pio.read_ptyc(p)
    p.write_bytes(b"PTYX 2 2\n")
    with pytest.raises(ValueError):
        pio.read_ptyc(p)
    p.write_bytes(b"PTYC 1 1\n" + np.zeros(3, "<f8").tobytes())
    with pytest.raises(ValueError):
        pio.read_ptyc(p)


@pytest.mark.parametrize(
    "pattern",
    [raster(8, 2), perturbed_separable(8, 2, [0, 0, -1, 0], [0, 1, 0, 0]), random_perturbation(8, 2, 1, 3, full=True)],
)
def test_ptyd_roundtrip(tmp_path, pattern):
    rng = np.random.default_rng(0)
    geom = GridGeometry(8, 4)
    data = measure(rng.standard_normal((8, 8)) + 0j, rng.standard_normal((4, 4)) + 0j, geom, pattern, 2)
    path = tmp_path / "d.ptyd"
    pio.write_ptyd(path, data)
    assert path.read_bytes().startswith(b"PTYD 2 4 16\n0 0 ")
    back = pio.read_ptyd(path, 8, 2, pattern.kind)
    assert back.pattern == pattern and back.os == 2
    np.testing.assert_array_equal(back.magnitudes, data.magnitudes)


def test_ptyd_corrupt_header(tmp_path):
    p = tmp_path / "bad.ptyd"
    p.write_bytes(b"PTYD two 4 16\n")
    with pytest.raises(ValueError):
        pio.read_ptyd(p, 8, 2)
    p.write_bytes(b"PTYD 2 4 16\n0 0 0 0\n" + b"\0" * 16)
    with pytest.raises(ValueError):
        pio.read_ptyd(p, 8, 2)
    p.write_bytes(b"\xff\xfe")
    with pytest.raises(ValueError):
        pio.read_ptyd(p, 8, 2)
