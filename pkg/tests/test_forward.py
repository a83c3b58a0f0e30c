import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rasterpty.forward import DiffractionSet, dft_magnitude, dft_magnitude_oracle, exit_wave, exit_waves, measure
from rasterpty.grid import GridGeometry, restrict
from rasterpty.scan import raster

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def complex_arrays(max_side=6):
    side = st.integers(1, max_side)
    return side.flatmap(
        lambda s: st.tuples(arrays(float, (s, s), elements=finite), arrays(float, (s, s), elements=finite))
    ).map(lambda p: p[0] + 1j * p[1])


def test_exit_wave_trivial_cases():
    geom = GridGeometry(4, 2)
    mu = np.array([[1, 2j], [3, -1]])
    np.testing.assert_array_equal(exit_wave(np.ones((4, 4)), mu, geom, (1, 2)), mu)
    f = np.arange(16).reshape(4, 4)
    np.testing.assert_array_equal(exit_wave(f, np.ones((2, 2)), geom, (0, 0)), f[:2, :2])


def test_exit_wave_hand_computed():
    # f(n1, n2) = n1 + 2 n2 stored at [n2, n1]; probe identically i; t = (1, 1)
    geom = GridGeometry(4, 2)
    rows, cols = np.indices((4, 4))
    f = cols + 2 * rows
    psi = exit_wave(f, 1j * np.ones((2, 2)), geom, (1, 1))
    # window pixels (1,1), (2,1), (1,2), (2,2) -> 3, 4, 5, 6
    np.testing.assert_array_equal(psi, 1j * np.array([[3, 4], [5, 6]]))


def test_exit_wave_size_mismatch():
    with pytest.raises(ValueError):
        exit_wave(np.ones((4, 4)), np.ones((3, 3)), GridGeometry(4, 2), (0, 0))


def test_dft_impulse_and_zero():
    psi = np.zeros((2, 2))
    psi[0, 0] = 1
    np.testing.assert_allclose(dft_magnitude(psi, 2), np.ones((4, 4)))
    np.testing.assert_array_equal(dft_magnitude(np.zeros((3, 3)), 2), np.zeros((6, 6)))
    np.testing.assert_allclose(dft_magnitude_oracle(psi, 2), np.ones((4, 4)))
    np.testing.assert_array_equal(dft_magnitude_oracle(np.zeros((2, 2)), 1), np.zeros((2, 2)))


def test_dft_ones_dirichlet_kernel():
    # 2x2 ones padded to 4x4: |1 + e^{-i pi u/2}| |1 + e^{-i pi v/2}|
    u = np.arange(4)
    d = np.abs(1 + np.exp(-1j * np.pi * u / 2))
    np.testing.assert_allclose(dft_magnitude(np.ones((2, 2)), 2), np.outer(d, d), atol=1e-14)


@settings(max_examples=50, deadline=None)
@given(complex_arrays(), st.sampled_from([1, 2, 3]))
def test_fast_matches_oracle(psi, os):
    fast = dft_magnitude(psi, os)
    slow = dft_magnitude_oracle(psi, os)
    scale = max(np.abs(slow).max(), 1e-300)
    assert np.abs(fast - slow).max() <= 1e-12 * scale


@settings(max_examples=50, deadline=None)
@given(complex_arrays(8), st.sampled_from([1, 2]))
def test_parseval(psi, os):
    b = dft_magnitude(psi, os)
    lhs = np.sum(b**2)
    rhs = (os * psi.shape[0]) ** 2 * np.sum(np.abs(psi) ** 2)
    assert abs(lhs - rhs) <= 1e-12 * max(rhs, 1e-300)


@settings(max_examples=30, deadline=None)
@given(complex_arrays(), finite)
def test_global_phase_invariance(psi, theta):
    a = dft_magnitude(psi)
    b = dft_magnitude(np.exp(1j * theta) * psi)
    assert np.abs(a - b).max() <= 1e-12 * max(a.max(), 1e-300)


@settings(max_examples=30, deadline=None)
@given(complex_arrays(), st.integers(0, 20), st.integers(0, 20))
def test_cyclic_translation_invariance(psi, s1, s2):
    padded = np.zeros((2 * psi.shape[0],) * 2, dtype=complex)
    padded[: psi.shape[0], : psi.shape[1]] = psi
    a = dft_magnitude(padded, 1)
    b = dft_magnitude(np.roll(padded, (s1, s2), axis=(0, 1)), 1)
    assert np.abs(a - b).max() <= 1e-12 * max(a.max(), 1e-300)


def test_measure_shapes_and_single_shift():
    geom = GridGeometry(8, 4)
    rng = np.random.default_rng(0)
    mu = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    data = measure(np.ones((8, 8)), mu, geom, raster(8, 2), os=2)
    assert data.magnitudes.shape == (16, 8, 8) and data.m == 4
    np.testing.assert_allclose(data.magnitudes[0], dft_magnitude(mu, 2))
    one = measure(np.ones((4, 4)), mu, GridGeometry(4, 4), raster(4, 4), os=2)
    assert len(one) == 1


def test_exit_waves_matches_per_shift():
    rng = np.random.default_rng(1)
    for boundary in ("periodic", "dark", "bright"):
        geom = GridGeometry(8, 4, boundary)
        pat = raster(8, 2)
        f = rng.standard_normal((8, 8)) + 1j
        mu = rng.standard_normal((4, 4)) + 0j
        stack = exit_waves(f, mu, geom, pat)
        for t, psi in zip(pat.shifts, stack):
            np.testing.assert_array_equal(psi, mu * restrict(f, geom, t))


def test_measure_errors():
    geom = GridGeometry(8, 4)
    with pytest.raises(ValueError):
        measure(np.ones((7, 7)), np.ones((4, 4)), geom, raster(8, 2))
    with pytest.raises(ValueError):
        measure(np.ones((8, 8)), np.ones((3, 3)), geom, raster(8, 2))
    with pytest.raises(ValueError):
        measure(np.ones((8, 8)), np.ones((4, 4)), geom, raster(12, 2))


def test_diffraction_set_validation():
    pat = raster(4, 2)
    with pytest.raises(ValueError):
        DiffractionSet(-np.ones((4, 4, 4)), 2, pat)
    with pytest.raises(ValueError):
        DiffractionSet(np.ones((3, 4, 4)), 2, pat)
    with pytest.raises(ValueError):
        DiffractionSet(np.full((4, 4, 4), np.nan), 2, pat)
