"""Spectral grid operations against closed forms."""

import numpy as np
import pytest

from curvgap import Grid, ParameterError


def test_grid_validation():
    with pytest.raises(ParameterError):
        Grid(0, 16)
    with pytest.raises(ParameterError):
        Grid(4, 16)
    with pytest.raises(ParameterError):
        Grid(1, 12)  # not a power of two
    with pytest.raises(ParameterError):
        Grid(1, 4)   # below the minimum


def test_axis_coordinate_range():
    grid = Grid(2, 16)
    for ax in range(4):
        c = grid.axis_coordinate(ax)
        assert c.min() == 0.0
        assert c.max() == pytest.approx(15.0 / 16.0)


def test_integrate_is_mean():
    grid = Grid(1, 32)
    x = grid.axis_coordinate(0)
    assert grid.integrate(np.ones(grid.shape)) == pytest.approx(1.0)
    # mean of cos over full periods vanishes
    assert abs(grid.integrate(np.cos(2 * np.pi * x))) < 1e-15


def test_ddc_of_band_limited_function_is_exact():
    grid = Grid(1, 32)
    x = grid.axis_coordinate(0)
    y = grid.axis_coordinate(1)
    f = np.cos(2 * np.pi * (2 * x + y))
    h = grid.ddc(f)
    # dz = (dx - i dy)/2, dzbar conjugate; for f = cos(2 pi (2x + y)):
    # d^2 f/dz dzbar = (1/4)(f_xx + f_yy) = -(1/4)(2 pi)^2 (4 + 1) f
    expect = -(np.pi ** 2) * 5.0 * f / 1.0
    assert np.abs(h[..., 0, 0] - (0.25 * (-(2 * np.pi) ** 2) * 5 * f)).max() < 1e-10
    assert np.abs(h[..., 0, 0] - expect * 1.0).max() < 1e-10


def test_ddc_hermitian_and_mean_zero():
    grid = Grid(2, 16)
    rng = np.random.default_rng(5)
    coeffs = rng.standard_normal((4, 4, 4, 4))
    axes = [grid.axis_coordinate(a) for a in range(4)]
    f = sum(coeffs[i, j, k, l] *
            np.cos(2 * np.pi * (i * axes[0] + j * axes[1]
                                + k * axes[2] + l * axes[3]))
            for i in range(3) for j in range(3) for k in range(3) for l in range(3))
    h = grid.ddc(f)
    assert np.abs(h - np.conj(np.swapaxes(h, -1, -2))).max() < 1e-12
    for i in range(2):
        for j in range(2):
            assert abs(h[..., i, j].mean()) < 1e-13


def test_integration_by_parts_exact():
    # the divergence-type cancellations in the audit rely on this being
    # exact to rounding, not merely to truncation order
    grid = Grid(1, 16)
    x = grid.axis_coordinate(0)
    y = grid.axis_coordinate(1)
    f = np.exp(np.sin(2 * np.pi * x))          # deliberately not band-limited
    g = np.cos(2 * np.pi * y) + 0.3 * np.sin(2 * np.pi * x)
    lhs = grid.integrate((grid.ddc(f)[..., 0, 0] * g).real)
    rhs = grid.integrate((f * grid.ddc(g)[..., 0, 0]).real)
    assert abs(lhs - rhs) < 1e-13


def test_nyquist_mode_first_derivative_multiplier_is_zero():
    grid = Grid(1, 16)
    sigma, tau = grid.deriv_symbols()
    # index 8 is the unpaired highest mode on a 16-point axis; the exact
    # derivative of the symmetric interpolant vanishes there
    assert sigma[0].ravel()[8] == 0.0
    assert tau[0].ravel()[8] == 0.0


def test_point_coords_roundtrip():
    grid = Grid(2, 8)
    idx = (1, 2, 3, 4)
    pt = grid.point_coords(idx)
    assert np.allclose(pt, np.array(idx) / 8.0)
