"""Hypothesis certifiers: regions, verdicts, margins, bisection."""

import json

import numpy as np
import pytest

from curvgap import (
    Grid,
    MetricSpec,
    ParameterError,
    RegionSpec,
    build_metric,
    certify_delta1_bounded,
    certify_quasi_negative,
    certify_volume_noncollapse,
    chern_curvature,
    find_delta,
    kappa_field,
    max_rbc_field,
)
from conftest import space_form


def _flat(n, N):
    return build_metric(Grid(n, N), MetricSpec.from_dict({"family": "flat"}, n))


def _direct_constant(n, N, value):
    comps = {f"{i},{i}": {"re": {"constant": float(value)}} for i in range(n)}
    spec = MetricSpec.from_dict({"family": "direct", "components": comps}, n)
    return build_metric(Grid(n, N), spec)


# --------------------------------------------------------------------- region

def test_region_validation():
    with pytest.raises(ParameterError):
        RegionSpec((0.5, 0.5), (0.25,))
    with pytest.raises(ParameterError):
        RegionSpec((0.5, 0.5), (0.25, 0.0))
    with pytest.raises(ParameterError):
        RegionSpec((0.5, 0.5), (0.25, 0.5))
    with pytest.raises(ParameterError):
        RegionSpec.from_dict({"center": [0.5]}, 1)


def test_region_from_dict_defaults():
    r = RegionSpec.from_dict({}, 2)
    assert r.center == (0.5,) * 4
    assert r.radii == (0.25,) * 4
    r2 = RegionSpec.from_dict({"radii": 0.1}, 1)
    assert r2.radii == (0.1, 0.1)
    assert RegionSpec.from_dict(r.to_dict(), 2) == r


def test_region_mask_shape_and_degenerate_cases():
    grid = Grid(1, 8)
    mask = RegionSpec((0.5, 0.5), (0.125, 0.125)).mask(grid)
    assert mask.shape == grid.shape
    assert mask.any() and not mask.all()
    # center off the lattice with a tiny radius catches no point at all
    with pytest.raises(ParameterError):
        RegionSpec((0.0625, 0.0625), (0.01, 0.01)).mask(grid)
    # radius below the wrap bound can still swallow every lattice point
    with pytest.raises(ParameterError):
        RegionSpec((0.5625, 0.5625), (0.45, 0.45)).mask(grid)
    with pytest.raises(ParameterError):
        RegionSpec((0.5, 0.5), (0.2, 0.2)).mask(Grid(2, 8))


# ------------------------------------------------------------- quasi-negative

def test_quasi_negative_on_space_form():
    grid = Grid(2, 8)
    curv = space_form(grid, c=1.0)
    ext = max_rbc_field(curv, restarts=6, seed=2)
    region = RegionSpec.from_dict({}, 2)
    rep = certify_quasi_negative(ext, 0.1, 0.5, region, grid)
    assert rep.certified
    assert rep.margins["global"] == pytest.approx(1.1, abs=1e-8)
    assert rep.margins["region"] == pytest.approx(0.5, abs=1e-8)
    assert rep.witnesses == []
    json.dumps(rep.to_dict())

    bad = certify_quasi_negative(ext, 0.1, 1.5, region, grid)
    assert not bad.certified
    assert bad.margins["region"] == pytest.approx(-0.5, abs=1e-8)
    assert bad.witnesses
    assert all(w["constraint"] == "region" for w in bad.witnesses)


def test_quasi_negative_rejects_bad_inputs():
    grid = Grid(1, 8)
    curv = space_form(grid, c=1.0)
    ext = max_rbc_field(curv, restarts=4, seed=0)
    region = RegionSpec.from_dict({}, 1)
    with pytest.raises(ParameterError):
        certify_quasi_negative(ext, 0.0, 0.5, region, grid)
    with pytest.raises(ParameterError):
        certify_quasi_negative(ext, 0.1, -0.5, region, grid)
    with pytest.raises(ParameterError):
        certify_quasi_negative(ext, 0.1, 0.5, region, Grid(1, 16))
    mask = np.zeros(grid.shape, dtype=bool)
    mask[:2, :2] = True
    masked = max_rbc_field(curv, restarts=4, seed=0, mask=mask)
    with pytest.raises(ParameterError):
        certify_quasi_negative(masked, 0.1, 0.5, region, grid)


def test_flat_field_never_region_negative(flat1):
    grid = flat1.grid
    ext = kappa_field(chern_curvature(flat1), restarts=4, seed=0)
    region = RegionSpec.from_dict({}, 1)
    rep = certify_quasi_negative(ext, 0.1, 0.01, region, grid)
    assert not rep.certified
    assert rep.margins["global"] == pytest.approx(0.1, abs=1e-10)


# ------------------------------------------------------- metric domination

def test_delta1_equality_is_sharp():
    omega = _flat(1, 16)
    rep = certify_delta1_bounded(omega, omega, None, 1.0)
    assert rep.certified
    assert rep.margins["primary"] == pytest.approx(0.0, abs=1e-12)
    assert rep.margins["scaled_form"] == pytest.approx(0.0, abs=1e-12)


def test_delta1_scaling_and_failure():
    omega = _flat(1, 16)
    eta = _direct_constant(1, 16, 2.0)
    rep = certify_delta1_bounded(eta, omega, None, 2.0)
    assert rep.certified
    assert rep.margins["primary"] == pytest.approx(0.0, abs=1e-12)

    loose = certify_delta1_bounded(omega, omega, None, 2.0)
    assert loose.margins["primary"] == pytest.approx(1.0, abs=1e-12)
    assert loose.margins["scaled_form"] == pytest.approx(0.5, abs=1e-12)

    bad = certify_delta1_bounded(eta, omega, None, 1.0)
    assert not bad.certified
    assert bad.margins["primary"] == pytest.approx(-1.0, abs=1e-12)
    assert bad.witnesses and bad.witnesses[0]["constraint"] == \
        "min relative eigenvalue"


def test_delta1_psi_shift_invariance():
    grid = Grid(1, 32)
    omega = _flat(1, 32)
    x = grid.axis_coordinate(0)
    psi = 0.01 * np.cos(2 * np.pi * x)
    rep = certify_delta1_bounded(omega, omega, psi, 1.0)
    shifted = certify_delta1_bounded(omega, omega, psi + 5.0, 1.0)
    # a single Fourier mode differentiates exactly, so the closed form
    # min ddc(psi) = -pi^2 * amplitude is hit to rounding
    assert rep.margins["primary"] == pytest.approx(-0.01 * np.pi ** 2,
                                                   abs=1e-12)
    assert shifted.margins["primary"] == pytest.approx(
        rep.margins["primary"], abs=1e-12)
    assert shifted.margins["sup_psi_before_shift"] == pytest.approx(5.01)
    with pytest.raises(ParameterError):
        certify_delta1_bounded(omega, omega, np.zeros((4, 4)), 1.0)
    with pytest.raises(ParameterError):
        certify_delta1_bounded(omega, _flat(1, 16), None, 1.0)
    with pytest.raises(ParameterError):
        certify_delta1_bounded(omega, omega, None, 0.0)


# ------------------------------------------------------------ volume ratio

def test_volume_noncollapse():
    omega = _flat(1, 16)
    eta = _direct_constant(1, 16, 2.0)
    region = RegionSpec.from_dict({}, 1)
    rep = certify_volume_noncollapse(eta, omega, 1.0, region)
    assert rep.certified
    assert rep.margins["region"] == pytest.approx(1.0, abs=1e-12)
    bad = certify_volume_noncollapse(eta, omega, 3.0, region)
    assert not bad.certified
    assert bad.witnesses and bad.witnesses[0]["constraint"] == "volume ratio"
    with pytest.raises(ParameterError):
        certify_volume_noncollapse(eta, omega, -1.0, region)


def test_volume_equality_is_sharp():
    omega = _flat(2, 8)
    region = RegionSpec.from_dict({}, 2)
    rep = certify_volume_noncollapse(omega, omega, 1.0, region)
    assert rep.certified
    assert rep.margins["region"] == pytest.approx(0.0, abs=1e-12)


# -------------------------------------------------------------- find_delta

def test_find_delta_flat_is_zero(flat1):
    ext = kappa_field(chern_curvature(flat1), restarts=4, seed=0)
    region = RegionSpec.from_dict({}, 1)
    assert find_delta(ext, 0.1, region, flat1.grid) == 0.0


def test_find_delta_space_form_unit():
    grid = Grid(2, 8)
    curv = space_form(grid, c=1.0)
    ext = max_rbc_field(curv, restarts=6, seed=2)
    region = RegionSpec.from_dict({}, 2)
    got = find_delta(ext, 0.1, region, grid, tol=1e-4)
    assert got == pytest.approx(1.0, abs=2e-4)
    with pytest.raises(ParameterError):
        find_delta(ext, 0.1, region, grid, tol=0.0)
