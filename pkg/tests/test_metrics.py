"""Metric families, curvature assembly, and mixed integrals."""

import math

import numpy as np
import pytest

from curvgap import (
    Grid,
    MetricSpec,
    NotPositiveDefinite,
    ParameterError,
    TrigExpr,
    TrigTerm,
    build_metric,
    chern_curvature,
    curvature_at_points,
    mixed_density,
    mixed_top_integral,
    rel_eigvalsh,
)
from conftest import CORPUS, CORPUS_IDS, KAHLER_IDS, built, curvature_of, \
    random_potential_spec


# ---------------------------------------------------------------- expressions

def test_trig_expr_roundtrip_and_eval():
    expr = TrigExpr((TrigTerm(0.3, (1, -2), "sin"), TrigTerm(1.1, (0, 1), "cos")),
                    constant=0.7)
    again = TrigExpr.from_dict(expr.to_dict(), 2)
    assert again == expr
    pts = np.array([[0.1, 0.2], [0.75, 0.5]])
    vals = expr.evaluate(pts)
    by_hand = (0.3 * np.sin(2 * np.pi * (pts[:, 0] - 2 * pts[:, 1]))
               + 1.1 * np.cos(2 * np.pi * pts[:, 1]) + 0.7)
    assert np.allclose(vals, by_hand, atol=1e-14)


def test_trig_expr_on_grid_matches_pointwise():
    grid = Grid(1, 16)
    expr = TrigExpr((TrigTerm(0.4, (2, 1), "cos"),), 0.0)
    field = expr.on_grid(grid)
    x = grid.axis_coordinate(0)
    y = grid.axis_coordinate(1)
    assert np.allclose(field, 0.4 * np.cos(2 * np.pi * (2 * x + y)), atol=1e-14)


def test_trig_expr_mode_length_checked():
    with pytest.raises(ParameterError):
        TrigExpr.from_dict({"terms": [{"c": 1.0, "modes": [1, 0, 0]}]}, 2)


# ---------------------------------------------------------------- families

def test_flat_family():
    g = built("flat_n1")
    assert np.allclose(g.matrix[..., 0, 0], 1.0)
    assert np.allclose(g.det, 1.0)


def test_kahler_potential_builds_positive():
    g = built("pot_n2")
    assert g.det.min() > 0
    eigs = rel_eigvalsh(g.matrix, np.broadcast_to(np.eye(2), g.matrix.shape))
    assert eigs.min() > 0


def test_too_large_potential_rejected():
    spec = MetricSpec.from_dict({"family": "kahler_potential", "potential": {
        "terms": [{"c": 5.0, "modes": [1, 0], "kind": "cos"}]}}, 1)
    with pytest.raises(NotPositiveDefinite) as err:
        build_metric(Grid(1, 32), spec)
    assert err.value.point is not None
    assert err.value.eigenvalue is not None


def test_conformal_family_is_scaling():
    g = built("conf_n1")
    ratio = g.matrix[..., 0, 0].real
    assert np.allclose(g.det, ratio, atol=1e-14)


def test_direct_family_hermitian():
    g = built("direct_n2")
    assert np.abs(g.matrix - np.conj(np.swapaxes(g.matrix, -1, -2))).max() < 1e-14
    assert g.det.min() > 0


def test_metric_spec_family_checked():
    with pytest.raises(ParameterError):
        MetricSpec.from_dict({"family": "nope"}, 1)
    # an omitted potential is the zero potential: the build degenerates to flat
    spec = MetricSpec.from_dict({"family": "kahler_potential"}, 1)
    g = build_metric(Grid(1, 16), spec)
    assert np.allclose(g.matrix[..., 0, 0], 1.0, atol=1e-14)


# ---------------------------------------------------------------- curvature

def test_flat_curvature_vanishes():
    curv = curvature_of("flat_n2")
    assert np.abs(curv.tensor).max() <= 1e-12
    assert np.abs(curv.ricci).max() <= 1e-12


def test_n1_conformal_closed_form():
    # g = e^u on one complex dimension: R_{1 1bar 1 1bar} = -e^u * u_{z zbar}
    g = built("conf_n1")
    grid = g.grid
    u = np.log(g.matrix[..., 0, 0].real)
    expect = -(g.matrix[..., 0, 0].real) * grid.ddc(u)[..., 0, 0].real
    got = curvature_of("conf_n1").tensor[..., 0, 0, 0, 0].real
    assert np.abs(got - expect).max() < 1e-9


@pytest.mark.parametrize("seed", [0, 1])
@pytest.mark.parametrize("n", [1, 2])
def test_curvature_matches_fd_oracle(seed, n):
    rng = np.random.default_rng(100 + seed)
    spec = random_potential_spec(rng, n)
    grid = Grid(n, 32)
    g = build_metric(grid, spec)
    curv = chern_curvature(g)
    idx = tuple(rng.integers(0, 32, size=2 * n))
    pt = np.array([grid.point_coords(idx)])
    oracle = curvature_at_points(spec, n, pt)[0]
    got = curv.tensor[idx]
    scale = max(np.abs(oracle).max(), 1e-3)
    assert np.abs(got - oracle).max() / scale < 1e-6


@pytest.mark.parametrize("name", KAHLER_IDS)
def test_kahler_symmetries(name):
    curv = curvature_of(name)
    tensor = curv.tensor
    assert np.abs(tensor - np.swapaxes(np.swapaxes(tensor, -4, -2), -4, -2)
                  ).max() < 1e-9  # identity sanity (no-op swap twice)
    swap_unbarred = np.swapaxes(tensor, -4, -2)
    swap_barred = np.swapaxes(tensor, -3, -1)
    assert np.abs(tensor - swap_unbarred).max() < 1e-9
    assert np.abs(tensor - swap_barred).max() < 1e-9


@pytest.mark.parametrize("name", KAHLER_IDS)
def test_ricci_is_curvature_trace(name):
    g = built(name)
    curv = curvature_of(name)
    inv = g.inverse
    # g^{i jbar} contraction over the bundle pair, realized as inv[j,i]
    traced = np.einsum("...ji,...ijkl->...kl", inv, curv.tensor)
    assert np.abs(traced - curv.ricci).max() < 1e-9


@pytest.mark.parametrize("name", CORPUS_IDS)
def test_ricci_form_integrates_to_zero(name):
    g = built(name)
    curv = curvature_of(name)
    n = g.grid.n
    dens = np.linalg.det(-curv.ricci).real if n > 1 else -curv.ricci[..., 0, 0].real
    assert abs(g.grid.integrate(dens)) <= 1e-8


# ---------------------------------------------------------------- mixed forms

def test_mixed_density_binomial_expansion():
    rng = np.random.default_rng(3)
    n = 2
    raw_a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    a = raw_a @ raw_a.conj().T + n * np.eye(n)
    raw_b = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    b = raw_b @ raw_b.conj().T
    total = sum(math.comb(n, k) * mixed_density(a, b, k, n) for k in range(n + 1))
    assert abs(total - np.linalg.det(a + b).real) < 1e-10


def test_mixed_density_identity_pair():
    # det(s I + I) = (s + 1)^2 at n = 2: every mixed coefficient is 1
    eye = np.eye(2, dtype=complex)
    for k in range(3):
        assert mixed_density(eye, eye, k, 2) == pytest.approx(1.0)


def test_mixed_top_integral_symmetry_and_zero():
    g = built("pot_n2")
    grid = g.grid
    curv = curvature_of("pot_n2")
    a = g.matrix
    b = -curv.ricci
    for k in range(3):
        s1 = mixed_top_integral(grid, a, b, k)
        s2 = mixed_top_integral(grid, b, a, 2 - k)
        assert abs(s1 - s2) < 1e-12
    # B = 0 and k < n gives no top form
    assert mixed_top_integral(grid, a, np.zeros_like(a), 1) == pytest.approx(0.0)
    # -Ric wedged to any positive power integrates to zero by exactness
    assert abs(mixed_top_integral(grid, a, b, 0)) < 1e-8


def test_rel_eigvalsh_matches_dense_pencil():
    rng = np.random.default_rng(11)
    raw = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    bmat = raw @ raw.conj().T + 2 * np.eye(2)
    raw2 = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    amat = 0.5 * (raw2 + raw2.conj().T)
    from scipy.linalg import eigvalsh
    expect = eigvalsh(amat, bmat)
    got = rel_eigvalsh(amat[None], bmat[None])[0]
    assert np.allclose(got, expect, atol=1e-12)
