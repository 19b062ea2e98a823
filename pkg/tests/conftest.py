"""Shared fixtures: the example corpus and cached geometry builders."""

import numpy as np
import pytest

from curvgap import Grid, MetricSpec, build_metric, chern_curvature

# Each entry: (name, n, N, spec dict, is_kahler).  The direct-family entry is
# Hermitian but deliberately not Kahler, for the comparison-metric role.
CORPUS = [
    ("flat_n1", 1, 32, {"family": "flat"}, True),
    ("flat_n2", 2, 16, {"family": "flat"}, True),
    ("pot_n1_a", 1, 32, {"family": "kahler_potential", "potential": {
        "terms": [{"c": 0.02, "modes": [1, 0], "kind": "cos"},
                  {"c": 0.015, "modes": [0, 1], "kind": "sin"}]}}, True),
    ("pot_n1_b", 1, 32, {"family": "kahler_potential", "potential": {
        "terms": [{"c": 0.001, "modes": [2, 1], "kind": "sin"},
                  {"c": 0.00125, "modes": [1, 1], "kind": "cos"}]}}, True),
    ("pot_n2", 2, 16, {"family": "kahler_potential", "potential": {
        "terms": [{"c": 0.0025, "modes": [1, 0, 0, 0], "kind": "cos"},
                  {"c": 0.002, "modes": [0, 1, 1, 0], "kind": "sin"},
                  {"c": 0.0015, "modes": [0, 0, 0, 1], "kind": "cos"}]}}, True),
    ("conf_n1", 1, 32, {"family": "conformal", "log_conformal": {
        "terms": [{"c": 0.05, "modes": [1, 0], "kind": "cos"},
                  {"c": 0.04, "modes": [1, 1], "kind": "sin"}]}}, True),
    ("direct_n2", 2, 16, {"family": "direct", "components": {
        "0,0": {"re": {"constant": 1.0, "terms": [
            {"c": 0.03, "modes": [0, 0, 1, 0], "kind": "cos"}]}},
        "1,1": {"re": {"constant": 1.0, "terms": [
            {"c": 0.02, "modes": [1, 0, 0, 0], "kind": "sin"}]}},
        "0,1": {"re": {"terms": [{"c": 0.01, "modes": [0, 1, 0, 0],
                                  "kind": "cos"}]},
                "im": {"terms": [{"c": 0.008, "modes": [0, 0, 0, 1],
                                  "kind": "sin"}]}},
    }}, False),
]

CORPUS_IDS = [entry[0] for entry in CORPUS]
KAHLER_CORPUS = [e for e in CORPUS if e[4]]
KAHLER_IDS = [e[0] for e in KAHLER_CORPUS]

_build_cache = {}


def built(name):
    """Build (and memoize) a corpus geometry by name."""
    if name not in _build_cache:
        entry = next(e for e in CORPUS if e[0] == name)
        _, n, N, spec, _ = entry
        _build_cache[name] = build_metric(Grid(n, N), MetricSpec.from_dict(spec, n))
    return _build_cache[name]


_curv_cache = {}


def curvature_of(name):
    if name not in _curv_cache:
        _curv_cache[name] = chern_curvature(built(name))
    return _curv_cache[name]


@pytest.fixture(scope="session")
def flat1():
    return built("flat_n1")


@pytest.fixture(scope="session")
def flat1_64():
    return build_metric(Grid(1, 64), MetricSpec.from_dict({"family": "flat"}, 1))


@pytest.fixture(scope="session")
def perturbed1():
    """n=1 geometry with an honestly negative-curvature well."""
    spec = MetricSpec.from_dict({
        "family": "kahler_potential",
        "potential": {"terms": [{"c": 0.05, "modes": [1, 0], "kind": "cos"},
                                {"c": 0.03, "modes": [0, 1], "kind": "sin"}]},
    }, 1)
    return build_metric(Grid(1, 64), spec)


def space_form(grid, c=1.0):
    """Constant-curvature mock: R[i,j,k,l] = -c d_ij d_kl over a flat metric.

    Every curvature functional takes a closed-form value on it, which makes
    it the reference geometry for optimizer and certifier calibration.
    """
    from curvgap.metrics import CurvatureTensorField
    n = grid.n
    eye = np.eye(n)
    block = -c * np.einsum("ij,kl->ijkl", eye, eye)
    tensor = np.broadcast_to(block, grid.shape + (n,) * 4).astype(complex).copy()
    flat = build_metric(grid, MetricSpec.from_dict({"family": "flat"}, n))
    ricci = np.broadcast_to(-c * n * eye,
                            grid.shape + (n, n)).astype(complex).copy()
    return CurvatureTensorField(grid=grid, metric=flat, tensor=tensor,
                                ricci=ricci)


def random_potential_spec(rng, n, max_mode=2, hessian_budget=0.5):
    """Seeded random Kahler-potential spec with bounded mode content.

    Coefficients are scaled by the mode norm so the total complex Hessian
    stays below ``hessian_budget`` and the metric is safely positive.
    """
    n_terms = 3
    terms = []
    for _ in range(n_terms):
        modes = rng.integers(-max_mode, max_mode + 1, size=2 * n)
        if not modes.any():
            modes[rng.integers(0, 2 * n)] = 1
        mode_norm = float((np.pi ** 2) * (modes.astype(float) ** 2).sum())
        terms.append({
            "c": float(rng.uniform(0.2, 1.0) * hessian_budget
                       / (n_terms * mode_norm)),
            "modes": [int(m) for m in modes],
            "kind": "cos" if rng.integers(0, 2) else "sin",
        })
    return MetricSpec.from_dict(
        {"family": "kahler_potential", "potential": {"terms": terms}}, n)
