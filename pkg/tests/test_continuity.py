"""Path solver: closed forms, manufactured targets, guards, tail estimates."""

import numpy as np
import pytest

from curvgap import Grid, MetricSpec, ParameterError, build_metric
from curvgap.continuity import (
    Schedule,
    assemble_problem,
    estimate_c3,
    run_continuation,
    solve_ma,
)


def _flat(n, N):
    return build_metric(Grid(n, N), MetricSpec.from_dict({"family": "flat"}, n))


def _manufactured(metric, mode, t, phi_star, **kw):
    """Forcing that makes phi_star the exact solution at parameter t."""
    grid = metric.grid
    base = assemble_problem(metric, mode, t=t, **kw)
    w_star = base.chi + grid.ddc(phi_star)
    log_f = (np.log(np.linalg.det(w_star).real) - np.log(metric.det)
             - base.c * phi_star)
    return assemble_problem(metric, mode, t=t, log_forcing=log_f, **kw), base


def quadratic_steps(history, lo=1e-1, floor=1e-11):
    """Count consecutive residual pairs with r_next <= 10 * r**2.

    Only transitions that start below ``lo`` (inside the Newton basin) and
    land above ``floor`` (clear of the linear-solver noise) are scored.
    """
    good = 0
    for r, r_next in zip(history, history[1:]):
        if 0 < r <= lo and r_next >= floor:
            if r_next <= 10.0 * r * r:
                good += 1
            else:
                return good
    return good


# ----------------------------------------------------------------- guards

def test_schedule_validation():
    s = Schedule(1.0, 0.1, 9)
    assert s.initial_step == pytest.approx(0.1)
    with pytest.raises(ParameterError):
        Schedule(0.1, 1.0, 9)
    with pytest.raises(ParameterError):
        Schedule(1.0, 0.0, 9)
    with pytest.raises(ParameterError):
        Schedule(1.0, 0.1, 0)


def test_mode_and_parameter_guards():
    flat = _flat(1, 16)
    with pytest.raises(ParameterError):
        assemble_problem(flat, "thm3", t=1.0)
    with pytest.raises(ParameterError):
        assemble_problem(flat, "thm1", t=0.0)
    with pytest.raises(ParameterError):
        assemble_problem(flat, "thm2", t=1.0, beta=0.0)


def test_degenerate_start_rejected():
    # the walk may not start at or below the degeneracy threshold
    flat = _flat(1, 16)
    with pytest.raises(ParameterError):
        run_continuation(flat, "thm1", Schedule(0.3, 0.1, 2), mu=0.5)


# ----------------------------------------------------------- closed forms

def test_flat_reference_solution_is_zero():
    flat = _flat(1, 64)
    phi, stats = solve_ma(assemble_problem(flat, "thm1", t=1.0))
    assert np.abs(phi).max() <= 1e-12
    assert stats["iterations"] <= 3


def test_flat_path_log_t(flat1_64):
    sched = Schedule(t_start=1.0, t_end=0.1, steps=9)
    path = run_continuation(flat1_64, "thm1", sched, mu=0.0, eta=flat1_64)
    assert path.termination == "reached_t_end"
    assert len(path.samples) == sched.steps + 1
    assert path.ts[0] == pytest.approx(1.0)
    assert path.ts[-1] == pytest.approx(0.1)
    for s in path.samples:
        assert np.abs(s.phi - np.log(s.t)).max() <= 1e-8
        assert abs(s.diagnostics["sup_tr_eta"] - 1.0 / s.t) <= 1e-8
        assert abs(s.diagnostics["int_exp_u"] - s.t) <= 1e-8
        assert np.allclose(s.u, s.phi)


def test_flat_path_tail_estimate(flat1_64):
    sched = Schedule(t_start=1.0, t_end=0.1, steps=9)
    path = run_continuation(flat1_64, "thm1", sched, mu=0.0)
    c3 = estimate_c3(path, t_limit=0.0)
    assert abs(c3.tail_min - 0.1) <= 1e-8
    assert abs(c3.extrapolated) <= 1e-6
    assert c3.tail_size >= 3
    d = c3.to_dict()
    assert set(d) == {"value", "tail_min", "extrapolated", "t_limit",
                      "tail_size"}


def test_flat_two_thirds_exponent(flat1_64):
    sched = Schedule(t_start=1.0, t_end=0.1, steps=9)
    path = run_continuation(flat1_64, "thm2", sched, alpha=1.0, beta=1.0,
                            lam=0.0)
    assert path.c == pytest.approx(1.5, abs=1e-15)
    for s in path.samples:
        assert np.abs(s.phi - (2.0 / 3.0) * np.log(s.t)).max() <= 1e-8


# ---------------------------------------------------- manufactured targets

def test_manufactured_1d(flat1_64):
    grid = flat1_64.grid
    phi_star = 0.1 * np.cos(2 * np.pi * grid.axis_coordinate(0))
    prob, _ = _manufactured(flat1_64, "thm1", 1.0, phi_star)
    phi, stats = solve_ma(prob, tol=1e-11)
    assert np.abs(phi - phi_star).max() <= 1e-8
    assert quadratic_steps(stats["residual_history"]) >= 2

    # a second admissible start lands on the same solution
    phi2, _ = solve_ma(prob, phi_init=0.5 * phi_star, tol=1e-11)
    assert np.abs(phi - phi2).max() <= 1e-10


def test_manufactured_2d():
    grid = Grid(2, 32)
    spec = MetricSpec.from_dict({"family": "kahler_potential", "potential": {
        "terms": [{"c": 0.01, "modes": [1, 0, 0, 0], "kind": "cos"},
                  {"c": 0.008, "modes": [0, 1, 1, 0], "kind": "sin"},
                  {"c": 0.006, "modes": [0, 0, 0, 1], "kind": "cos"}]}}, 2)
    g2 = build_metric(grid, spec)
    phi_star = (0.02 * np.cos(2 * np.pi * grid.axis_coordinate(0))
                + 0.015 * np.sin(2 * np.pi * grid.axis_coordinate(3)))
    prob, base = _manufactured(g2, "thm1", 3.0, phi_star)
    phi, stats = solve_ma(prob, tol=1e-11)
    assert np.abs(phi - phi_star).max() <= 1e-5

    # mass balance: the forced density integrates to the solved volume
    lhs = grid.integrate(np.exp(base.c * phi + prob.log_forcing) * g2.det)
    w = base.chi + grid.ddc(phi)
    rhs = grid.integrate(np.linalg.det(w).real)
    assert abs(lhs - rhs) <= 1e-8


# -------------------------------------------------------------- curved path

def test_perturbed_path_diagnostics(perturbed1):
    # the reference form t*g - Ric is only positive above the top relative
    # eigenvalue of the Ricci form, so anchor the walk there
    from curvgap import chern_curvature, rel_eigvalsh
    curv = chern_curvature(perturbed1)
    t_least = float(rel_eigvalsh(curv.ricci, perturbed1.matrix).max())
    sched = Schedule(t_start=t_least + 2.0, t_end=t_least + 0.5, steps=4)
    path = run_continuation(perturbed1, "thm1", sched, eta=perturbed1,
                            tol=1e-10)
    assert path.termination == "reached_t_end"
    assert len(path.samples) == 5
    sups = [float(s.phi.max()) for s in path.samples]
    assert all(a >= b - 1e-6 for a, b in zip(sups, sups[1:]))
    for s in path.samples:
        assert s.diagnostics["min_eig"] > 0
        assert s.diagnostics["residual"] <= 1e-9
        assert set(s.diagnostics) >= {"sup_u", "min_eig", "sup_tr_eta",
                                      "int_exp_u", "int_exp_cu",
                                      "newton_iters", "residual"}
