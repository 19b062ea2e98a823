"""Inequality audit: closed forms, a curved path end to end, controls."""

import dataclasses
import json
import math

import numpy as np
import pytest

from curvgap import Grid, MetricSpec, build_metric, chern_curvature
from curvgap import audit as A
from curvgap.certify import RegionSpec, certify_quasi_negative
from curvgap.continuity import Schedule, estimate_c3, run_continuation
from curvgap.functionals import kappa_field, mu_eta, tau_field


def _flat(n, N):
    return build_metric(Grid(n, N), MetricSpec.from_dict({"family": "flat"}, n))


@pytest.fixture(scope="module")
def flat_path():
    flat = _flat(1, 64)
    sched = Schedule(t_start=1.0, t_end=0.1, steps=9)
    path = run_continuation(flat, "thm1", sched, delta1=1.0, mu=0.0, tol=1e-11)
    assert path.termination == "reached_t_end"
    return flat, path, A.prepare_states(flat, path)


@pytest.fixture(scope="module")
def pert_ctx(perturbed1):
    """Curved n=1 geometry with its extremal field, region, and solved path."""
    pert = perturbed1
    curv = chern_curvature(pert)
    kf = kappa_field(curv, restarts=24, seed=3)
    mu = mu_eta(kf)
    kmin = np.unravel_index(np.argmin(kf.weighted_field),
                            kf.weighted_field.shape)
    region = RegionSpec.from_dict(
        {"center": [i / 64 for i in kmin], "radii": 0.08}, 1)
    kreg_max = float(kf.weighted_field[region.mask(pert.grid)].max())
    assert kreg_max < 0
    delta = -0.5 * kreg_max
    t0 = max(mu, 0.0)
    sched = Schedule(t_start=t0 + 2.0, t_end=t0 + 0.25, steps=7)
    path = run_continuation(pert, "thm1", sched, delta1=1.0, mu=mu, tol=1e-11)
    assert path.termination == "reached_t_end"
    b0 = A.compute_b0(pert)
    c1 = A.compute_c1_probe(pert, region, 1.0, b0, family_size=10, seed=0)
    c2 = A.compute_c2(pert, "thm1", c0=1.0)
    return dict(pert=pert, kf=kf, mu=mu, region=region, delta=delta,
                path=path, states=A.prepare_states(pert, path), b0=b0,
                c1=c1, c2=c2)


# ------------------------------------------------------------ pointwise bound

def test_schwarz_flat_closed_forms():
    g = _flat(1, 32)
    rec = A.check_schwarz(g, g, 1.0, 1.0, 0.0)
    assert rec.passed and not rec.vacuous
    assert rec.margin == pytest.approx(0.0, abs=1e-10)
    assert rec.details["hypothesis_margin"] == pytest.approx(0.0, abs=1e-10)

    assert A.check_schwarz(g, g, 1.0, 0.5, 0.0).margin == pytest.approx(
        0.5, abs=1e-10)

    vac = A.check_schwarz(g, g, 1.0, 1.5, 0.0)
    assert vac.vacuous and vac.passed

    lie = A.check_schwarz(g, g, 1.0, 0.5, -1.0)
    assert not lie.passed and lie.margin < -0.01


# ------------------------------------------------------------- path bounds

def test_trace_bound_flat_equality(flat_path):
    flat, path, states = flat_path
    recs = A.check_trace_bound(flat, path, 1.0, 0.0, states=states)
    assert max(abs(r.margin) for r in recs) < 1e-8
    assert all(r.passed and not r.vacuous for r in recs)


def test_trace_bound_slack_and_controls(flat_path):
    flat, path, states = flat_path
    half = 0.5 * flat.matrix
    recs = A.check_trace_bound(flat, path, 1.0, 0.0, eta=half, states=states)
    assert all(r.margin > 0.4 for r in recs)

    shrunk = A.check_trace_bound(flat, path, 0.5, 0.0, states=states)
    assert all(not r.passed for r in shrunk)

    ranged = A.check_trace_bound(flat, path, 1.0, 0.5, states=states)
    vac = [s.t for s, r in zip(path.samples, ranged) if r.vacuous]
    assert vac and all(t <= 0.5 for t in vac)


def test_sup_bound_flat_sharp_and_window(flat_path):
    flat, path, states = flat_path
    recs = A.check_sup_ut(flat, path, 1.0, 0.45, 0.0, 1.0, states=states)
    assert all(r.passed and not r.vacuous for r in recs)
    assert max(abs(r.details["sharp_margin"]) for r in recs) < 1e-8
    windowed = [(s.t, r.details["window_margin"])
                for s, r in zip(path.samples, recs)
                if "window_margin" in r.details]
    assert len(windowed) > 2
    for t, m in windowed:
        assert t <= 0.9 + 1e-5
        assert m == pytest.approx(math.log(0.9) - math.log(t), abs=1e-9)


def test_sup_bound_rejects_shifted_potential(flat_path):
    flat, path, _ = flat_path
    bad_samples = [dataclasses.replace(s, u=s.u + 1.0) for s in path.samples]
    bad = dataclasses.replace(path, samples=bad_samples)
    recs = A.check_sup_ut(flat, bad, 1.0, 0.45, 0.0, 1.0)
    assert any(not r.passed for r in recs)


# ------------------------------------------------------------ integral chain

def test_chain_flat_structure(flat_path):
    flat, path, states = flat_path
    region = RegionSpec.from_dict({"center": [0.5, 0.5], "radii": 0.2}, 1)
    kappa0 = np.zeros(flat.grid.shape)
    for st in states:
        recs = A.check_integral_lemma(flat, st.sample, kappa0, region,
                                      mode="thm1", delta1=1.0, state=st,
                                      delta=0.1, delta2=1.0, c1=0.1, c2=1.0)
        by = {r.name.split("[")[0]: r for r in recs}
        assert abs(by["chain.divergence"].details["integral"]) <= 1e-8
        assert abs(by["chain.integrated"].margin) < 1e-9
        assert by["chain.amgm"].margin > -1e-12
        assert by["chain.substitution"].passed
        # a zero field is nowhere below -delta, so the region links idle
        assert by["chain.numerator"].vacuous
        assert by["chain.fraction"].vacuous
        assert by["chain.final"].vacuous
        assert abs(by["chain.denominator"].margin) < 1e-9
        assert by["chain.composite"].passed


def test_chain_curved_no_failures(pert_ctx):
    ctx = pert_ctx
    families = {}
    for st in ctx["states"]:
        rec = A.check_schwarz(st.w, ctx["pert"], 1.0, st.t, ctx["mu"],
                              kappa=ctx["kf"].weighted_field,
                              grid=ctx["pert"].grid,
                              name=f"schwarz[{st.t:.3g}]")
        families.setdefault("schwarz", []).append(rec)
        recs = A.check_integral_lemma(
            ctx["pert"], st.sample, ctx["kf"].weighted_field, ctx["region"],
            mode="thm1", delta1=1.0, state=st, delta=ctx["delta"],
            delta2=1.0, c1=ctx["c1"], c2=ctx["c2"])
        for r in recs:
            families.setdefault(r.name.split("[")[0], []).append(r)
    families["trace_bound"] = A.check_trace_bound(
        ctx["pert"], ctx["path"], 1.0, ctx["mu"], states=ctx["states"])
    families["sup_bound"] = A.check_sup_ut(
        ctx["pert"], ctx["path"], 1.0, 0.45, ctx["b0"], 1.0,
        states=ctx["states"])

    failed = [r for rs in families.values() for r in rs if not r.passed]
    assert failed == []
    assert max(abs(r.details["integral"])
               for r in families["chain.divergence"]) <= 1e-8
    assert min(r.margin for r in families["chain.amgm"]) >= -1e-10
    # the region really contributes: numerator and final links all engage
    n_states = len(ctx["states"])
    assert sum(not r.vacuous for r in families["chain.numerator"]) == n_states
    assert sum(not r.vacuous for r in families["chain.final"]) == n_states

    c3 = estimate_c3(ctx["path"], max(ctx["mu"], 0.0))
    assert c3.tail_min > 0


def test_chain_detects_corrupted_potential(pert_ctx):
    ctx = pert_ctx
    sample = ctx["path"].samples[2]
    bad_phi = sample.phi + 0.01 * np.sin(
        2 * np.pi * ctx["pert"].grid.axis_coordinate(0))
    bad = dataclasses.replace(sample, phi=bad_phi)
    recs = A.check_integral_lemma(
        ctx["pert"], bad, ctx["kf"].weighted_field, ctx["region"],
        mode="thm1", delta1=1.0, delta=ctx["delta"], delta2=1.0,
        c1=ctx["c1"], c2=ctx["c2"])
    by = {r.name.split("[")[0]: r for r in recs}
    assert not by["chain.substitution"].passed
    assert not by["chain.composite"].passed
    assert by["chain.composite"].details["first_broken"] is not None


def test_schwarz_detects_understated_level(pert_ctx):
    ctx = pert_ctx
    st = ctx["states"][0]
    rec = A.check_schwarz(st.w, ctx["pert"], 1.0, st.t, -1.0,
                          grid=ctx["pert"].grid)
    assert not rec.passed


# --------------------------------------------------------------- second mode

@pytest.fixture(scope="module")
def thm2_flat():
    flat = _flat(1, 32)
    sched = Schedule(t_start=1.0, t_end=0.3, steps=7)
    path = run_continuation(flat, "thm2", sched, alpha=1.0, beta=1.0,
                            lam=0.0, tol=1e-11)
    return flat, path, A.prepare_states(flat, path)


def test_thm2_differential_flat(thm2_flat):
    flat, path, states = thm2_flat
    tau = tau_field(chern_curvature(flat), 1.0, 1.0, restarts=8, seed=1)
    for st in states:
        rec = A.check_thm2_differential(flat, st.sample, alpha=1.0, beta=1.0,
                                        lam=0.0, tau=tau.weighted_field,
                                        state=st)
        assert rec.passed
        assert rec.details["global_margin_nonneg"] == pytest.approx(
            1.0, abs=1e-8)


def test_thm2_chain_flat(thm2_flat):
    flat, path, states = thm2_flat
    region = RegionSpec.from_dict({"center": [0.5, 0.5], "radii": 0.2}, 1)
    zero = np.zeros(flat.grid.shape)
    for st in states:
        recs = A.check_integral_lemma(flat, st.sample, zero, region,
                                      mode="thm2", alpha=1.0, beta=1.0,
                                      state=st, delta=0.05, c1=0.1, c2=1.0)
        by = {r.name.split("[")[0]: r for r in recs}
        assert by["chain.divergence"].passed
        assert by["chain.integrated"].margin > 0
        assert by["chain.substitution"].passed
        assert by["chain.composite"].passed


# ------------------------------------------------------------------ constants

def test_c4_closed_forms(pert_ctx):
    c4 = A.compute_c4(_flat(2, 16), 1.0, 0.1, mode="thm1", full=True)
    assert c4["c4"] == pytest.approx((2 * 2 * 1.0) ** 2 * 0.1, abs=1e-10)

    assert A.compute_c4(_flat(1, 32), 1.0, 0.37) == pytest.approx(
        2.0, abs=1e-12)

    c4p = A.compute_c4(pert_ctx["pert"], 1.0, 1e-9, full=True)
    assert c4p["c4"] == pytest.approx(
        2.0 * c4p["mixed_integrals"]["1"], abs=1e-6)


def test_c1_probe_properties(pert_ctx):
    ctx = pert_ctx
    pert, region, b0 = ctx["pert"], ctx["region"], ctx["b0"]
    vol_u = float(pert.grid.integrate(
        np.where(region.mask(pert.grid), pert.det, 0.0)))
    full = A.compute_c1_probe(pert, region, 1.0, b0, family_size=10, seed=0,
                              full=True)
    assert full["candidates"]["zero"] == pytest.approx(vol_u, abs=1e-12)
    assert full["c1"] <= vol_u + 1e-15
    small = A.compute_c1_probe(pert, region, 1.0, b0, family_size=4, seed=0)
    assert full["c1"] <= small + 1e-15


def test_alpha_probe_floor():
    ap = A.alpha_probe(_flat(1, 32), 1.0, beta_exp=2.0, family_size=6,
                       seed=0, full=True)
    assert ap["bound"] >= 1.0 - 1e-12


def test_neg_ricci_volume_vanishes(pert_ctx):
    assert abs(A.neg_ricci_volume(_flat(1, 32))) < 1e-15
    assert abs(A.neg_ricci_volume(pert_ctx["pert"])) < 1e-8


# ----------------------------------------------------------------- gap report

def test_gap_report_behaviors(pert_ctx):
    ctx = pert_ctx
    pert, kf, region, path = ctx["pert"], ctx["kf"], ctx["region"], ctx["path"]
    eps = 0.05
    hyp = {"quasi_negative": certify_quasi_negative(
        kf, eps, ctx["delta"], region, pert.grid)}
    consts = A.compute_constants(pert, "thm1", region=region, eps=eps,
                                 c0=1.0, delta1=1.0, path=path, seed=0)
    rep = A.gap_report(pert, path, hyp, consts, eps)
    assert rep.gap["consistent"]
    assert rep.checks[0].passed
    assert rep.constants["c3"] is not None
    json.dumps(rep.to_dict())

    # every hypothesis certified, eps below threshold, flat volume: the
    # combination is contradictory and must blow up rather than report
    class AlwaysCertified:
        certified = True

    with pytest.raises(AssertionError):
        A.gap_report(pert, path, {"qn": AlwaysCertified()}, consts, 1e-12)

    # with an asserted nonzero volume there is no contradiction to detect
    consts2 = dict(consts)
    consts2["int_neg_ricci_n"] = 1.0
    rep2 = A.gap_report(pert, path, {"qn": AlwaysCertified()}, consts2, 1e-12)
    assert rep2.checks[0].vacuous
    assert rep2.gap["all_certified"]
