"""Scratch validation for audit.py against closed forms and oracles."""

import math
import numpy as np

from curvgap import Grid, MetricSpec, build_metric, chern_curvature
from curvgap.certify import RegionSpec, certify_quasi_negative
from curvgap.continuity import Schedule, run_continuation, estimate_c3
from curvgap.functionals import kappa_field, mu_eta, tau_field, lambda_max
from curvgap import audit as A

ok = lambda name, cond: print(("PASS " if cond else "FAIL ") + name) or (cond or (_ for _ in ()).throw(AssertionError(name)))


def flat_metric(n, N):
    return build_metric(Grid(n, N), MetricSpec.from_dict({"family": "flat"}, n))


# ---------------------------------------------------------------- schwarz
g1 = flat_metric(1, 32)
rec = A.check_schwarz(g1, g1, 1.0, 1.0, 0.0)  # t = delta1 = 1
ok("schwarz flat equality", abs(rec.margin) < 1e-10 and rec.passed and not rec.vacuous)
ok("schwarz hyp tight", abs(rec.details["hypothesis_margin"]) < 1e-10)

rec = A.check_schwarz(g1, g1, 1.0, 0.5, 0.0)  # t = 0.5 < delta1
ok("schwarz flat strict", abs(rec.margin - 0.5) < 1e-10)

rec = A.check_schwarz(g1, g1, 1.0, 1.5, 0.0)  # t > delta1: hypothesis fails
ok("schwarz vacuous when hyp fails", rec.vacuous and rec.passed)

rec = A.check_schwarz(g1, g1, 1.0, 0.5, -1.0)  # lying mu -> fail
ok("schwarz negative control", not rec.passed and rec.margin < -0.01)

# ---------------------------------------------------------------- flat thm1 path
n, N = 1, 64
flat = flat_metric(n, N)
sched = Schedule(t_start=1.0, t_end=0.1, steps=9)
path = run_continuation(flat, "thm1", sched, delta1=1.0, mu=0.0, tol=1e-11)
ok("flat path solved", path.termination == "reached_t_end" and len(path.samples) == 10)
states = A.prepare_states(flat, path)

recs = A.check_trace_bound(flat, path, 1.0, 0.0, states=states)
margins = [r.margin for r in recs]
ok("trace bound equality on flat", max(abs(m) for m in margins) < 1e-8)

half = 0.5 * flat.matrix
recs = A.check_trace_bound(flat, path, 1.0, 0.0, eta=half, states=states)
ok("trace bound strict for eta/2", all(r.margin > 0.4 for r in recs))

recs = A.check_trace_bound(flat, path, 0.5, 0.0, states=states)  # shrunken delta1
ok("trace bound negative control", all(not r.passed for r in recs))

# out-of-range exclusion
recs = A.check_trace_bound(flat, path, 1.0, 0.5, states=states)
vac = [r for r in recs if r.vacuous]
ok("trace bound out-of-range exclusion", all(s.t <= 0.5 for s, r in zip(path.samples, recs) if r.vacuous) and vac)

# sup bound: u_t = log t, b0 = 0, eps = 0.45 -> window 0.9
recs = A.check_sup_ut(flat, path, 1.0, 0.45, 0.0, 1.0, states=states)
ok("sup bound all pass", all(r.passed and not r.vacuous for r in recs))
sharp = [r.details["sharp_margin"] for r in recs]
ok("sup bound sharp equality", max(abs(m) for m in sharp) < 1e-8)
win = [r for r in recs if "window_margin" in r.details]
ok("sup bound window only below 0.9", all(s.t <= 0.9 + 1e-5 for s, r in zip(path.samples, recs) if "window_margin" in r.details) and len(win) > 2)
for s, r in zip(path.samples, recs):
    if "window_margin" in r.details:
        expect = math.log(0.9) - math.log(s.t)
        assert abs(r.details["window_margin"] - expect) < 1e-9, (s.t, r.details)
print("PASS sup bound window values match closed form")

# negative control: corrupted u
import copy
bad = copy.deepcopy(path)
for s in bad.samples:
    s.u = s.u + 1.0
bad_states = A.prepare_states(flat, bad)
for st, s in zip(bad_states, bad.samples):
    st.sample.u = s.u
recs = A.check_sup_ut(flat, bad, 1.0, 0.45, 0.0, 1.0, states=bad_states)
ok("sup bound negative control", any(not r.passed for r in recs))

# ---------------------------------------------------------------- integral chain, flat
region = RegionSpec.from_dict({"center": [0.5, 0.5], "radii": 0.2}, n)
kappa0 = np.zeros(flat.grid.shape)
for st in states:
    recs = A.check_integral_lemma(flat, st.sample, kappa0, region,
                                  mode="thm1", delta1=1.0, state=st,
                                  delta=0.1, delta2=1.0, c1=0.1, c2=1.0)
    by = {r.name.split("[")[0]: r for r in recs}
    assert by["chain.divergence"].margin > -1e-8, by["chain.divergence"]
    assert abs(by["chain.integrated"].margin) < 1e-9
    assert by["chain.amgm"].margin > -1e-12
    assert by["chain.substitution"].passed
    assert by["chain.numerator"].vacuous  # kappa = 0 not below -delta
    assert by["chain.fraction"].vacuous
    assert by["chain.final"].vacuous
    assert abs(by["chain.denominator"].margin) < 1e-9  # c2 = vol = 1 equality
    assert by["chain.composite"].passed
print("PASS integral chain flat thm1 per-sample structure")

# ---------------------------------------------------------------- perturbed n=1
spec = MetricSpec.from_dict({
    "family": "kahler_potential",
    "potential": {"terms": [{"c": 0.05, "modes": [1, 0], "kind": "cos"},
                            {"c": 0.03, "modes": [0, 1], "kind": "sin"}]},
}, 1)
pert = build_metric(Grid(1, 64), spec)
curv = chern_curvature(pert)
kf = kappa_field(curv, restarts=24, seed=3)
mu = mu_eta(kf)
print("  n=1 perturbed: kappa range", kf.weighted_field.min(), kf.weighted_field.max(), "mu", mu)
kmin_idx = np.unravel_index(np.argmin(kf.weighted_field), kf.weighted_field.shape)
center = [i / 64 for i in kmin_idx]
reg = RegionSpec.from_dict({"center": center, "radii": 0.08}, 1)
mask = reg.mask(pert.grid)
kreg_max = kf.weighted_field[mask].max()
print("  region kappa max", kreg_max)
ok("perturbed n=1 region genuinely negative", kreg_max < 0)
delta = -0.5 * float(kreg_max)

t0 = 1.0 * max(mu, 0) * 1.0  # threshold = n delta1 mu
sched = Schedule(t_start=t0 + 2.0, t_end=t0 + 0.25, steps=7)
path = run_continuation(pert, "thm1", sched, delta1=1.0, mu=mu, tol=1e-11)
print("  path:", path.termination, "samples", len(path.samples))
ok("perturbed path completed", path.termination == "reached_t_end")
states = A.prepare_states(pert, path)

b0 = A.compute_b0(pert)
c0 = 1.0
c1 = A.compute_c1_probe(pert, reg, c0, b0, family_size=10, seed=0)
c2 = A.compute_c2(pert, "thm1", c0=c0)
print(f"  b0={b0:.4f} c1={c1:.5f} c2={c2:.5f} mu={mu:.4f} delta={delta:.4f}")

worst = {}
for st in states:
    # pointwise comparison on the evolving metric: Ric(w) >= -w + t*eta
    rec = A.check_schwarz(st.w, pert, 1.0, st.t, mu,
                          kappa=kf.weighted_field, grid=pert.grid, name=f"schwarz[{st.t:.3g}]")
    worst.setdefault("schwarz", []).append(rec)
    recs = A.check_integral_lemma(pert, st.sample, kf.weighted_field, reg,
                                  mode="thm1", delta1=1.0, state=st,
                                  delta=delta, delta2=1.0, c1=c1, c2=c2)
    for r in recs:
        worst.setdefault(r.name.split("[")[0], []).append(r)

recs_tb = A.check_trace_bound(pert, path, 1.0, mu, states=states)
recs_su = A.check_sup_ut(pert, path, 1.0, 0.45, b0, c0, states=states)
worst["trace_bound"] = recs_tb
worst["sup_bound"] = recs_su

fails = []
for key, rs in sorted(worst.items()):
    eff = [r for r in rs if not r.vacuous and r.margin is not None]
    vac = sum(1 for r in rs if r.vacuous)
    wm = min((r.margin for r in eff), default=None)
    status = "all-vacuous" if not eff else f"worst {wm:+.3e}"
    print(f"  {key:22s} n={len(rs)} vac={vac} {status}")
    for r in rs:
        if not r.passed:
            fails.append(r)
ok("perturbed n=1: no failed audit records", not fails)
div_vals = [abs(r.details["integral"]) for r in worst["chain.divergence"]]
print("  max divergence:", max(div_vals))
ok("divergence within 1e-8", max(div_vals) <= 1e-8)
amgm_min = min(r.margin for r in worst["chain.amgm"])
ok("amgm within -1e-10", amgm_min >= -1e-10)
nonvac_num = [r for r in worst["chain.numerator"] if not r.vacuous]
ok("numerator link exercised (non-vacuous)", len(nonvac_num) == len(states))
nonvac_final = [r for r in worst["chain.final"] if not r.vacuous]
ok("final link exercised", len(nonvac_final) == len(states))

# c3 estimate on this path
c3 = estimate_c3(path, t0)
print("  c3:", c3.value, "extrapolated", c3.extrapolated)

# negative control: corrupted sample potential breaks divergence + substitution
bad_phi = path.samples[2].phi + 0.01 * np.sin(2 * np.pi * pert.grid.axis_coordinate(0))
import dataclasses
bad_sample = dataclasses.replace(path.samples[2], phi=bad_phi)
recs = A.check_integral_lemma(pert, bad_sample, kf.weighted_field, reg,
                              mode="thm1", delta1=1.0,
                              delta=delta, delta2=1.0, c1=c1, c2=c2)
by = {r.name.split("[")[0]: r for r in recs}
ok("corrupted sample fails substitution", not by["chain.substitution"].passed)
ok("composite reports first broken link",
   not by["chain.composite"].passed and by["chain.composite"].details["first_broken"] is not None)

# ---------------------------------------------------------------- thm2 checks
flat1 = flat_metric(1, 32)
sched2 = Schedule(t_start=1.0, t_end=0.3, steps=7)
path2 = run_continuation(flat1, "thm2", sched2, alpha=1.0, beta=1.0, lam=0.0, tol=1e-11)
states2 = A.prepare_states(flat1, path2)
curv_f = chern_curvature(flat1)
tau = tau_field(curv_f, 1.0, 1.0, restarts=8, seed=1)
for st in states2:
    rec = A.check_thm2_differential(flat1, st.sample, alpha=1.0, beta=1.0,
                                    lam=0.0, tau=tau.weighted_field, state=st)
    expected = 1.0  # 1 + alpha(n-1)/(2 beta) at n=1
    assert abs(rec.details["global_margin_nonneg"] - expected) < 1e-8, rec.details
    assert rec.passed
print("PASS thm2 differential flat closed form")

rec = A.check_thm2_differential(flat1, dataclasses.replace(
    path2.samples[1], phi=path2.samples[1].phi + 0.05 * np.sin(2 * np.pi * flat1.grid.axis_coordinate(0))),
    alpha=1.0, beta=1.0, lam=-1.0)
print("  corrupted thm2 margin:", rec.margin, "(negative control may pass if slack large)")

reg1 = RegionSpec.from_dict({"center": [0.5, 0.5], "radii": 0.2}, 1)
for st in states2:
    recs = A.check_integral_lemma(flat1, st.sample, np.zeros(flat1.grid.shape),
                                  reg1, mode="thm2", alpha=1.0, beta=1.0,
                                  state=st, delta=0.05, c1=0.1, c2=1.0)
    by = {r.name.split("[")[0]: r for r in recs}
    assert by["chain.divergence"].passed
    assert by["chain.integrated"].margin > 0  # lhs 2t vs rhs t
    assert by["chain.substitution"].passed
    assert by["chain.composite"].passed
print("PASS integral chain flat thm2")

# ---------------------------------------------------------------- constants
c4 = A.compute_c4(flat_metric(2, 16), 1.0, 0.1, mode="thm1", full=True)
ok("c4 flat n=2 closed form", abs(c4["c4"] - (2 * 2 * 1.0) ** 2 * 0.1) < 1e-10)
c4n1 = A.compute_c4(flat1, 1.0, 0.37)
ok("c4 flat n=1 eps-free", abs(c4n1 - 2.0) < 1e-12)
c4p = A.compute_c4(pert, 1.0, 1e-9, full=True)
ok("c4 eps->0 limit is k=1 term", abs(c4p["c4"] - 1 * 2 * c4p["mixed_integrals"]["1"]) < 1e-6)

vol_u = float(pert.grid.integrate(np.where(reg.mask(pert.grid), pert.det, 0.0)))
c1_full = A.compute_c1_probe(pert, reg, 1.0, b0, family_size=10, seed=0, full=True)
ok("c1 probe includes zero candidate = vol(U)", abs(c1_full["candidates"]["zero"] - vol_u) < 1e-12)
ok("c1 probe is a min", c1_full["c1"] <= vol_u + 1e-15)
c1_small = A.compute_c1_probe(pert, reg, 1.0, b0, family_size=4, seed=0)
ok("bigger family never increases probe", c1_full["c1"] <= c1_small + 1e-15)

ap = A.alpha_probe(flat1, 1.0, beta_exp=2.0, family_size=6, seed=0, full=True)
ok("alpha probe >= zero-candidate value", ap["bound"] >= 1.0 - 1e-12)

ok("neg ricci volume flat", abs(A.neg_ricci_volume(flat1)) < 1e-15)
ok("neg ricci volume perturbed", abs(A.neg_ricci_volume(pert)) < 1e-8)

# ---------------------------------------------------------------- gap report
curv_p = chern_curvature(pert)
eps = 0.05
hyp = {"quasi_negative": certify_quasi_negative(kf, eps, delta, reg, pert.grid)}
consts = A.compute_constants(pert, "thm1", region=reg, eps=eps, c0=1.0,
                             delta1=1.0, path=path, seed=0)
rep = A.gap_report(pert, path, hyp, consts, eps)
print("  verdict:", rep.gap["verdict"])
ok("gap report returns with verdict", rep.gap["consistent"] and "not certified" in rep.gap["verdict"] or "exceeds" in rep.gap["verdict"])
ok("gap report volume check", rep.checks[0].passed)
ok("gap c3 present", rep.constants["c3"] is not None)

# forced inconsistency must raise
class FakeCert:
    certified = True
try:
    A.gap_report(pert, path, {"qn": FakeCert()}, consts, 1e-12)
    raised = False
except AssertionError:
    raised = True
ok("gap report hard assertion fires", raised)

# mocked nonzero volume: no raise, vacuous volume check
consts2 = dict(consts)
consts2["int_neg_ricci_n"] = 1.0
rep2 = A.gap_report(pert, path, {"qn": FakeCert()}, consts2, 1e-12)
ok("mocked volume passes vacuously", rep2.checks[0].vacuous and rep2.gap["all_certified"])

d = rep.to_dict()
import json
json.dumps(d)
print("PASS report serializes")
print("ALL AUDIT SCRATCH CHECKS DONE")
