"""Scratch: continuity solver vs closed forms and manufactured solutions."""
import time
import numpy as np

from curvgap import Grid, MetricSpec, build_metric
from curvgap.errors import ParameterError
from curvgap.continuity import (Schedule, assemble_problem, estimate_c3,
                                run_continuation, solve_ma, trace_against)

# --- flat thm1 n=1: phi == 0 at t=1, phi = log t along the path -------------
grid1 = Grid(n=1, N=64)
flat1 = build_metric(grid1, MetricSpec("flat"))

prob = assemble_problem(flat1, "thm1", t=1.0)
phi, stats = solve_ma(prob)
print("flat t=1 sup|phi|:", np.abs(phi).max(), "iters:", stats["iterations"])
assert np.abs(phi).max() <= 1e-12

sched = Schedule(t_start=1.0, t_end=0.1, steps=9)
t0 = time.time()
path = run_continuation(flat1, "thm1", sched, mu=0.0, eta=flat1)
print(f"flat thm1 path: {len(path.samples)} samples in {time.time()-t0:.2f}s,"
      f" termination: {path.termination}")
for s in path.samples:
    err = np.abs(s.phi - np.log(s.t)).max()
    tr = s.diagnostics["sup_tr_eta"]
    assert err <= 1e-8, (s.t, err)
    assert abs(tr - 1.0 / s.t) <= 1e-8, (s.t, tr)
    assert abs(s.diagnostics["int_exp_u"] - s.t) <= 1e-8
print("flat thm1 closed form + trace equality OK")

c3 = estimate_c3(path, t_limit=0.0)
print("c3:", c3.to_dict())
assert abs(c3.extrapolated) <= 1e-6
assert abs(c3.tail_min - 0.1) <= 1e-8

# --- flat thm2 alpha=beta=1 n=1: phi = (2/3) log t ---------------------------
path2 = run_continuation(flat1, "thm2", sched, alpha=1.0, beta=1.0, lam=0.0)
assert abs(path2.c - 1.5) < 1e-15
for s in path2.samples:
    err = np.abs(s.phi - (2.0 / 3.0) * np.log(s.t)).max()
    assert err <= 1e-8, (s.t, err)
print("flat thm2 closed form OK")

# --- threshold precondition --------------------------------------------------
try:
    run_continuation(flat1, "thm1", Schedule(0.3, 0.1, 2), mu=0.5)
    raise SystemExit("expected ParameterError")
except ParameterError as e:
    print("threshold check OK:", e)

try:
    assemble_problem(flat1, "thm2", t=1.0, beta=0.0)
    raise SystemExit("expected ParameterError")
except ParameterError as e:
    print("thm2 beta=0 rejected OK")

# --- manufactured solution n=1 N=64 ------------------------------------------
x = grid1.axis_coordinate(0)
phi_star = 0.1 * np.cos(2 * np.pi * x)
base = assemble_problem(flat1, "thm1", t=1.0)
w_star = base.chi + grid1.ddc(phi_star)
log_f = (np.log(np.linalg.det(w_star).real) - np.log(flat1.det)
         - base.c * phi_star)
prob_mfg = assemble_problem(flat1, "thm1", t=1.0, log_forcing=log_f)
phi_rec, stats = solve_ma(prob_mfg, tol=1e-11)
err = np.abs(phi_rec - phi_star).max()
print("manufactured n=1 sup err:", err, "history:",
      ["%.2e" % h for h in stats["residual_history"]])
assert err <= 1e-8, err
h = stats["residual_history"]
# quadratic decay over the last meaningful iterations
for k in range(len(h) - 2, len(h) - 1):
    if h[k] < 1e-2 and h[k] > 0:
        ratio = h[k + 1] / h[k] ** 2
        print(f"  quad ratio at k={k}: {ratio:.2f}")

# uniqueness probe: different admissible init (half of the target keeps
# chi + ddc positive since the Hessian scales linearly)
init2 = 0.5 * phi_star
phi_rec2, _ = solve_ma(prob_mfg, phi_init=init2, tol=1e-11)
print("uniqueness diff:", np.abs(phi_rec - phi_rec2).max())
assert np.abs(phi_rec - phi_rec2).max() <= 1e-10

# --- manufactured n=2 N=32 ----------------------------------------------------
grid2 = Grid(n=2, N=32)
spec2 = MetricSpec.from_dict({"family": "kahler_potential", "potential": {
    "terms": [{"c": 0.01, "modes": [1, 0, 0, 0], "kind": "cos"},
              {"c": 0.008, "modes": [0, 1, 1, 0], "kind": "sin"},
              {"c": 0.006, "modes": [0, 0, 0, 1], "kind": "cos"}]}}, 2)
g2 = build_metric(grid2, spec2)
x1 = grid2.axis_coordinate(0)
y2ax = grid2.axis_coordinate(3)
phi_star2 = 0.02 * np.cos(2 * np.pi * x1) + 0.015 * np.sin(2 * np.pi * y2ax)
base2 = assemble_problem(g2, "thm1", t=3.0)
w_star2 = base2.chi + grid2.ddc(phi_star2)
log_f2 = (np.log(np.linalg.det(w_star2).real) - np.log(g2.det)
          - base2.c * phi_star2)
prob2 = assemble_problem(g2, "thm1", t=3.0, log_forcing=log_f2)
t0 = time.time()
phi2, stats2 = solve_ma(prob2, tol=1e-11)
dt = time.time() - t0
err2 = np.abs(phi2 - phi_star2).max()
print(f"manufactured n=2 sup err: {err2:.2e} in {dt:.1f}s, "
      f"iters {stats2['iterations']}")
assert err2 <= 1e-5, err2

# normalization: int e^{c phi} F omega0^n = int omega_t^n
lhs = grid2.integrate(np.exp(base2.c * phi2 + log_f2) * g2.det)
w2 = base2.chi + grid2.ddc(phi2)
rhs = grid2.integrate(np.linalg.det(w2).real)
print("normalization:", lhs, rhs, abs(lhs - rhs))
assert abs(lhs - rhs) <= 1e-8

# --- perturbed geometry path (small, for audit later) -------------------------
sched_p = Schedule(t_start=6.0, t_end=4.5, steps=5)
t0 = time.time()
path_p = run_continuation(g2, "thm1", sched_p, eta=g2, tol=1e-10)
print(f"perturbed n=2 path: {len(path_p.samples)} samples in "
      f"{time.time()-t0:.1f}s, termination: {path_p.termination}")
assert path_p.termination == "reached_t_end"
# sup phi_t nondecreasing in t (comparison principle)
sups = [float(s.phi.max()) for s in path_p.samples]
assert all(sups[i] >= sups[i + 1] - 1e-6 for i in range(len(sups) - 1)), sups

print("ALL CONTINUITY CHECKS PASS")
