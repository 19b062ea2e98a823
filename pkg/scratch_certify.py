"""Scratch: certifier sanity against hand-computable cases."""
import numpy as np

from curvgap import Grid, MetricSpec, build_metric, chern_curvature
from curvgap.metrics import CurvatureTensorField, TrigExpr, rel_eigvalsh
from curvgap.functionals import max_rbc_field, mu_eta
from curvgap.certify import (RegionSpec, certify_quasi_negative,
                             certify_delta1_bounded,
                             certify_volume_noncollapse, find_delta)

n, N = 2, 8
grid = Grid(n=n, N=N)
flat = build_metric(grid, MetricSpec("flat"))
region = RegionSpec(center=(0.5,) * 4, radii=(0.2,) * 4)
mask = region.mask(grid)
print("mask count:", mask.sum(), "of", grid.npoints)

# flat: max RBC field is identically 0
curv_flat = chern_curvature(flat)
ext_flat = max_rbc_field(curv_flat, restarts=4, seed=0)
print("flat max rbc range:", ext_flat.max_field.min(), ext_flat.max_field.max())
rep = certify_quasi_negative(ext_flat, eps=0.1, delta=0.5, region=region, grid=grid)
print("flat certified:", rep.certified, rep.margins)
assert not rep.certified
assert abs(rep.margins["global"] - 0.1) < 1e-9
assert abs(rep.margins["region"] + 0.5) < 1e-9
assert rep.witnesses and rep.witnesses[0]["constraint"] == "region"

d = find_delta(ext_flat, eps=0.1, region=region, grid=grid)
print("flat find_delta:", d)
assert d == 0.0

# mock space form: R[i,j,k,l] = -c d_ij d_kl  ->  max RBC == -c everywhere
c = 1.0
eye = np.eye(n)
mock = -c * np.einsum("ij,kl->ijkl", eye, eye)
tensor = np.broadcast_to(mock, grid.shape + (n,) * 4).copy()
ricci = -grid.ddc(np.log(np.ones(grid.shape)))  # zero; not used by rbc
curv_mock = CurvatureTensorField(grid=grid, metric=flat, tensor=tensor, ricci=ricci)
ext_mock = max_rbc_field(curv_mock, restarts=8, seed=1)
print("mock max rbc range:", ext_mock.max_field.min(), ext_mock.max_field.max())
assert np.allclose(ext_mock.max_field, -1.0, atol=1e-9)
rep = certify_quasi_negative(ext_mock, eps=0.1, delta=0.5, region=region, grid=grid)
print("mock certified:", rep.certified, rep.margins)
assert rep.certified

d = find_delta(ext_mock, eps=0.1, region=region, grid=grid)
print("mock find_delta:", d, "(expect 1.0 +- 1e-4)")
assert abs(d - 1.0) <= 2e-4, d
print("mu_eta mock:", mu_eta(ext_mock))

# delta1 certifications
rep = certify_delta1_bounded(flat, flat, None, delta1=1.0)
print("d1 eta=omega:", rep.certified, rep.margins)
assert rep.certified and abs(rep.margins["primary"]) < 1e-12

spec2 = MetricSpec.from_dict({"family": "direct", "components": {
    "0,0": {"re": {"terms": [], "constant": 2.0}},
    "1,1": {"re": {"terms": [], "constant": 2.0}},
}}, n)
eta2 = build_metric(grid, spec2)
rep = certify_delta1_bounded(eta2, flat, None, delta1=1.0)
print("d1 eta=2omega:", rep.certified, rep.margins)
assert not rep.certified and abs(rep.margins["primary"] + 1.0) < 1e-12

psi = TrigExpr.from_dict({"terms": [{"c": 0.01, "modes": [1, 0, 0, 0], "kind": "cos"}]}, 2 * n)
rep = certify_delta1_bounded(flat, flat, psi, delta1=1.5)
# symbolic: ddc psi = diag(-pi^2 a cos(2 pi x), 0) (d/dz = (dx - i dy)/2 twice
# on cos(2 pi x) gives -pi^2 cos); min over x of 0.5 - pi^2*0.01*cos is
# 0.5 - 0.0987 at cos=1
expected = 0.5 - np.pi ** 2 * 0.01
print("d1 psi margin:", rep.margins["primary"], "expected:", expected)
assert abs(rep.margins["primary"] - expected) < 1e-12
assert abs(rep.margins["scaled_form"] - expected / 1.5) < 1e-12
assert rep.certified

# invariance of verdict under adding a constant to psi
psi_shift = TrigExpr.from_dict(
    {"constant": 7.3,
     "terms": [{"c": 0.01, "modes": [1, 0, 0, 0], "kind": "cos"}]}, 2 * n)
rep2 = certify_delta1_bounded(flat, flat, psi_shift, delta1=1.5)
assert abs(rep2.margins["primary"] - rep.margins["primary"]) < 1e-12

# volume noncollapse
rep = certify_volume_noncollapse(flat, flat, delta2=1.0, region=region)
print("d2 eta=omega:", rep.certified, rep.margins)
assert rep.certified and abs(rep.margins["region"]) < 1e-12

spec_half = MetricSpec.from_dict({"family": "direct", "components": {
    "0,0": {"re": {"terms": [], "constant": 0.5}},
    "1,1": {"re": {"terms": [], "constant": 0.5}},
}}, n)
eta_half = build_metric(grid, spec_half)
rep = certify_volume_noncollapse(eta_half, flat, delta2=0.5, region=region)
print("d2 eta=omega/2:", rep.certified, rep.margins)
assert not rep.certified and abs(rep.margins["region"] - (0.25 - 0.5)) < 1e-12

# conformal eta = e^lam omega -> ratio e^{n lam}
lam_expr = {"terms": [{"c": 0.05, "modes": [0, 1, 0, 0], "kind": "sin"}]}
spec_conf = MetricSpec.from_dict({"family": "conformal", "log_conformal": lam_expr}, n)
eta_conf = build_metric(grid, spec_conf)
lam = TrigExpr.from_dict(lam_expr, 2 * n).on_grid(grid)
ratio_expected = np.exp(n * lam)
rep = certify_volume_noncollapse(eta_conf, flat, delta2=float(
    ratio_expected[mask].min()) - 1e-6, region=region)
print("d2 conformal margin:", rep.margins["region"], "(expect ~1e-6)")
assert rep.certified and abs(rep.margins["region"] - 1e-6) < 1e-10

# monotonicity property: certified at (eps, delta) -> certified at eps'>=eps, delta'<=delta
rng = np.random.default_rng(0)
for _ in range(20):
    eps = float(rng.uniform(0.01, 1.0))
    dl = float(rng.uniform(0.01, 1.5))
    r1 = certify_quasi_negative(ext_mock, eps, dl, region, grid)
    eps2 = eps * float(rng.uniform(1.0, 3.0))
    dl2 = dl * float(rng.uniform(0.1, 1.0))
    r2 = certify_quasi_negative(ext_mock, eps2, dl2, region, grid)
    if r1.certified:
        assert r2.certified, (eps, dl, eps2, dl2)

print("ALL CERTIFY CHECKS PASS")
