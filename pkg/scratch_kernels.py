import numpy as np
import math

from curvgap.grid import Grid
from curvgap.metrics import TrigTerm, TrigExpr, MetricSpec, build_metric, chern_curvature, rel_eigvalsh
import curvgap.functionals as F
from curvgap import kernels

print("backend:", kernels.BACKEND)

g = Grid(2, 8)
pot = TrigExpr((
    TrigTerm(0.020, (1, 0, 0, 0), "cos"),
    TrigTerm(0.015, (0, 1, 1, 0), "sin"),
    TrigTerm(0.012, (0, 0, 0, 1), "cos"),
    TrigTerm(0.008, (1, 0, 1, 0), "cos"),
))
met = build_metric(g, MetricSpec(family="kahler_potential", potential=pot))
curv = chern_curvature(met)

# tensor-orthonormal transport: columns c with c^T G conj(c) = I
def transport(gm):
    return np.linalg.inv(np.linalg.cholesky(gm)).T

def brute_rbc(curv, point, samples=200000, rng=None):
    t = curv.tensor[point]
    gm = curv.metric.matrix[point]
    n = gm.shape[0]
    m = transport(gm)
    t_on = np.einsum("ijkl,ia,jb,kc,ld->abcd", t, m, np.conj(m), m, np.conj(m))
    z = rng.standard_normal((samples, n, n)) + 1j * rng.standard_normal((samples, n, n))
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=-2, axis2=-1).copy()
    q = q * (d / np.abs(d))[:, None, :]
    a = np.abs(rng.standard_normal((samples, n)))
    a /= np.linalg.norm(a, axis=1, keepdims=True)
    xi = np.einsum("mai,mbi->miab", q, np.conj(q))
    amat = np.einsum("abgd,miab,mjgd->mij", t_on, xi, xi).real
    return np.einsum("mi,mij,mj->m", a, amat, a).max()

pts = [(0, 0, 0, 0), (2, 5, 1, 7), (4, 4, 4, 4), (7, 1, 3, 2)]
for p in pts:
    ex = F.max_rbc_at_point(curv, p, restarts=24, seed=3)
    bf = brute_rbc(curv, p, rng=np.random.default_rng(11))
    print(f"point {p}: ascent {ex.value:+.10f}  brute {bf:+.10f}  gap {ex.value - bf:+.2e}")
    check = F.rbc(curv, p, ex.frame, ex.weights)
    assert abs(check - ex.value) < 1e-12, (check, ex.value)
    assert ex.value >= bf - 1e-9

def brute_rbc_psd(curv, point, samples=200000, rng=None):
    t = curv.tensor[point]
    gm = curv.metric.matrix[point]
    n = gm.shape[0]
    m = transport(gm)
    t_on = np.einsum("ijkl,ia,jb,kc,ld->abcd", t, m, np.conj(m), m, np.conj(m))
    z = rng.standard_normal((samples, n, n)) + 1j * rng.standard_normal((samples, n, n))
    h = z @ np.conj(np.swapaxes(z, -1, -2))
    nrm = np.sqrt((np.abs(h) ** 2).sum(axis=(1, 2)))
    h /= nrm[:, None, None]
    vals = np.einsum("abgd,mab,mgd->m", t_on, h, h).real
    return vals.max()

for p in pts[:2]:
    ex = F.max_rbc_at_point(curv, p, restarts=24, seed=3)
    bf = brute_rbc_psd(curv, p, rng=np.random.default_rng(5))
    print(f"psd-oracle {p}: ascent {ex.value:+.10f}  brute {bf:+.10f}  gap {ex.value - bf:+.2e}")
    assert ex.value >= bf - 1e-9

g1 = Grid(1, 32)
lam = TrigExpr((TrigTerm(0.05, (1, 0), "cos"),))
m1 = build_metric(g1, MetricSpec(family="conformal", log_conformal=lam))
c1 = chern_curvature(m1)
p1 = (0, 0)
ex1 = F.max_rbc_at_point(c1, p1, restarts=4, seed=0)
v1 = F.hsc(c1, p1, np.array([1.0 + 0j]))
a_ = 0.05
hsc_exact = a_ * math.pi ** 2 * math.exp(a_) / math.exp(2 * a_)
print(f"n=1 rbc {ex1.value:+.8e} hsc {v1:+.8e} closed {hsc_exact:+.8e}")
assert abs(ex1.value - v1) < 1e-13
assert abs(ex1.value - hsc_exact) < 1e-10

def brute_ric_perp(curv, point, alpha, beta, samples=400000, rng=None):
    t = curv.tensor[point]
    gm = curv.metric.matrix[point]
    ric = curv.ricci[point]
    n = gm.shape[0]
    z = rng.standard_normal((samples, n)) + 1j * rng.standard_normal((samples, n))
    n2 = np.einsum("mi,ij,mj->m", z, gm, np.conj(z)).real
    quad = np.einsum("ij,mi,mj->m", ric, z, np.conj(z)).real / n2
    quart = np.einsum("ijkl,mi,mj,mk,ml->m", t, z, np.conj(z), z, np.conj(z)).real / n2 ** 2
    return (alpha * quad + beta * quart).max()

for p in pts[:3]:
    ex = F.max_ric_perp_at_point(curv, p, alpha=1.0, beta=2.0, restarts=12, seed=1)
    bf = brute_ric_perp(curv, p, 1.0, 2.0, rng=np.random.default_rng(13))
    print(f"ric_perp {p}: ascent {ex.value:+.10f}  brute {bf:+.10f}  gap {ex.value - bf:+.2e}")
    assert ex.value >= bf - 1e-9

ex0 = F.max_ric_perp_at_point(curv, pts[1], alpha=1.0, beta=0.0, restarts=4, seed=1)
gm = curv.metric.matrix[pts[1]]
ric = curv.ricci[pts[1]]
ev = rel_eigvalsh(ric[None], gm[None])[0]
bf0 = brute_ric_perp(curv, pts[1], 1.0, 0.0, rng=np.random.default_rng(17))
print(f"beta=0: {ex0.value:+.10e} exact {ev[-1]:+.10e} brute {bf0:+.10e}")
assert abs(ex0.value - ev[-1]) < 1e-10

for p in pts[:2]:
    e1 = F.max_k_ricci_at_point(curv, p, k=1, restarts=12, seed=2)
    ep = F.max_ric_perp_at_point(curv, p, alpha=0.0, beta=1.0, restarts=12, seed=2)
    print(f"k=1 {p}: {e1.value:+.10f} vs hsc-max {ep.value:+.10f} diff {e1.value-ep.value:+.2e}")
    assert abs(e1.value - ep.value) < 1e-9
    e2 = F.max_k_ricci_at_point(curv, p, k=2, restarts=8, seed=2)
    t = curv.tensor[p]; gmat = curv.metric.matrix[p]
    s1 = np.einsum("ijkl,lk->ij", t, np.linalg.inv(gmat))
    ev = rel_eigvalsh(s1[None], gmat[None])[0]
    print(f"k=n {p}: {e2.value:+.10f} vs exact {ev[-1]:+.10f}")
    assert abs(e2.value - ev[-1]) < 1e-10

# frame sum of bundle trace over tensor-ON frame == ricci field
p = pts[1]
t = curv.tensor[p]; gm = curv.metric.matrix[p]
m = transport(gm)
rng = np.random.default_rng(0)
z = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
q, _ = np.linalg.qr(z)
e = m @ q
fs = np.einsum("ijkl,ia,ja->kl", t, e, np.conj(e))
trace2 = np.einsum("ji,ijkl->kl", np.linalg.inv(gm), t)
print("frame-sum vs contracted trace:", np.abs(fs - trace2).max())
print("contracted trace vs spectral ricci (aliasing at N=8):",
      np.abs(trace2 - curv.ricci[p]).max())
assert np.abs(fs - trace2).max() < 1e-12

print("all kernel smoke checks passed")
