"""Scratch: compiled backend vs numpy backend on identical inputs."""
import numpy as np

from curvgap import Grid, MetricSpec, build_metric, chern_curvature
from curvgap import kernels
from curvgap import _ascent_np

assert kernels.BACKEND == "compiled", kernels.BACKEND
cy = kernels._impl

rng = np.random.default_rng(7)


def haar_frames(b, r, n):
    z = rng.standard_normal((b, r, n, n)) + 1j * rng.standard_normal((b, r, n, n))
    q, rr = np.linalg.qr(z)
    d = np.einsum("...ii->...i", rr)
    return q * (d / np.abs(d))[..., None, :]


def haar_vectors(b, r, n):
    z = rng.standard_normal((b, r, n)) + 1j * rng.standard_normal((b, r, n))
    return z / np.linalg.norm(z, axis=-1, keepdims=True)


def curvature_batch(n, N, amps):
    terms = []
    modes_pool = [
        (1, 0, 0, 0, 0, 0), (0, 1, 1, 0, 0, 0), (0, 0, 0, 1, 0, 0),
        (1, 0, 1, 0, 0, 0), (0, 1, 0, 0, 0, 1), (1, 1, 0, 0, 1, 0),
    ]
    for i, a in enumerate(amps):
        m = modes_pool[i % len(modes_pool)][: 2 * n]
        if not any(m):
            m = (1,) + (0,) * (2 * n - 1)
        terms.append({"c": a, "modes": list(m), "kind": "cos" if i % 2 == 0 else "sin"})
    spec = MetricSpec.from_dict(
        {"family": "kahler_potential", "potential": {"terms": terms}}, n)
    grid = Grid(n=n, N=N)
    metric = build_metric(grid, spec)
    curv = chern_curvature(metric)
    flat = curv.tensor.reshape(-1, n, n, n, n)
    idx = rng.choice(flat.shape[0], size=24, replace=False)
    return flat[idx]


def orthonormalize_into(t_raw):
    # raw -> coordinates where the metric is the identity is already done upstream
    # in the real pipeline; here the raw tensors serve directly as test inputs.
    return t_raw


def compare_rbc(t, r=8):
    b, n = t.shape[0], t.shape[1]
    starts = haar_frames(b, r, n)
    v_np, q_np, a_np, it_np = _ascent_np.rbc_max(t, starts)
    v_cy, q_cy, a_cy, it_cy = cy.rbc_max(t, starts)
    dv = np.max(np.abs(v_np - v_cy))
    print(f"  rbc n={n} b={b} r={r}: max|dv|={dv:.3e}  "
          f"iters np/cy = {int(it_np.sum())}/{int(it_cy.sum())}")
    assert dv < 5e-9, dv
    # each backend's value must be certified from below by its own frame
    tsym = 0.5 * (t + t.transpose(0, 3, 4, 1, 2))
    for tag, q, a, v in (("np", q_np, a_np, v_np), ("cy", q_cy, a_cy, v_cy)):
        xi = np.einsum("mai,mbi->miab", q, q.conj())
        half = np.einsum("mabgd,mjgd->mjab", tsym, xi)
        amat = np.einsum("miab,mjab->mij", xi, half).real
        realized = np.einsum("mi,mij,mj->m", a, amat, a)
        gap = np.max(np.abs(realized - v))
        assert gap < 1e-9, (tag, gap)


def compare_vec(t, alpha, beta, r=8):
    b, n = t.shape[0], t.shape[1]
    a = np.einsum("mijkk->mij", t)
    a = 0.5 * (a + np.swapaxes(a, -1, -2).conj())
    starts = haar_vectors(b, r, n)
    v_np, w_np, it_np = _ascent_np.quartic_vec_max(a, t, starts, alpha, beta)
    v_cy, w_cy, it_cy = cy.quartic_vec_max(a, t, starts, alpha, beta)
    dv = np.max(np.abs(v_np - v_cy))
    print(f"  vec n={n} a={alpha} b={beta}: max|dv|={dv:.3e}  "
          f"iters np/cy = {int(it_np.sum())}/{int(it_cy.sum())}")
    assert dv < 5e-9, dv
    tsym = 0.5 * (t + t.transpose(0, 3, 4, 1, 2))
    for tag, w, v in (("np", w_np, v_np), ("cy", w_cy, v_cy)):
        quad = np.einsum("mi,mij,mj->m", w.conj(), a, w).real
        ww = np.einsum("mi,mj->mij", w, w.conj())
        quart = np.einsum("mabgd,mab,mgd->m", tsym, ww, ww).real
        realized = alpha * quad + beta * quart
        gap = np.max(np.abs(realized - v))
        assert gap < 1e-9, (tag, gap)


print("== n=2 fixtures ==")
t2 = curvature_batch(2, 8, [0.020, 0.015, 0.012, 0.008])
compare_rbc(t2)
compare_vec(t2, 1.0, 1.0)
compare_vec(t2, 2.0, 3.0)
compare_vec(t2, 0.0, 1.0)
compare_vec(t2, 1.0, 0.0)

print("== n=3 fixtures ==")
t3 = curvature_batch(3, 8, [0.010, 0.008, 0.006, 0.005, 0.004])
compare_rbc(t3)
compare_vec(t3, 1.0, 2.0)
compare_vec(t3, 1.0, 0.0)

print("== n=1 fast path ==")
t1 = curvature_batch(1, 16, [0.05, 0.03])
compare_rbc(t1)
compare_vec(t1, 1.0, 1.0)

print("== synthetic random hermitian-symmetric tensors n=2,3 ==")
for n in (2, 3):
    z = rng.standard_normal((16, n, n, n, n)) + 1j * rng.standard_normal((16, n, n, n, n))
    # impose conjugate symmetry of a curvature-like tensor
    t = 0.5 * (z + z.conj().transpose(0, 2, 1, 4, 3))
    compare_rbc(t, r=12)
    compare_vec(t, 1.0, 1.0, r=12)

print("ALL BACKEND COMPARISONS PASS")
