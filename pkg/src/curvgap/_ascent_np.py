"""Batched numpy implementations of the pointwise maximization kernels.

This is the fallback twin of the compiled extension: same algorithms, same
step rules, vectorized over grid points.  Inputs arrive in metric-orthonormal
coordinates, so frames are plain unitary matrices and vectors live on the
Euclidean unit sphere.

Kernel contracts (shared with the compiled backend):

``rbc_max(T, starts, max_iter, tol)``
    T: (B, n, n, n, n) complex, curvature rotated to an orthonormal basis.
    starts: (B, R, n, n) unitary start frames.
    Returns (values, frames, weights, iters): the per-point best of an
    alternating maximization: exact inner solve over nonnegative weights by
    support enumeration, Cayley-retraction ascent over the unitary frame.

``quartic_vec_max(A, T, starts, alpha, beta, max_iter, tol)``
    A: (B, n, n) Hermitian quadratic part, T as above for the quartic part.
    starts: (B, R, n) unit vectors.  Projected gradient ascent of
    alpha * w'Aw + beta * T(ww', ww') over the unit sphere.
"""

from __future__ import annotations

import numpy as np

_FEAS_TOL = 1e-9
_MIN_STEP = 1e-10
_MAX_BACKTRACKS = 30


def _subsets(n: int) -> list:
    out = []
    for mask in range(1, 2 ** n):
        out.append(tuple(i for i in range(n) if mask >> i & 1))
    return out


def _pair_symmetrize(t: np.ndarray) -> np.ndarray:
    return 0.5 * (t + t.transpose(0, 3, 4, 1, 2))


def nonneg_quadratic_max(a: np.ndarray) -> tuple:
    """Exact max of x'Ax over unit x >= 0, batched over symmetric (M, n, n).

    Enumerates supports: on each face the interior maximizer must be the top
    eigenvector of the restricted matrix, accepted only when it can be taken
    entrywise nonnegative; singleton supports double as vertex candidates.
    """
    m, n = a.shape[0], a.shape[1]
    best_val = np.full(m, -np.inf)
    best_vec = np.zeros((m, n))
    for subset in _subsets(n):
        d = len(subset)
        idx = np.asarray(subset)
        if d == 1:
            val = a[:, idx[0], idx[0]]
            vec = np.zeros((m, n))
            vec[:, idx[0]] = 1.0
            feasible = np.ones(m, dtype=bool)
        else:
            sub = a[np.ix_(np.arange(m), idx, idx)]
            w, v = np.linalg.eigh(sub)
            top = v[..., -1]
            lead = np.take_along_axis(
                top, np.argmax(np.abs(top), axis=1)[:, None], axis=1)[:, 0]
            top = top * np.where(lead < 0.0, -1.0, 1.0)[:, None]
            feasible = (top >= -_FEAS_TOL).all(axis=1)
            top = np.clip(top, 0.0, None)
            norm = np.linalg.norm(top, axis=1)
            norm[norm == 0.0] = 1.0
            top = top / norm[:, None]
            vec = np.zeros((m, n))
            vec[:, idx] = top
            val = np.einsum("mi,mij,mj->m", vec, a, vec)
        val = np.where(feasible, val, -np.inf)
        better = val > best_val
        best_val = np.where(better, val, best_val)
        best_vec = np.where(better[:, None], vec, best_vec)
    return best_val, best_vec


def _frame_form(tsym: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Diagonal-type curvature matrix A_ij of a frame, batched."""
    xi = np.einsum("mai,mbi->miab", q, np.conj(q))
    half = np.einsum("mabgd,mjgd->mjab", tsym, xi)
    return np.einsum("miab,mjab->mij", xi, half).real


def _cayley_step(q: np.ndarray, w: np.ndarray, tau: np.ndarray) -> np.ndarray:
    m, n = q.shape[0], q.shape[1]
    eye = np.eye(n)
    s = 0.5 * tau[:, None, None]
    return np.linalg.solve(eye - s * w, q + s * (w @ q))


def rbc_max(t: np.ndarray, starts: np.ndarray, max_iter: int = 80,
            tol: float = 1e-11) -> tuple:
    b, r, n = starts.shape[0], starts.shape[1], starts.shape[2]
    tsym = _pair_symmetrize(np.ascontiguousarray(t))
    if n == 1:
        vals = tsym[:, 0, 0, 0, 0].real.copy()
        frames = np.ones((b, 1, 1), dtype=np.complex128)
        weights = np.ones((b, 1))
        return vals, frames, weights, np.zeros(b, dtype=np.int64)

    best_val = np.full(b, -np.inf)
    best_q = np.empty((b, n, n), dtype=np.complex128)
    best_a = np.empty((b, n))
    total_iters = np.zeros(b, dtype=np.int64)
    for j in range(r):
        val, q, a, iters = _rbc_single(tsym, starts[:, j].copy(), max_iter, tol)
        total_iters += iters
        better = val > best_val
        best_val = np.where(better, val, best_val)
        best_q = np.where(better[:, None, None], q, best_q)
        best_a = np.where(better[:, None], a, best_a)
    return best_val, best_q, best_a, total_iters


def _rbc_single(tsym: np.ndarray, q: np.ndarray, max_iter: int, tol: float) -> tuple:
    m, n = q.shape[0], q.shape[1]
    val, a = nonneg_quadratic_max(_frame_form(tsym, q))
    tau = np.full(m, 0.5)
    active = np.ones(m, dtype=bool)
    iters = np.zeros(m, dtype=np.int64)
    for _ in range(max_iter):
        if not active.any():
            break
        idx = np.where(active)[0]
        ql, al = q[idx], a[idx]
        zeta = np.einsum("mk,mak,mbk->mab", al, ql, np.conj(ql))
        lmat = np.einsum("mabgd,mgd->mab", tsym[idx], zeta)
        grad = 2.0 * np.einsum("mab,mak->mbk", lmat, ql) * al[:, None, :]
        w = grad @ np.conj(np.swapaxes(ql, -1, -2))
        w = w - np.conj(np.swapaxes(w, -1, -2))
        wnorm = np.sqrt((np.abs(w) ** 2).sum(axis=(-2, -1)))
        stationary = wnorm <= 1e-12 * (1.0 + np.abs(val[idx]))
        active[idx[stationary]] = False
        keep = ~stationary
        idx = idx[keep]
        if idx.size == 0:
            continue
        ql, w = ql[keep], w[keep] / wnorm[keep][:, None, None]
        iters[idx] += 1

        unresolved = np.arange(idx.size)
        tau_loc = tau[idx].copy()
        new_q = np.empty_like(ql)
        new_val = np.empty(idx.size)
        new_a = np.empty((idx.size, n))
        succeeded = np.zeros(idx.size, dtype=bool)
        for _bt in range(_MAX_BACKTRACKS):
            if unresolved.size == 0:
                break
            cand = _cayley_step(ql[unresolved], w[unresolved], tau_loc[unresolved])
            cval, ca = nonneg_quadratic_max(_frame_form(tsym[idx[unresolved]], cand))
            improved = cval > val[idx[unresolved]] + 1e-15
            hit = unresolved[improved]
            new_q[hit] = cand[improved]
            new_val[hit] = cval[improved]
            new_a[hit] = ca[improved]
            succeeded[hit] = True
            unresolved = unresolved[~improved]
            tau_loc[unresolved] *= 0.5
            below = tau_loc[unresolved] < _MIN_STEP
            unresolved = unresolved[~below]
        # whoever never improved is done
        failed = np.setdiff1d(np.arange(idx.size), np.where(succeeded)[0])
        active[idx[failed]] = False
        ok = np.where(succeeded)[0]
        if ok.size:
            rows = idx[ok]
            gain = new_val[ok] - val[rows]
            q[rows] = new_q[ok]
            a[rows] = new_a[ok]
            val[rows] = new_val[ok]
            tau[rows] = np.minimum(tau_loc[ok] * 2.0, 1.0)
            small = gain <= tol * (1.0 + np.abs(new_val[ok]))
            active[rows[small]] = False
    return val, q, a, iters


# -- vector ascent for quadratic plus quartic objectives -------------------------


def _quartic_parts(tsym: np.ndarray, w: np.ndarray) -> tuple:
    ww = np.einsum("ma,mb->mab", w, np.conj(w))
    lmat = np.einsum("mabgd,mgd->mab", tsym, ww)
    quart = np.einsum("mab,mab->m", lmat, ww).real
    grad = 2.0 * np.einsum("mab,ma->mb", lmat, w)
    return quart, grad


def _vec_objective(a: np.ndarray, tsym: np.ndarray, w: np.ndarray,
                   alpha: float, beta: float) -> np.ndarray:
    quad = np.einsum("ma,mab,mb->m", np.conj(w), a, w).real
    quart, _ = _quartic_parts(tsym, w)
    return alpha * quad + beta * quart


def quartic_vec_max(a: np.ndarray, t: np.ndarray, starts: np.ndarray,
                    alpha: float, beta: float, max_iter: int = 80,
                    tol: float = 1e-11) -> tuple:
    b, r, n = starts.shape[0], starts.shape[1], starts.shape[2]
    tsym = _pair_symmetrize(np.ascontiguousarray(t))
    if n == 1:
        vals = (alpha * a[:, 0, 0].real + beta * tsym[:, 0, 0, 0, 0].real).copy()
        vecs = np.ones((b, 1), dtype=np.complex128)
        return vals, vecs, np.zeros(b, dtype=np.int64)
    if beta == 0.0:
        evals, evecs = np.linalg.eigh(a)
        return alpha * evals[:, -1], evecs[:, :, -1].copy(), np.zeros(b, dtype=np.int64)

    best_val = np.full(b, -np.inf)
    best_w = np.empty((b, n), dtype=np.complex128)
    total_iters = np.zeros(b, dtype=np.int64)
    for j in range(r):
        val, w, iters = _vec_single(a, tsym, starts[:, j].copy(), alpha, beta,
                                    max_iter, tol)
        total_iters += iters
        better = val > best_val
        best_val = np.where(better, val, best_val)
        best_w = np.where(better[:, None], w, best_w)
    return best_val, best_w, total_iters


def _vec_single(a: np.ndarray, tsym: np.ndarray, w: np.ndarray, alpha: float,
                beta: float, max_iter: int, tol: float) -> tuple:
    m, n = w.shape[0], w.shape[1]
    w = w / np.linalg.norm(w, axis=1)[:, None]
    val = _vec_objective(a, tsym, w, alpha, beta)
    tau = np.full(m, 0.5)
    active = np.ones(m, dtype=bool)
    iters = np.zeros(m, dtype=np.int64)
    for _ in range(max_iter):
        if not active.any():
            break
        idx = np.where(active)[0]
        wl = w[idx]
        quad = np.einsum("ma,mab,mb->m", np.conj(wl), a[idx], wl).real
        quart, gquart = _quartic_parts(tsym[idx], wl)
        grad = alpha * (np.einsum("mab,mb->ma", a[idx], wl) - quad[:, None] * wl) \
            + beta * (gquart - 2.0 * quart[:, None] * wl)
        # tangent part of the sphere gradient
        grad = grad - (np.einsum("ma,ma->m", np.conj(wl), grad).real)[:, None] * wl
        gnorm = np.linalg.norm(grad, axis=1)
        stationary = gnorm <= 1e-12 * (1.0 + np.abs(val[idx]))
        active[idx[stationary]] = False
        keep = ~stationary
        idx = idx[keep]
        if idx.size == 0:
            continue
        wl, grad = wl[keep], grad[keep] / gnorm[keep][:, None]
        iters[idx] += 1

        unresolved = np.arange(idx.size)
        tau_loc = tau[idx].copy()
        new_w = np.empty_like(wl)
        new_val = np.empty(idx.size)
        succeeded = np.zeros(idx.size, dtype=bool)
        for _bt in range(_MAX_BACKTRACKS):
            if unresolved.size == 0:
                break
            cand = wl[unresolved] + tau_loc[unresolved][:, None] * grad[unresolved]
            cand = cand / np.linalg.norm(cand, axis=1)[:, None]
            cval = _vec_objective(a[idx[unresolved]], tsym[idx[unresolved]], cand,
                                  alpha, beta)
            improved = cval > val[idx[unresolved]] + 1e-15
            hit = unresolved[improved]
            new_w[hit] = cand[improved]
            new_val[hit] = cval[improved]
            succeeded[hit] = True
            unresolved = unresolved[~improved]
            tau_loc[unresolved] *= 0.5
            below = tau_loc[unresolved] < _MIN_STEP
            unresolved = unresolved[~below]
        failed = np.setdiff1d(np.arange(idx.size), np.where(succeeded)[0])
        active[idx[failed]] = False
        ok = np.where(succeeded)[0]
        if ok.size:
            rows = idx[ok]
            gain = new_val[ok] - val[rows]
            w[rows] = new_w[ok]
            val[rows] = new_val[ok]
            tau[rows] = np.minimum(tau_loc[ok] * 2.0, 1.0)
            small = gain <= tol * (1.0 + np.abs(new_val[ok]))
            active[rows[small]] = False
    return val, w, iters
