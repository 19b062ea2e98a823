# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the pointwise maximization kernels.

Same algorithms and step rules as curvgap._ascent_np, specialized to
dimensions n <= 3 with tight per-point loops: cyclic Jacobi for the small
symmetric eigenproblems, Gaussian elimination with partial pivoting for the
Cayley solves.  Semantics are kept in lockstep with the numpy backend so the
two can be compared directly; any drift between them is a bug.
"""

import numpy as np

cimport cython
from libc.math cimport sqrt, fabs

ctypedef double complex dc

cdef double FEAS_TOL = 1e-9
cdef double MIN_STEP = 1e-10
cdef int MAX_BT = 30


cdef inline int i4(int a, int b, int g, int d, int n) noexcept nogil:
    return ((a * n + b) * n + g) * n + d


cdef inline double cnorm2(dc z) noexcept nogil:
    return z.real * z.real + z.imag * z.imag


# -- tiny dense linear algebra ---------------------------------------------------


cdef void _gauss_solve(int n, int m, dc *mat, dc *rhs) noexcept nogil:
    """Solve mat X = rhs in place; mat is n x n, rhs holds m columns (n x m).

    Partial pivoting; mat is destroyed, rhs receives the solution.
    """
    cdef int col, row, piv, k, j
    cdef double best, cand
    cdef dc factor, tmp
    for col in range(n):
        piv = col
        best = cnorm2(mat[col * n + col])
        for row in range(col + 1, n):
            cand = cnorm2(mat[row * n + col])
            if cand > best:
                best = cand
                piv = row
        if piv != col:
            for j in range(n):
                tmp = mat[col * n + j]
                mat[col * n + j] = mat[piv * n + j]
                mat[piv * n + j] = tmp
            for j in range(m):
                tmp = rhs[col * m + j]
                rhs[col * m + j] = rhs[piv * m + j]
                rhs[piv * m + j] = tmp
        for row in range(col + 1, n):
            factor = mat[row * n + col] / mat[col * n + col]
            for j in range(col, n):
                mat[row * n + j] = mat[row * n + j] - factor * mat[col * n + j]
            for j in range(m):
                rhs[row * m + j] = rhs[row * m + j] - factor * rhs[col * m + j]
    for col in range(n - 1, -1, -1):
        for j in range(m):
            tmp = rhs[col * m + j]
            for k in range(col + 1, n):
                tmp = tmp - mat[col * n + k] * rhs[k * m + j]
            rhs[col * m + j] = tmp / mat[col * n + col]


cdef void _jacobi_sym(int n, double *a, double *evals, double *evecs) noexcept nogil:
    """Eigen decomposition of a symmetric n x n matrix, n <= 3.

    Cyclic Jacobi with a fixed sweep budget; `a` is destroyed.  Eigenvalues
    come out ascending with matching eigenvector columns in `evecs`.
    """
    cdef double v[9]
    cdef int i, j, k, sweep, p, q
    cdef double app, aqq, apq, phi, c, s, tau, t, akp, akq, vkp, vkq
    cdef double off
    for i in range(n):
        for j in range(n):
            v[i * n + j] = 1.0 if i == j else 0.0
    for sweep in range(30):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off += fabs(a[p * n + q])
        if off < 1e-15:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p * n + q]
                if fabs(apq) < 1e-18:
                    continue
                app = a[p * n + p]
                aqq = a[q * n + q]
                phi = 0.5 * (aqq - app) / apq
                if phi >= 0.0:
                    t = 1.0 / (phi + sqrt(1.0 + phi * phi))
                else:
                    t = -1.0 / (-phi + sqrt(1.0 + phi * phi))
                c = 1.0 / sqrt(1.0 + t * t)
                s = t * c
                tau = s / (1.0 + c)
                a[p * n + p] = app - t * apq
                a[q * n + q] = aqq + t * apq
                a[p * n + q] = 0.0
                a[q * n + p] = 0.0
                for k in range(n):
                    if k != p and k != q:
                        akp = a[k * n + p]
                        akq = a[k * n + q]
                        a[k * n + p] = akp - s * (akq + tau * akp)
                        a[p * n + k] = a[k * n + p]
                        a[k * n + q] = akq + s * (akp - tau * akq)
                        a[q * n + k] = a[k * n + q]
                for k in range(n):
                    vkp = v[k * n + p]
                    vkq = v[k * n + q]
                    v[k * n + p] = vkp - s * (vkq + tau * vkp)
                    v[k * n + q] = vkq + s * (vkp - tau * vkq)
    # insertion sort ascending
    cdef int order[3]
    cdef double key
    cdef int keyi, pos
    for i in range(n):
        order[i] = i
    for i in range(1, n):
        keyi = order[i]
        key = a[keyi * n + keyi]
        pos = i - 1
        while pos >= 0 and a[order[pos] * n + order[pos]] > key:
            order[pos + 1] = order[pos]
            pos -= 1
        order[pos + 1] = keyi
    for i in range(n):
        evals[i] = a[order[i] * n + order[i]]
        for k in range(n):
            evecs[k * n + i] = v[k * n + order[i]]


# -- inner problem: max of x'Ax over unit nonnegative x --------------------------


cdef double _inner_max(int n, double *a, double *best_vec) noexcept nogil:
    cdef double best_val = -1e308
    cdef double sub[9]
    cdef double evals[3]
    cdef double evecs[9]
    cdef double cand[3]
    cdef int members[3]
    cdef int mask, d, i, j, lead
    cdef double val, norm, top, entry
    cdef bint feasible
    for mask in range(1, 1 << n):
        d = 0
        for i in range(n):
            if mask >> i & 1:
                members[d] = i
                d += 1
        for i in range(n):
            cand[i] = 0.0
        if d == 1:
            cand[members[0]] = 1.0
            val = a[members[0] * n + members[0]]
        else:
            for i in range(d):
                for j in range(d):
                    sub[i * d + j] = a[members[i] * n + members[j]]
            _jacobi_sym(d, sub, evals, evecs)
            # top eigenvector, sign-normalized by its largest-magnitude entry
            lead = 0
            top = fabs(evecs[0 * d + (d - 1)])
            for i in range(1, d):
                entry = fabs(evecs[i * d + (d - 1)])
                if entry > top:
                    top = entry
                    lead = i
            feasible = True
            norm = 0.0
            for i in range(d):
                entry = evecs[i * d + (d - 1)]
                if evecs[lead * d + (d - 1)] < 0.0:
                    entry = -entry
                if entry < -FEAS_TOL:
                    feasible = False
                    break
                if entry < 0.0:
                    entry = 0.0
                cand[members[i]] = entry
                norm += entry * entry
            if not feasible:
                continue
            norm = sqrt(norm)
            if norm == 0.0:
                continue
            for i in range(d):
                cand[members[i]] /= norm
            val = 0.0
            for i in range(n):
                for j in range(n):
                    val += cand[i] * a[i * n + j] * cand[j]
        if val > best_val:
            best_val = val
            for i in range(n):
                best_vec[i] = cand[i]
    return best_val


# -- frame ascent ----------------------------------------------------------------


cdef void _frame_form(int n, dc *tsym, dc *q, double *a_out) noexcept nogil:
    cdef dc xi[27]   # xi[i][a][b]
    cdef dc half[9]        # for one j: half[a][b]
    cdef int i, j, a, b, g, d
    cdef dc acc
    for i in range(n):
        for a in range(n):
            for b in range(n):
                xi[(i * n + a) * n + b] = q[a * n + i] * q[b * n + i].conjugate()
    for j in range(n):
        for a in range(n):
            for b in range(n):
                acc = 0
                for g in range(n):
                    for d in range(n):
                        acc = acc + tsym[i4(a, b, g, d, n)] * xi[(j * n + g) * n + d]
                half[a * n + b] = acc
        for i in range(n):
            acc = 0
            for a in range(n):
                for b in range(n):
                    acc = acc + xi[(i * n + a) * n + b] * half[a * n + b]
            a_out[i * n + j] = acc.real


cdef void _cayley(int n, dc *q, dc *w, double tau, dc *out) noexcept nogil:
    """out = (I - s W)^{-1} (Q + s W Q) with s = tau / 2."""
    cdef dc mat[9]
    cdef int i, j, k
    cdef dc s = tau * 0.5
    cdef dc acc
    for i in range(n):
        for j in range(n):
            mat[i * n + j] = (1.0 if i == j else 0.0) - s * w[i * n + j]
            acc = q[i * n + j]
            for k in range(n):
                acc = acc + s * w[i * n + k] * q[k * n + j]
            out[i * n + j] = acc
    _gauss_solve(n, n, mat, out)


cdef int _rbc_point(int n, int restarts, dc *tsym, dc *starts,
                    double *val_out, dc *frame_out, double *weights_out,
                    int max_iter, double tol) noexcept nogil:
    """Multi-start alternating ascent at one point; returns total iterations."""
    cdef dc q[9]
    cdef dc qc[9]
    cdef dc zeta[9]
    cdef dc lmat[9]
    cdef dc grad[9]
    cdef dc w[9]
    cdef double amat[9]
    cdef double a[3]
    cdef double ac[3]
    cdef double best_val = -1e308
    cdef dc best_q[9]
    cdef double best_a[3]
    cdef int total_iters = 0
    cdef int r, it, bt, i, j, k, g
    cdef double val, wnorm, tau, cval, gain
    cdef dc acc, accb
    cdef bint done, improved
    for r in range(restarts):
        for i in range(n * n):
            q[i] = starts[r * n * n + i]
        _frame_form(n, tsym, q, amat)
        val = _inner_max(n, amat, a)
        tau = 0.5
        done = False
        for it in range(max_iter):
            if done:
                break
            # euclidean gradient at the current weights
            for i in range(n):
                for j in range(n):
                    acc = 0
                    for k in range(n):
                        acc = acc + a[k] * q[i * n + k] * q[j * n + k].conjugate()
                    zeta[i * n + j] = acc
            for i in range(n):
                for j in range(n):
                    acc = 0
                    for k in range(n):
                        for g in range(n):
                            acc = acc + tsym[i4(i, j, k, g, n)] * zeta[k * n + g]
                    lmat[i * n + j] = acc
            for j in range(n):      # grad[b][k] = 2 a_k sum_a L[a][b] q[a][k]
                for k in range(n):
                    acc = 0
                    for i in range(n):
                        acc = acc + lmat[i * n + j] * q[i * n + k]
                    grad[j * n + k] = 2.0 * a[k] * acc
            # W = grad q^dagger - q grad^dagger
            for i in range(n):
                for j in range(n):
                    acc = 0
                    accb = 0
                    for k in range(n):
                        acc = acc + grad[i * n + k] * q[j * n + k].conjugate()
                        accb = accb + q[i * n + k] * grad[j * n + k].conjugate()
                    w[i * n + j] = acc - accb
            wnorm = 0.0
            for i in range(n * n):
                wnorm += cnorm2(w[i])
            wnorm = sqrt(wnorm)
            if wnorm <= 1e-12 * (1.0 + fabs(val)):
                break
            for i in range(n * n):
                w[i] = w[i] / wnorm
            total_iters += 1
            improved = False
            for bt in range(MAX_BT):
                _cayley(n, q, w, tau, qc)
                _frame_form(n, tsym, qc, amat)
                cval = _inner_max(n, amat, ac)
                if cval > val + 1e-15:
                    improved = True
                    break
                tau *= 0.5
                if tau < MIN_STEP:
                    break
            if not improved:
                break
            gain = cval - val
            for i in range(n * n):
                q[i] = qc[i]
            for i in range(n):
                a[i] = ac[i]
            val = cval
            tau = tau * 2.0
            if tau > 1.0:
                tau = 1.0
            if gain <= tol * (1.0 + fabs(val)):
                done = True
        if val > best_val:
            best_val = val
            for i in range(n * n):
                best_q[i] = q[i]
            for i in range(n):
                best_a[i] = a[i]
    val_out[0] = best_val
    for i in range(n * n):
        frame_out[i] = best_q[i]
    for i in range(n):
        weights_out[i] = best_a[i]
    return total_iters


def rbc_max(t, starts, int max_iter=80, double tol=1e-11):
    t = np.ascontiguousarray(t, dtype=np.complex128)
    starts = np.ascontiguousarray(starts, dtype=np.complex128)
    cdef Py_ssize_t b = starts.shape[0]
    cdef int restarts = <int> starts.shape[1]
    cdef int n = <int> starts.shape[2]
    if n < 1 or n > 3:
        raise ValueError(f"kernel supports 1 <= n <= 3, got {n}")
    vals = np.empty(b, dtype=np.float64)
    frames = np.empty((b, n, n), dtype=np.complex128)
    weights = np.empty((b, n), dtype=np.float64)
    iters = np.zeros(b, dtype=np.int64)
    if n == 1:
        vals[:] = t.reshape(b, -1)[:, 0].real
        frames[:] = 1.0
        weights[:] = 1.0
        return vals, frames, weights, iters

    cdef dc[:, :, :, :, ::1] tv = t
    cdef dc[:, :, :, ::1] sv = starts
    cdef double[::1] valv = vals
    cdef dc[:, :, ::1] framev = frames
    cdef double[:, ::1] weightv = weights
    cdef long long[::1] iterv = iters
    cdef dc tsym[81]
    cdef Py_ssize_t p
    cdef int a_, b_, g_, d_
    cdef dc *tp
    cdef dc *sp
    with nogil:
        for p in range(b):
            tp = &tv[p, 0, 0, 0, 0]
            sp = &sv[p, 0, 0, 0]
            for a_ in range(n):
                for b_ in range(n):
                    for g_ in range(n):
                        for d_ in range(n):
                            tsym[i4(a_, b_, g_, d_, n)] = 0.5 * (
                                tp[i4(a_, b_, g_, d_, n)]
                                + tp[i4(g_, d_, a_, b_, n)])
            iterv[p] = _rbc_point(n, restarts, tsym, sp, &valv[p],
                                  &framev[p, 0, 0], &weightv[p, 0],
                                  max_iter, tol)
    return vals, frames, weights, iters


# -- vector ascent ---------------------------------------------------------------


cdef double _vec_value(int n, dc *amat, dc *tsym, dc *w,
                       double alpha, double beta) noexcept nogil:
    cdef dc ww[9]
    cdef int i, j, k, g
    cdef dc acc
    cdef double quad = 0.0, quart = 0.0
    for i in range(n):
        acc = 0
        for k in range(n):
            acc = acc + amat[i * n + k] * w[k]
        quad += (w[i].conjugate() * acc).real
    for i in range(n):
        for j in range(n):
            ww[i * n + j] = w[i] * w[j].conjugate()
    for i in range(n):
        for j in range(n):
            acc = 0
            for k in range(n):
                for g in range(n):
                    acc = acc + tsym[i4(i, j, k, g, n)] * ww[k * n + g]
            quart += (acc * ww[i * n + j]).real
    return alpha * quad + beta * quart


cdef int _vec_point(int n, int restarts, dc *amat, dc *tsym, dc *starts,
                    double alpha, double beta, double *val_out, dc *vec_out,
                    int max_iter, double tol) noexcept nogil:
    cdef dc w[3]
    cdef dc wc[3]
    cdef dc ww[9]
    cdef dc lmat[9]
    cdef dc grad[3]
    cdef double best_val = -1e308
    cdef dc best_w[3]
    cdef int total_iters = 0
    cdef int r, it, bt, i, j, k, g
    cdef double norm, val, quad, quart, gnorm, tau, cval, gain, inner
    cdef dc acc
    cdef bint done, improved
    for r in range(restarts):
        norm = 0.0
        for i in range(n):
            w[i] = starts[r * n + i]
            norm += cnorm2(w[i])
        norm = sqrt(norm)
        for i in range(n):
            w[i] = w[i] / norm
        val = _vec_value(n, amat, tsym, w, alpha, beta)
        tau = 0.5
        done = False
        for it in range(max_iter):
            if done:
                break
            quad = 0.0
            for i in range(n):
                acc = 0
                for k in range(n):
                    acc = acc + amat[i * n + k] * w[k]
                grad[i] = acc
                quad += (w[i].conjugate() * acc).real
            for i in range(n):
                for j in range(n):
                    ww[i * n + j] = w[i] * w[j].conjugate()
            quart = 0.0
            for i in range(n):
                for j in range(n):
                    acc = 0
                    for k in range(n):
                        for g in range(n):
                            acc = acc + tsym[i4(i, j, k, g, n)] * ww[k * n + g]
                    lmat[i * n + j] = acc
                    quart += (acc * ww[i * n + j]).real
            for j in range(n):
                acc = 0
                for i in range(n):
                    acc = acc + lmat[i * n + j] * w[i]
                grad[j] = alpha * (grad[j] - quad * w[j]) \
                    + beta * (2.0 * acc - 2.0 * quart * w[j])
            inner = 0.0
            for i in range(n):
                inner += (w[i].conjugate() * grad[i]).real
            gnorm = 0.0
            for i in range(n):
                grad[i] = grad[i] - inner * w[i]
                gnorm += cnorm2(grad[i])
            gnorm = sqrt(gnorm)
            if gnorm <= 1e-12 * (1.0 + fabs(val)):
                break
            for i in range(n):
                grad[i] = grad[i] / gnorm
            total_iters += 1
            improved = False
            for bt in range(MAX_BT):
                norm = 0.0
                for i in range(n):
                    wc[i] = w[i] + tau * grad[i]
                    norm += cnorm2(wc[i])
                norm = sqrt(norm)
                for i in range(n):
                    wc[i] = wc[i] / norm
                cval = _vec_value(n, amat, tsym, wc, alpha, beta)
                if cval > val + 1e-15:
                    improved = True
                    break
                tau *= 0.5
                if tau < MIN_STEP:
                    break
            if not improved:
                break
            gain = cval - val
            for i in range(n):
                w[i] = wc[i]
            val = cval
            tau = tau * 2.0
            if tau > 1.0:
                tau = 1.0
            if gain <= tol * (1.0 + fabs(val)):
                done = True
        if val > best_val:
            best_val = val
            for i in range(n):
                best_w[i] = w[i]
    val_out[0] = best_val
    for i in range(n):
        vec_out[i] = best_w[i]
    return total_iters


def quartic_vec_max(a, t, starts, double alpha, double beta,
                    int max_iter=80, double tol=1e-11):
    a = np.ascontiguousarray(a, dtype=np.complex128)
    t = np.ascontiguousarray(t, dtype=np.complex128)
    starts = np.ascontiguousarray(starts, dtype=np.complex128)
    cdef Py_ssize_t b = starts.shape[0]
    cdef int restarts = <int> starts.shape[1]
    cdef int n = <int> starts.shape[2]
    if n < 1 or n > 3:
        raise ValueError(f"kernel supports 1 <= n <= 3, got {n}")
    vals = np.empty(b, dtype=np.float64)
    vecs = np.empty((b, n), dtype=np.complex128)
    iters = np.zeros(b, dtype=np.int64)
    tsym_all = 0.5 * (t + t.transpose(0, 3, 4, 1, 2))
    if n == 1:
        vals[:] = alpha * a.reshape(b, -1)[:, 0].real \
            + beta * tsym_all.reshape(b, -1)[:, 0].real
        vecs[:] = 1.0
        return vals, vecs, iters
    if beta == 0.0:
        evals, evecs = np.linalg.eigh(a)
        vals[:] = alpha * evals[:, -1]
        vecs[:] = evecs[:, :, -1]
        return vals, vecs, iters

    tsym_all = np.ascontiguousarray(tsym_all)
    cdef dc[:, :, ::1] av = a
    cdef dc[:, :, :, :, ::1] tv = tsym_all
    cdef dc[:, :, ::1] sv = starts
    cdef double[::1] valv = vals
    cdef dc[:, ::1] vecv = vecs
    cdef long long[::1] iterv = iters
    cdef Py_ssize_t p
    with nogil:
        for p in range(b):
            iterv[p] = _vec_point(n, restarts, &av[p, 0, 0],
                                  &tv[p, 0, 0, 0, 0], &sv[p, 0, 0],
                                  alpha, beta, &valv[p], &vecv[p, 0],
                                  max_iter, tol)
    return vals, vecs, iters
