"""Curvature functionals and their extremal fields.

Pointwise evaluators take a curvature tensor field and a grid index and
contract in the original coordinates.  Extremal operations transport the
tensor to a metric-orthonormal basis, run a seeded multi-start ascent
through the active kernel backend, transport the maximizer back, and
report the value realized by that maximizer, so every reported maximum is
certified from below by an explicit frame, vector, or plane.

Determinism: start frames and start vectors are generated per grid point
from a counter-based stream keyed by (seed, salt, flat point index).  A
single-point call therefore reproduces the corresponding entry of the
full-field call at the same seed and restart count, and results do not
depend on evaluation order or batching.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ParameterError
from .metrics import CurvatureTensorField

_SALT_FRAME = 11
_SALT_VECTOR = 13
_ORTHO_TOL = 1e-8


# ---------------------------------------------------------------------------
# transport to metric-orthonormal coordinates


def transport_matrix(metric) -> np.ndarray:
    """Field of matrices whose columns form a g-orthonormal frame.

    Orthonormality here is the Hermitian-form pairing: columns c_a satisfy
    sum_ij g[i, j] c_a[i] conj(c_b[j]) = delta_ab, i.e. M^T G conj(M) = I.
    With G = L L* (Cholesky, L lower) the choice is M = inv(L)^T.  The
    frame sum over these columns reproduces the inverse-transpose pairing
    that makes the bundle trace of the curvature equal the Ricci form.
    """
    return np.swapaxes(np.linalg.inv(metric.cholesky), -1, -2)


def _rot4(t: np.ndarray, m: np.ndarray) -> np.ndarray:
    mc = np.conj(m)
    out = np.einsum("...ijkl,...ia->...ajkl", t, m)
    out = np.einsum("...ajkl,...jb->...abkl", out, mc)
    out = np.einsum("...abkl,...kc->...abcl", out, m)
    return np.einsum("...abcl,...ld->...abcd", out, mc)


def _rot2(f: np.ndarray, m: np.ndarray) -> np.ndarray:
    return np.einsum("...ij,...ia,...jb->...ab", f, m, np.conj(m))


def orthonormal_tensor(curv: CurvatureTensorField) -> np.ndarray:
    return _rot4(curv.tensor, transport_matrix(curv.metric))


# ---------------------------------------------------------------------------
# pointwise evaluators


def _point_data(curv: CurvatureTensorField, point) -> tuple:
    point = tuple(int(c) for c in point)
    if len(point) != 2 * curv.grid.n:
        raise ParameterError(
            f"point index must have length {2 * curv.grid.n}, got {len(point)}")
    return curv.tensor[point], curv.metric.matrix[point]


def _norm2(g: np.ndarray, v: np.ndarray) -> float:
    return float(np.einsum("i,ij,j->", v, g, np.conj(v)).real)


def hsc(curv: CurvatureTensorField, point, v: np.ndarray) -> float:
    """Holomorphic sectional curvature in the direction v."""
    t, g = _point_data(curv, point)
    v = np.asarray(v, dtype=np.complex128)
    norm2 = _norm2(g, v)
    if norm2 <= 0.0:
        raise ParameterError("direction vector must be nonzero")
    num = np.einsum("ijkl,i,j,k,l->", t, v, np.conj(v), v, np.conj(v)).real
    return float(num / norm2 ** 2)


def rbc(curv: CurvatureTensorField, point, frame: np.ndarray,
        weights: np.ndarray) -> float:
    """Real bisectional curvature of an orthonormal frame with weights.

    The frame is given by columns, which must be orthonormal for the metric
    at the point; weights must be nonnegative and not all zero.
    """
    t, g = _point_data(curv, point)
    frame = np.asarray(frame, dtype=np.complex128)
    weights = np.asarray(weights, dtype=np.float64)
    n = g.shape[0]
    if frame.shape != (n, n):
        raise ParameterError(f"frame must be {n}x{n}, got {frame.shape}")
    gram = np.einsum("ia,ij,jb->ab", frame, g, np.conj(frame))
    if np.max(np.abs(gram - np.eye(n))) > _ORTHO_TOL:
        raise ParameterError("frame columns are not metric-orthonormal")
    if weights.shape != (n,):
        raise ParameterError(f"weights must have shape ({n},)")
    if np.min(weights) < -1e-12:
        raise ParameterError("weights must be nonnegative")
    weights = np.clip(weights, 0.0, None)
    total = float(weights @ weights)
    if total == 0.0:
        raise ParameterError("weights must not all vanish")
    a = np.einsum("ijkl,ia,ja,kb,lb->ab", t, frame, np.conj(frame),
                  frame, np.conj(frame)).real
    return float(weights @ a @ weights / total)


def rbc_tensor(curv: CurvatureTensorField, point, xi: np.ndarray) -> float:
    """Real bisectional curvature evaluated on a nonnegative (1,1) tensor.

    Equivalent to the frame form through the spectral decomposition of xi;
    the normalization uses the metric norm of xi.
    """
    t, g = _point_data(curv, point)
    xi = np.asarray(xi, dtype=np.complex128)
    if np.max(np.abs(xi - np.conj(xi.T))) > 1e-10:
        raise ParameterError("xi must be Hermitian")
    l = np.linalg.cholesky(g)
    xi_on = l.T @ xi @ np.conj(l)
    evals = np.linalg.eigvalsh(xi_on)
    if evals[0] < -1e-10 * max(1.0, evals[-1]):
        raise ParameterError("xi must be positive semidefinite")
    norm2 = float((np.abs(xi_on) ** 2).sum())
    if norm2 == 0.0:
        raise ParameterError("xi must not vanish")
    num = np.einsum("ijkl,ij,kl->", t, xi, xi).real
    return float(num / norm2)


def ric_perp(curv: CurvatureTensorField, point, v: np.ndarray,
             alpha: float, beta: float) -> float:
    """Weighted orthogonal Ricci curvature alpha*Ric(v)/|v|^2 + beta*HSC(v)."""
    _validate_weights_ab(alpha, beta)
    t, g = _point_data(curv, point)
    ric = curv.ricci[tuple(int(c) for c in point)]
    v = np.asarray(v, dtype=np.complex128)
    norm2 = _norm2(g, v)
    if norm2 <= 0.0:
        raise ParameterError("direction vector must be nonzero")
    quad = np.einsum("ij,i,j->", ric, v, np.conj(v)).real / norm2
    return float(alpha * quad + beta * hsc(curv, point, v))


def k_ricci(curv: CurvatureTensorField, point, plane: np.ndarray,
            v: np.ndarray) -> float:
    """k-Ricci curvature: trace of R(v, vbar, ., .) over a k-plane.

    The plane is given by metric-orthonormal basis columns and must contain
    v.  The result is divided by the metric norm squared of v.
    """
    t, g = _point_data(curv, point)
    plane = np.asarray(plane, dtype=np.complex128)
    v = np.asarray(v, dtype=np.complex128)
    n = g.shape[0]
    if plane.ndim != 2 or plane.shape[0] != n:
        raise ParameterError(f"plane basis must be {n}xk")
    k = plane.shape[1]
    if not 1 <= k <= n:
        raise ParameterError(f"plane dimension must lie in [1, {n}]")
    gram = np.einsum("ia,ij,jb->ab", plane, g, np.conj(plane))
    if np.max(np.abs(gram - np.eye(k))) > _ORTHO_TOL:
        raise ParameterError("plane basis columns are not metric-orthonormal")
    norm2 = _norm2(g, v)
    if norm2 <= 0.0:
        raise ParameterError("direction vector must be nonzero")
    coeff = np.einsum("i,ij,ja->a", v, g, np.conj(plane))
    resid = v - plane @ coeff
    rnorm2 = _norm2(g, resid)
    if rnorm2 > (_ORTHO_TOL ** 2) * norm2:
        raise ParameterError("v does not lie in the span of the plane")
    w = np.einsum("ijkl,i,j->kl", t, v, np.conj(v))
    val = np.einsum("kl,ka,la->", w, plane, np.conj(plane)).real
    return float(val / norm2)


def _validate_weights_ab(alpha: float, beta: float) -> None:
    if alpha < 0.0 or beta < 0.0 or alpha + beta == 0.0:
        raise ParameterError(
            "weights must satisfy alpha >= 0, beta >= 0, alpha + beta > 0")


# ---------------------------------------------------------------------------
# deterministic multi-start seeding


def _point_generator(seed: int, salt: int, flat_index: int):
    key = np.array([np.uint64(seed) ^ (np.uint64(salt) << np.uint64(48)),
                    np.uint64(flat_index)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _start_frames(seed: int, flat_indices: np.ndarray, restarts: int,
                  n: int) -> np.ndarray:
    b = flat_indices.shape[0]
    z = np.empty((b, restarts, n, n), dtype=np.complex128)
    for row, flat in enumerate(flat_indices):
        g = _point_generator(seed, _SALT_FRAME, int(flat))
        z[row] = (g.standard_normal((restarts, n, n))
                  + 1j * g.standard_normal((restarts, n, n)))
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=-2, axis2=-1).copy()
    d[np.abs(d) == 0.0] = 1.0
    return q * (d / np.abs(d))[..., None, :]


def _start_vectors(seed: int, flat_indices: np.ndarray, restarts: int,
                   n: int) -> np.ndarray:
    b = flat_indices.shape[0]
    z = np.empty((b, restarts, n), dtype=np.complex128)
    for row, flat in enumerate(flat_indices):
        g = _point_generator(seed, _SALT_VECTOR, int(flat))
        z[row] = (g.standard_normal((restarts, n))
                  + 1j * g.standard_normal((restarts, n)))
    return z / np.linalg.norm(z, axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# extremal results


@dataclass
class CurvatureExtremum:
    """A realized maximum of a curvature functional at one grid point."""

    value: float
    point: tuple
    frame: np.ndarray | None = None
    weights: np.ndarray | None = None
    vector: np.ndarray | None = None
    plane: np.ndarray | None = None
    iterations: int = 0
    restarts: int = 0


@dataclass
class ExtremalField:
    """Per-point maxima of a curvature functional over the grid.

    ``max_field`` holds the plain maximum; ``weighted_field``, when present,
    applies the sign-dependent branch weight.  Points excluded by a mask
    hold NaN.
    """

    kind: str
    max_field: np.ndarray
    weighted_field: np.ndarray | None
    global_max: float
    argmax: tuple
    params: dict = field(default_factory=dict)


def rho_rbc(values: np.ndarray, n: int) -> np.ndarray:
    return np.where(np.asarray(values) <= 0.0, 1.0 / n, 1.0)


def rho_orth(values: np.ndarray, n: int) -> np.ndarray:
    return np.where(np.asarray(values) <= 0.0, n + 1.0, 2.0 * n)


# ---------------------------------------------------------------------------
# core batched drivers


def _gather(curv: CurvatureTensorField, flat_indices: np.ndarray) -> tuple:
    n = curv.grid.n
    t_on = orthonormal_tensor(curv).reshape(-1, n, n, n, n)[flat_indices]
    m = transport_matrix(curv.metric).reshape(-1, n, n)[flat_indices]
    return t_on, m


def _realized_rbc(curv, flat_indices, frames, weights) -> np.ndarray:
    n = curv.grid.n
    t = curv.tensor.reshape((-1,) + (n,) * 4)[flat_indices]
    a = np.einsum("mijkl,mia,mja,mkb,mlb->mab", t, frames, np.conj(frames),
                  frames, np.conj(frames)).real
    num = np.einsum("ma,mab,mb->m", weights, a, weights)
    return num / (weights * weights).sum(axis=1)


def _max_rbc_core(curv: CurvatureTensorField, flat_indices: np.ndarray,
                  restarts: int, seed: int, max_iter: int, tol: float) -> tuple:
    n = curv.grid.n
    t_on, m = _gather(curv, flat_indices)
    starts = _start_frames(seed, flat_indices, restarts, n)
    vals, q, a, iters = kernels.rbc_max(t_on, starts, max_iter=max_iter, tol=tol)
    frames = m @ q
    norm = np.linalg.norm(a, axis=1, keepdims=True)
    norm[norm == 0.0] = 1.0
    weights = a / norm
    realized = _realized_rbc(curv, flat_indices, frames, weights)
    return realized, frames, weights, iters


def max_rbc_at_point(curv: CurvatureTensorField, point, restarts: int = 64,
                     seed: int = 0, max_iter: int = 80,
                     tol: float = 1e-11) -> CurvatureExtremum:
    point = tuple(int(c) for c in point)
    flat = np.array([np.ravel_multi_index(point, curv.grid.shape)])
    vals, frames, weights, iters = _max_rbc_core(
        curv, flat, restarts, seed, max_iter, tol)
    return CurvatureExtremum(value=float(vals[0]), point=point,
                             frame=frames[0], weights=weights[0],
                             iterations=int(iters[0]), restarts=restarts)


def max_rbc_field(curv: CurvatureTensorField, restarts: int = 64,
                  seed: int = 0, max_iter: int = 80, tol: float = 1e-11,
                  mask: np.ndarray | None = None) -> ExtremalField:
    """Per-point maximum real bisectional curvature, optionally on a mask."""
    vals = _masked_field_eval(curv, restarts, seed, max_iter, tol, mask,
                              _max_rbc_core)
    return _finish_field("rbc", curv, vals, rho_rbc,
                         dict(restarts=restarts, seed=seed,
                              backend=kernels.BACKEND))


def kappa_field(curv: CurvatureTensorField, restarts: int = 64, seed: int = 0,
                max_iter: int = 80, tol: float = 1e-11,
                mask: np.ndarray | None = None) -> ExtremalField:
    """Branch-weighted maximum real bisectional curvature field."""
    return max_rbc_field(curv, restarts, seed, max_iter, tol, mask)


def mu_eta(extremal: ExtremalField) -> float:
    """Global unweighted maximum of a real bisectional extremal field."""
    return extremal.global_max


def _masked_field_eval(curv, restarts, seed, max_iter, tol, mask, core) -> np.ndarray:
    shape = curv.grid.shape
    total = int(np.prod(shape))
    if mask is None:
        flat = np.arange(total)
    else:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != shape:
            raise ParameterError(
                f"mask shape {mask.shape} does not match grid shape {shape}")
        flat = np.where(mask.reshape(-1))[0]
        if flat.size == 0:
            raise ParameterError("mask selects no grid points")
    vals = np.full(total, np.nan)
    vals[flat] = core(curv, flat, restarts, seed, max_iter, tol)[0]
    return vals.reshape(shape)


def _finish_field(kind, curv, vals, rho, params) -> ExtremalField:
    n = curv.grid.n
    finite = np.where(np.isnan(vals), -np.inf, vals)
    argmax = tuple(int(c) for c in
                   np.unravel_index(int(np.argmax(finite)), vals.shape))
    if rho is None:
        weighted = None
    else:
        weighted = np.where(np.isnan(vals), np.nan, rho(finite, n) * vals)
    return ExtremalField(kind=kind, max_field=vals, weighted_field=weighted,
                         global_max=float(finite.max()), argmax=argmax,
                         params=params)


# ---------------------------------------------------------------------------
# weighted orthogonal Ricci


def _max_ric_perp_core_factory(alpha: float, beta: float):
    def core(curv, flat_indices, restarts, seed, max_iter, tol):
        n = curv.grid.n
        t_on, m = _gather(curv, flat_indices)
        ric = curv.ricci.reshape(-1, n, n)[flat_indices]
        a_on = np.conj(_rot2(ric, m))
        starts = _start_vectors(seed, flat_indices, restarts, n)
        vals, w, iters = kernels.quartic_vec_max(
            a_on, t_on, starts, alpha, beta, max_iter=max_iter, tol=tol)
        vecs = np.einsum("mij,mj->mi", m, w)
        realized = np.array([
            _ric_perp_flat(curv, int(f), vecs[row], alpha, beta)
            for row, f in enumerate(flat_indices)])
        return realized, vecs, iters
    return core


def _ric_perp_flat(curv, flat, v, alpha, beta) -> float:
    point = tuple(int(c) for c in np.unravel_index(flat, curv.grid.shape))
    return ric_perp(curv, point, v, alpha, beta)


def max_ric_perp_at_point(curv: CurvatureTensorField, point, alpha: float,
                          beta: float, restarts: int = 32, seed: int = 0,
                          max_iter: int = 80,
                          tol: float = 1e-11) -> CurvatureExtremum:
    _validate_weights_ab(alpha, beta)
    point = tuple(int(c) for c in point)
    flat = np.array([np.ravel_multi_index(point, curv.grid.shape)])
    core = _max_ric_perp_core_factory(alpha, beta)
    vals, vecs, iters = core(curv, flat, restarts, seed, max_iter, tol)
    return CurvatureExtremum(value=float(vals[0]), point=point,
                             vector=vecs[0], iterations=int(iters[0]),
                             restarts=restarts)


def ric_perp_field(curv: CurvatureTensorField, alpha: float, beta: float,
                   restarts: int = 32, seed: int = 0, max_iter: int = 80,
                   tol: float = 1e-11,
                   mask: np.ndarray | None = None) -> ExtremalField:
    """Per-point maximum weighted orthogonal Ricci curvature.

    The weighted companion field applies the sign-dependent branch factor;
    the global maximum of ``max_field`` is the constant usually written as
    the extremal bound of the whole manifold.
    """
    _validate_weights_ab(alpha, beta)
    core = _max_ric_perp_core_factory(alpha, beta)
    vals = _masked_field_eval(curv, restarts, seed, max_iter, tol, mask, core)
    return _finish_field("ric_perp", curv, vals, rho_orth,
                         dict(alpha=alpha, beta=beta, restarts=restarts,
                              seed=seed, backend=kernels.BACKEND))


def lambda_max(extremal: ExtremalField) -> float:
    """Global maximum of a weighted orthogonal Ricci extremal field."""
    return extremal.global_max


def tau_field(curv: CurvatureTensorField, alpha: float, beta: float,
              **kwargs) -> ExtremalField:
    """Alias of ric_perp_field; the weighted companion is the tau field."""
    return ric_perp_field(curv, alpha, beta, **kwargs)


# ---------------------------------------------------------------------------
# k-Ricci


def _base_trace_on(t_on: np.ndarray) -> np.ndarray:
    return np.einsum("...abgg->...ab", t_on)


def _k_plane_value(tsym: np.ndarray, w: np.ndarray, k: int) -> tuple:
    """Exact plane choice for fixed unit direction, batched.

    Returns (values, plane columns in orthonormal coordinates including w
    first).  The direction eigenvalue is pushed below the spectrum so the
    top k-1 eigenvectors of the projected base form stay orthogonal to w.
    """
    m, n = w.shape[0], w.shape[1]
    q = np.einsum("mabgd,ma,mb->mgd", tsym, w, np.conj(w))
    qmat = np.conj(q)
    own = np.einsum("ma,mab,mb->m", np.conj(w), qmat, w).real
    proj = np.eye(n) - np.einsum("ma,mb->mab", w, np.conj(w))
    shift = 1.0 + 2.0 * np.sqrt((np.abs(qmat) ** 2).sum(axis=(1, 2)))
    pm = proj @ qmat @ proj - shift[:, None, None] * \
        np.einsum("ma,mb->mab", w, np.conj(w))
    evals, evecs = np.linalg.eigh(pm)
    top_vecs = evecs[:, :, n - k + 1:]
    vals = own + evals[:, n - k + 1:].sum(axis=1)
    plane = np.concatenate([w[:, :, None], top_vecs], axis=2)
    return vals, plane


def _k_middle_single(tsym: np.ndarray, w: np.ndarray, k: int, max_iter: int,
                     tol: float) -> tuple:
    """Alternating ascent for 1 < k < n: exact plane step, vector line step."""
    m, n = w.shape[0], w.shape[1]
    w = w / np.linalg.norm(w, axis=1)[:, None]
    val, plane = _k_plane_value(tsym, w, k)
    tau = np.full(m, 0.5)
    active = np.ones(m, dtype=bool)
    iters = np.zeros(m, dtype=np.int64)
    for _ in range(max_iter):
        if not active.any():
            break
        idx = np.where(active)[0]
        wl = w[idx]
        basis = plane[idx][:, :, 1:]
        kmat = np.einsum("mabgd,mgj,mdj->mab", tsym[idx], basis, np.conj(basis))
        a_eff = np.conj(kmat)
        quad = np.einsum("ma,mab,mb->m", np.conj(wl), a_eff, wl).real
        ww = np.einsum("ma,mb->mab", wl, np.conj(wl))
        lmat = np.einsum("mabgd,mgd->mab", tsym[idx], ww)
        quart = np.einsum("mab,mab->m", lmat, ww).real
        grad = (np.einsum("mab,mb->ma", a_eff, wl) - quad[:, None] * wl) \
            + (2.0 * np.einsum("mab,ma->mb", lmat, wl) - 2.0 * quart[:, None] * wl)
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
        new_plane = np.empty((idx.size, n, k), dtype=np.complex128)
        succeeded = np.zeros(idx.size, dtype=bool)
        for _bt in range(30):
            if unresolved.size == 0:
                break
            cand = wl[unresolved] + tau_loc[unresolved][:, None] * grad[unresolved]
            cand = cand / np.linalg.norm(cand, axis=1)[:, None]
            cval, cplane = _k_plane_value(tsym[idx[unresolved]], cand, k)
            improved = cval > val[idx[unresolved]] + 1e-15
            hit = unresolved[improved]
            new_w[hit] = cand[improved]
            new_val[hit] = cval[improved]
            new_plane[hit] = cplane[improved]
            succeeded[hit] = True
            unresolved = unresolved[~improved]
            tau_loc[unresolved] *= 0.5
            unresolved = unresolved[tau_loc[unresolved] >= 1e-10]
        failed = np.setdiff1d(np.arange(idx.size), np.where(succeeded)[0])
        active[idx[failed]] = False
        ok = np.where(succeeded)[0]
        if ok.size:
            rows = idx[ok]
            gain = new_val[ok] - val[rows]
            w[rows] = new_w[ok]
            val[rows] = new_val[ok]
            plane[rows] = new_plane[ok]
            tau[rows] = np.minimum(tau_loc[ok] * 2.0, 1.0)
            small = gain <= tol * (1.0 + np.abs(new_val[ok]))
            active[rows[small]] = False
    return val, w, plane, iters


def _max_k_ricci_core_factory(k: int):
    def core(curv, flat_indices, restarts, seed, max_iter, tol):
        n = curv.grid.n
        if not 1 <= k <= n:
            raise ParameterError(f"k must lie in [1, {n}], got {k}")
        t_on, m = _gather(curv, flat_indices)
        tsym = 0.5 * (t_on + t_on.transpose(0, 3, 4, 1, 2))
        if k == n:
            s = _base_trace_on(t_on)
            evals, evecs = np.linalg.eigh(np.conj(s))
            vals = evals[:, -1]
            w = evecs[:, :, -1]
            plane_on = np.broadcast_to(np.eye(n), (flat_indices.shape[0], n, n))
            vecs = np.einsum("mij,mj->mi", m, w)
            planes = m @ plane_on
            return vals, vecs, planes, np.zeros(flat_indices.shape[0], np.int64)
        if k == 1:
            starts = _start_vectors(seed, flat_indices, restarts, n)
            vals, w, iters = kernels.quartic_vec_max(
                np.zeros_like(m), t_on, starts, 0.0, 1.0,
                max_iter=max_iter, tol=tol)
            vecs = np.einsum("mij,mj->mi", m, w)
            return vals, vecs, vecs[:, :, None], iters
        starts = _start_vectors(seed, flat_indices, restarts, n)
        b = flat_indices.shape[0]
        best_val = np.full(b, -np.inf)
        best_w = np.empty((b, n), dtype=np.complex128)
        best_plane = np.empty((b, n, k), dtype=np.complex128)
        total = np.zeros(b, dtype=np.int64)
        for j in range(restarts):
            val, w, plane, iters = _k_middle_single(
                tsym, starts[:, j].copy(), k, max_iter, tol)
            total += iters
            better = val > best_val
            best_val = np.where(better, val, best_val)
            best_w = np.where(better[:, None], w, best_w)
            best_plane = np.where(better[:, None, None], plane, best_plane)
        vecs = np.einsum("mij,mj->mi", m, best_w)
        planes = m @ best_plane
        return best_val, vecs, planes, total
    return core


def max_k_ricci_at_point(curv: CurvatureTensorField, point, k: int,
                         restarts: int = 32, seed: int = 0, max_iter: int = 80,
                         tol: float = 1e-11) -> CurvatureExtremum:
    point = tuple(int(c) for c in point)
    flat = np.array([np.ravel_multi_index(point, curv.grid.shape)])
    core = _max_k_ricci_core_factory(k)
    vals, vecs, planes, iters = core(curv, flat, restarts, seed, max_iter, tol)
    value = k_ricci(curv, point, planes[0], vecs[0])
    return CurvatureExtremum(value=value, point=point, vector=vecs[0],
                             plane=planes[0], iterations=int(iters[0]),
                             restarts=restarts)


def k_ricci_field(curv: CurvatureTensorField, k: int, restarts: int = 32,
                  seed: int = 0, max_iter: int = 80, tol: float = 1e-11,
                  mask: np.ndarray | None = None) -> ExtremalField:
    """Per-point maximum k-Ricci curvature.

    k = 1 reduces to the holomorphic sectional maximum and k = n to an
    exact eigenvalue problem; intermediate k runs the alternating ascent,
    which is the costly case on large grids.
    """
    core = _max_k_ricci_core_factory(k)

    def value_core(c, flat, r, s, mi, tl):
        vals = core(c, flat, r, s, mi, tl)[0]
        return (vals,)
    vals = _masked_field_eval(curv, restarts, seed, max_iter, tol, mask,
                              value_core)
    return _finish_field("k_ricci", curv, vals, None,
                         dict(k=k, restarts=restarts, seed=seed,
                              backend=kernels.BACKEND))
