"""Damped Newton solver and decreasing-t continuation for the path equations.

The two path modes share one scalar equation per parameter value t,

    (chi_t + ddc phi)^n = F e^{c phi} omega0^n,

written and solved in log-determinant form.  Mode ``thm1`` uses the reference
form chi_t = t (omega0 + ddc(psi)/delta1) - Ric(omega0) with exponent c = 1;
mode ``thm2`` uses chi_t = t omega0 - Ric(omega0) with c = 1 + alpha/(2 beta).
The optional factor F (given as log F) exists for manufactured-solution
testing and is identically one on real runs.

Each Newton step solves the linearization

    (Lap_{omega_phi} - c) dphi = -r,      r = log det(chi + ddc phi)
                                              - log det g0 - c phi - log F,

with a Krylov method preconditioned by the constant-coefficient symbol of the
current metric, then damps by backtracking until the residual sup-norm drops
and the new form stays positive definite.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.sparse.linalg import LinearOperator, lgmres

from .errors import (LinearSolveFailure, MaxIterExceeded, ParameterError,
                     PositivityLoss)
from .grid import Grid
from .metrics import MetricField, TrigExpr, rel_eigvalsh, ricci_form

_MODES = ("thm1", "thm2")


def trace_against(inverse: np.ndarray, hermitian: np.ndarray) -> np.ndarray:
    """Contraction g^{i jbar} H_{i jbar} for matrix fields, real-valued.

    ``inverse`` holds the matrix inverse of the metric samples; the pairing
    that realizes the analytic trace is inverse[j, i] * H[i, j].
    """
    return np.einsum("...ji,...ij->...", inverse, hermitian).real


@dataclass
class MAProblem:
    """One parameter value of the path equation, ready to solve."""

    mode: str
    t: float
    c: float
    chi: np.ndarray
    background: MetricField
    log_forcing: Optional[np.ndarray] = None
    psi: Optional[np.ndarray] = None
    delta1: float = 1.0
    params: dict = field(default_factory=dict)

    @property
    def grid(self) -> Grid:
        return self.background.grid

    @property
    def min_eig_chi(self) -> float:
        """Smallest eigenvalue of chi relative to the background metric."""
        return float(rel_eigvalsh(self.chi, self.background.matrix)[..., 0].min())

    def potential_u(self, phi: np.ndarray) -> np.ndarray:
        """The comparison potential: phi plus the psi tilt in thm1 mode."""
        if self.mode == "thm1" and self.psi is not None:
            return phi + (self.t / self.delta1) * self.psi
        return np.asarray(phi)


def _psi_on_grid(psi, grid: Grid) -> Optional[np.ndarray]:
    if psi is None:
        return None
    vals = psi.on_grid(grid) if isinstance(psi, TrigExpr) else np.asarray(psi, float)
    if vals.shape != grid.shape:
        raise ParameterError(
            f"psi shape {vals.shape} does not match grid shape {grid.shape}")
    return vals - vals.max()


def assemble_problem(omega0: MetricField, mode: str, t: float,
                     alpha: float = 1.0, beta: float = 1.0,
                     delta1: float = 1.0, psi=None,
                     log_forcing: Optional[np.ndarray] = None) -> MAProblem:
    """Build the reference form and exponent for one parameter value."""
    if mode not in _MODES:
        raise ParameterError(f"mode must be one of {_MODES}, got {mode!r}")
    if t <= 0:
        raise ParameterError(f"path parameter t must be positive, got {t}")
    grid = omega0.grid
    ric = ricci_form(omega0)
    psi_vals = _psi_on_grid(psi, grid)
    if mode == "thm1":
        if delta1 <= 0:
            raise ParameterError(f"delta1 must be positive, got {delta1}")
        chi = t * omega0.matrix - ric
        if psi_vals is not None:
            chi = chi + (t / delta1) * grid.ddc(psi_vals)
        c = 1.0
        params = {"delta1": delta1}
    else:
        if beta <= 0:
            raise ParameterError(
                f"thm2 mode needs beta > 0 for a finite exponent, got beta = {beta}")
        if alpha < 0:
            raise ParameterError(f"alpha must be nonnegative, got {alpha}")
        chi = t * omega0.matrix - ric
        c = 1.0 + alpha / (2.0 * beta)
        params = {"alpha": alpha, "beta": beta}
        psi_vals = None
    if log_forcing is not None:
        log_forcing = np.asarray(log_forcing, dtype=float)
        if log_forcing.shape != grid.shape:
            raise ParameterError(
                f"forcing shape {log_forcing.shape} does not match grid")
    return MAProblem(mode=mode, t=float(t), c=float(c), chi=chi,
                     background=omega0, log_forcing=log_forcing,
                     psi=psi_vals, delta1=float(delta1), params=params)


def _det_herm(w: np.ndarray) -> np.ndarray:
    """Real determinant of a Hermitian matrix field, expanded for n <= 3."""
    n = w.shape[-1]
    if n == 1:
        return w[..., 0, 0].real
    if n == 2:
        return (w[..., 0, 0] * w[..., 1, 1] - w[..., 0, 1] * w[..., 1, 0]).real
    if n == 3:
        a, b, c = w[..., 0, 0], w[..., 0, 1], w[..., 0, 2]
        d, e, f = w[..., 1, 0], w[..., 1, 1], w[..., 1, 2]
        g, h, i = w[..., 2, 0], w[..., 2, 1], w[..., 2, 2]
        return (a * (e * i - f * h) - b * (d * i - f * g)
                + c * (d * h - e * g)).real
    return np.linalg.det(w).real


def _pd_with_floor(w: np.ndarray, g0: np.ndarray, floor: float) -> bool:
    """True iff w - floor*g0 is positive definite at every point.

    Sylvester's criterion on leading principal minors; equivalent to the
    smallest eigenvalue of w relative to g0 exceeding the floor, but costs
    only determinants.
    """
    a = w - floor * g0
    if not (a[..., 0, 0].real > 0).all():
        return False
    n = a.shape[-1]
    if n == 1:
        return True
    d2 = (a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0]).real
    if not (d2 > 0).all():
        return False
    if n == 2:
        return True
    return bool((_det_herm(a) > 0).all())


def _hessian_trace_maker(grid: Grid):
    """Spectral kernels for the linearized operator and its preconditioner.

    Returns (lap, mean_symbol).  lap(inv_w, v) computes
    sum_{ij} inv_w[j,i] d_i dbar_j v with one forward FFT; the diagonal
    symbols are real, and for real input the off-diagonal Hessian entries
    pair into conjugates, so only the upper triangle is transformed back.
    mean_symbol(m) is the full-grid Fourier symbol of the constant-
    coefficient operator with Hermitian coefficient matrix m, used to build
    a preconditioner matched to the mean metric including its anisotropy.
    """
    sigma, tau = grid.deriv_symbols()
    n = grid.n
    diag_syms = [(sigma[i] * tau[i]).real for i in range(n)]
    cross_syms = {(i, j): sigma[i] * tau[j]
                  for i in range(n) for j in range(i + 1, n)}

    def lap(inv_w, v):
        vhat = np.fft.fftn(v)
        out = np.zeros(grid.shape)
        for i in range(n):
            h = np.fft.ifftn(vhat * diag_syms[i]).real
            out += inv_w[..., i, i].real * h
        for (i, j), sym in cross_syms.items():
            h = np.fft.ifftn(vhat * sym)
            out += 2.0 * (inv_w[..., j, i] * h).real
        return out

    def mean_symbol(m):
        out = np.zeros(grid.shape)
        for i in range(n):
            out = out + m[i, i].real * diag_syms[i]
        for (i, j), sym in cross_syms.items():
            out = out + 2.0 * (m[j, i] * sym).real
        return out

    return lap, mean_symbol


def solve_ma(problem: MAProblem, phi_init: Optional[np.ndarray] = None,
             tol: float = 1e-10, max_iter: int = 50,
             positivity_floor: float = 1e-6,
             krylov_maxiter: int = 200) -> tuple:
    """Damped Newton iteration on the log-determinant residual.

    Returns (phi, stats) where stats records the residual history, damping
    activity, and the final positivity margin.  Raises PositivityLoss when
    no step length keeps the form positive definite (the numerical signature
    of running past the path's existence range), MaxIterExceeded when the
    residual stagnates or the iteration budget runs out, LinearSolveFailure
    when the inner Krylov solve does not converge.
    """
    grid = problem.grid
    g0 = problem.background.matrix
    logdet0 = np.log(problem.background.det)
    c = problem.c
    lf = problem.log_forcing
    shape = grid.shape
    npts = grid.npoints

    phi = np.zeros(shape) if phi_init is None else np.asarray(phi_init, float).copy()
    if phi.shape != shape:
        raise ParameterError(f"phi_init shape {phi.shape} does not match grid")

    def omega_of(p):
        return problem.chi + grid.ddc(p)

    def min_rel_eig(w):
        return float(rel_eigvalsh(w, g0)[..., 0].min())

    def residual_of(w, p):
        r = np.log(_det_herm(w)) - logdet0 - c * p
        if lf is not None:
            r = r - lf
        return r

    w = omega_of(phi)
    if not _pd_with_floor(w, g0, positivity_floor):
        raise PositivityLoss(
            f"initial iterate inadmissible at t = {problem.t:g}: min relative "
            f"eigenvalue {min_rel_eig(w):.3e} <= floor {positivity_floor:g} "
            "(the path may already be past its existence range)")

    r = residual_of(w, phi)
    rnorm = float(np.max(np.abs(r)))
    history = [rnorm]
    damped = 0
    hess_trace, mean_symbol = _hessian_trace_maker(grid)

    for _ in range(max_iter):
        if rnorm <= tol:
            break
        inv_w = np.linalg.inv(w)

        def matvec(v):
            vv = v.reshape(shape)
            return (hess_trace(inv_w, vv) - c * vv).ravel()

        mean_inv = inv_w.reshape(-1, grid.n, grid.n).mean(axis=0)
        denom = mean_symbol(mean_inv) - c

        def precond(v):
            vhat = np.fft.fftn(v.reshape(shape))
            return np.real(np.fft.ifftn(vhat / denom)).ravel()

        op = LinearOperator((npts, npts), matvec=matvec, dtype=float)
        pre = LinearOperator((npts, npts), matvec=precond, dtype=float)
        # Eisenstat-Walker style forcing with an oversolving guard: the
        # inner solve never asks for more accuracy than the outer target
        # needs one quadratic step from now.
        forcing = min(1e-2, max(0.5 * rnorm, 0.25 * tol / rnorm))
        forcing = min(forcing, 0.5)
        step, info = lgmres(op, -r.ravel(), M=pre, rtol=forcing, atol=0.0,
                            maxiter=krylov_maxiter)
        if info != 0:
            raise LinearSolveFailure(
                f"Krylov solve failed (info = {info}) at t = {problem.t:g}, "
                f"residual {rnorm:.3e}, min relative eigenvalue {min_rel_eig(w):.3e}")
        step = step.reshape(shape)

        lam = 1.0
        admissible_seen = False
        accepted = False
        while lam >= 1e-8:
            cand = phi + lam * step
            wc = omega_of(cand)
            if _pd_with_floor(wc, g0, positivity_floor):
                admissible_seen = True
                rc = residual_of(wc, cand)
                rcn = float(np.max(np.abs(rc)))
                if rcn <= (1.0 - 0.25 * lam) * rnorm:
                    accepted = True
                    break
            lam *= 0.5
        if not accepted:
            if not admissible_seen:
                raise PositivityLoss(
                    f"no admissible step length at t = {problem.t:g}: every "
                    f"damping keeps min relative eigenvalue <= {positivity_floor:g} "
                    "(path approaching degeneracy)")
            raise MaxIterExceeded(
                f"residual stagnated at {rnorm:.3e} at t = {problem.t:g} "
                f"(min relative eigenvalue {min_rel_eig(w):.3e})",
                residual=rnorm)
        if lam < 1.0:
            damped += 1
        phi, w, r, rnorm = cand, wc, rc, rcn
        history.append(rnorm)

    if rnorm > tol:
        raise MaxIterExceeded(
            f"Newton did not reach tol {tol:g} within {max_iter} iterations "
            f"at t = {problem.t:g}; residual {rnorm:.3e}", residual=rnorm)

    stats = {
        "iterations": len(history) - 1,
        "residual": rnorm,
        "residual_history": history,
        "damped_steps": damped,
        "min_rel_eig": min_rel_eig(w),
    }
    return phi, stats


@dataclass(frozen=True)
class Schedule:
    """Decreasing-t walk: start, end, nominal step count, shrink floor."""

    t_start: float
    t_end: float
    steps: int = 10
    min_step_factor: float = 2.0 ** -8

    def __post_init__(self):
        if self.t_end <= 0 or self.t_start <= self.t_end:
            raise ParameterError(
                f"need t_start > t_end > 0, got {self.t_start} -> {self.t_end}")
        if self.steps < 1:
            raise ParameterError(f"steps must be >= 1, got {self.steps}")

    @property
    def initial_step(self) -> float:
        return (self.t_start - self.t_end) / self.steps

    def to_dict(self) -> dict:
        return {"t_start": self.t_start, "t_end": self.t_end,
                "steps": self.steps, "min_step_factor": self.min_step_factor}


@dataclass
class PathSample:
    t: float
    phi: np.ndarray
    u: np.ndarray
    diagnostics: dict


@dataclass
class ContinuityPath:
    """Record of a completed (or interrupted) continuation run."""

    mode: str
    c: float
    samples: list
    schedule: Schedule
    termination: str
    params: dict = field(default_factory=dict)

    @property
    def ts(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])


def _threshold(mode: str, n: int, delta1: float, alpha: float,
               mu: Optional[float], lam: Optional[float]) -> Optional[float]:
    if mode == "thm1":
        if mu is None:
            return None
        return n * delta1 * mu
    if alpha == 0.0:
        return None
    if lam is None:
        return None
    return 2.0 * n * lam / ((n + 1.0) * alpha) if lam >= 0 else 0.0


def _diagnostics(problem: MAProblem, phi: np.ndarray, stats: dict,
                 eta_matrix: np.ndarray) -> dict:
    grid = problem.grid
    w = problem.chi + grid.ddc(phi)
    inv_w = np.linalg.inv(w)
    u = problem.potential_u(phi)
    return {
        "sup_u": float(u.max()),
        "min_eig": float(rel_eigvalsh(w, problem.background.matrix)[..., 0].min()),
        "sup_tr_eta": float(trace_against(inv_w, eta_matrix).max()),
        "int_exp_u": float(grid.integrate(np.exp(u) * problem.background.det)),
        "int_exp_cu": float(grid.integrate(np.exp(problem.c * phi)
                                           * problem.background.det)),
        "newton_iters": int(stats["iterations"]),
        "residual": float(stats["residual"]),
    }


def run_continuation(omega0: MetricField, mode: str, schedule: Schedule,
                     alpha: float = 1.0, beta: float = 1.0,
                     delta1: float = 1.0, psi=None,
                     eta: Optional[MetricField] = None,
                     mu: Optional[float] = None, lam: Optional[float] = None,
                     tol: float = 1e-10, max_iter: int = 50,
                     positivity_floor: float = 1e-6,
                     degeneracy_floor: float = 1e-6,
                     on_sample=None) -> ContinuityPath:
    """Warm-started decreasing-t continuation.

    ``mu`` (extremal-field maximum, thm1) and ``lam`` (thm2) feed the
    existence-threshold precondition; pass None to skip the check when the
    value is unknown.  ``on_sample``, when given, is called with each
    PathSample as it is produced, so callers can persist incrementally.
    Solver failures do not destroy the prefix: the returned path carries all
    completed samples and names the failure in its termination reason.
    """
    n = omega0.grid.n
    thr = _threshold(mode, n, delta1, alpha, mu, lam)
    if thr is not None and schedule.t_start <= thr:
        raise ParameterError(
            f"schedule starts at t = {schedule.t_start:g} but the {mode} "
            f"existence threshold is {thr:g}; start strictly above it")
    eta_matrix = (eta.matrix if eta is not None else omega0.matrix)

    samples = []
    params = {"alpha": alpha, "beta": beta, "delta1": delta1,
              "mu": mu, "lam": lam, "threshold": thr, "tol": tol}
    phi_prev = None
    t = schedule.t_start
    dt = schedule.initial_step
    dt_floor = schedule.initial_step * schedule.min_step_factor
    termination = "reached_t_end"
    c_exp = None

    while True:
        problem = assemble_problem(omega0, mode, t, alpha=alpha, beta=beta,
                                   delta1=delta1, psi=psi)
        c_exp = problem.c
        try:
            phi, stats = solve_ma(problem, phi_init=phi_prev, tol=tol,
                                  max_iter=max_iter,
                                  positivity_floor=positivity_floor)
        except (PositivityLoss, MaxIterExceeded, LinearSolveFailure) as err:
            if dt / 2.0 >= dt_floor and samples:
                # back off: retry from the last good sample with a shorter leg
                dt /= 2.0
                t = samples[-1].t - dt
                if t <= schedule.t_end:
                    t = schedule.t_end
                continue
            termination = f"solver_failure at t = {t:g}: {type(err).__name__}: {err}"
            break
        sample = PathSample(t=t, phi=phi, u=problem.potential_u(phi),
                            diagnostics=_diagnostics(problem, phi, stats,
                                                     eta_matrix))
        samples.append(sample)
        if on_sample is not None:
            on_sample(sample)
        phi_prev = phi
        if sample.diagnostics["min_eig"] < degeneracy_floor:
            termination = (f"degeneracy_floor at t = {t:g}: min relative "
                           f"eigenvalue {sample.diagnostics['min_eig']:.3e}")
            break
        if t - schedule.t_end <= 1e-9 * dt:
            # accumulated rounding in t - dt must not spawn a duplicate leg
            break
        t = max(t - dt, schedule.t_end)

    return ContinuityPath(mode=mode, c=float(c_exp), samples=samples,
                          schedule=schedule, termination=termination,
                          params=params)


@dataclass
class C3Estimate:
    """Tail statistics of the path integral used as the liminf stand-in."""

    value: float
    tail_min: float
    extrapolated: float
    t_limit: float
    tail_size: int

    def to_dict(self) -> dict:
        return {"value": self.value, "tail_min": self.tail_min,
                "extrapolated": self.extrapolated, "t_limit": self.t_limit,
                "tail_size": self.tail_size}


def estimate_c3(path: ContinuityPath, t_limit: float) -> C3Estimate:
    """Lower estimate of the limiting path integral as t falls to t_limit.

    The headline value is the minimum of the integral over the tail samples;
    a linear-in-t extrapolation to t_limit rides along for context but is
    never used downstream (a fitted line can undershoot a convex tail).
    """
    usable = [s for s in path.samples if s.t > t_limit]
    if len(usable) < 3:
        raise ParameterError(
            f"need at least 3 path samples with t > {t_limit:g}, "
            f"have {len(usable)}")
    tail_size = max(3, len(usable) // 4)
    tail = usable[-tail_size:]
    ts = np.array([s.t for s in tail])
    # thm1 tracks the bare potential integral; thm2 the full volume integral
    key = "int_exp_u" if path.mode == "thm1" else "int_exp_cu"
    vals = np.array([s.diagnostics[key] for s in tail])
    tail_min = float(vals.min())
    slope, intercept = np.polyfit(ts, vals, 1)
    extrapolated = float(slope * t_limit + intercept)
    return C3Estimate(value=tail_min, tail_min=tail_min,
                      extrapolated=extrapolated, t_limit=float(t_limit),
                      tail_size=tail_size)
