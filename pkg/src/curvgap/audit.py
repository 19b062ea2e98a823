"""Inequality audits along solved continuation paths.

Every check returns one or more AuditRecord values carrying a signed margin:
positive means the inequality holds with room to spare, zero is exact, and
anything below -tol counts as a failure.  Identity checks report
margin = -|residual| so the same pass rule applies everywhere.  A check whose
precondition does not hold on the supplied data is marked vacuous; it passes
by convention but stays visible, so a report never silently hides a link
that was not actually exercised.

Anchors are stable artifact-internal identifiers (for grouping records
across runs), not citations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .certify import RegionSpec
from .continuity import (ContinuityPath, MAProblem, PathSample,
                         assemble_problem, estimate_c3, trace_against)
from .errors import ParameterError
from .grid import Grid
from .metrics import (MetricField, TrigExpr, TrigTerm, mixed_top_integral,
                      rel_eigvalsh, ricci_form)

__all__ = [
    "AuditRecord", "AuditReport", "SampleState", "prepare_states",
    "laplacian", "divergence_integral", "check_divergence", "check_schwarz",
    "check_trace_bound", "check_sup_ut", "check_integral_lemma",
    "check_thm2_differential", "compute_b0", "compute_c1_probe", "compute_c2",
    "compute_c4", "alpha_probe", "neg_ricci_volume", "compute_constants",
    "epsilon_threshold", "gap_report", "summarize",
]

_INEQ_TOL = 1e-5
_IDENTITY_TOL = 1e-8
_AMGM_TOL = 1e-10


@dataclass
class AuditRecord:
    """Outcome of one numerical check.

    ``margin`` is min(LHS - RHS) for inequalities and -|residual| for
    identities.  ``vacuous`` records carry the reason in ``details``.
    """

    name: str
    anchor: str
    margin: Optional[float]
    tol: float
    passed: bool
    vacuous: bool = False
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "anchor": self.anchor,
            "margin": self.margin,
            "tol": self.tol,
            "passed": self.passed,
            "vacuous": self.vacuous,
            "details": self.details,
        }


def _mk(name: str, anchor: str, margin: float, tol: float,
        details: Optional[dict] = None, vacuous: bool = False) -> AuditRecord:
    margin = None if margin is None else float(margin)
    passed = True if vacuous else (margin >= -tol)
    return AuditRecord(name=name, anchor=anchor, margin=margin,
                       tol=float(tol), passed=bool(passed), vacuous=vacuous,
                       details=details or {})


def _vacuous(name: str, anchor: str, tol: float, reason: str,
             details: Optional[dict] = None) -> AuditRecord:
    d = dict(details or {})
    d["vacuous_reason"] = reason
    return AuditRecord(name=name, anchor=anchor, margin=None, tol=float(tol),
                       passed=True, vacuous=True, details=d)


@dataclass
class AuditReport:
    """Collection of check records plus the constants they consumed."""

    checks: list
    constants: dict = field(default_factory=dict)
    gap: Optional[dict] = None

    def to_dict(self) -> dict:
        return {
            "checks": [r.to_dict() for r in self.checks],
            "constants": self.constants,
            "summary": summarize(self.checks),
            "gap": self.gap,
        }


def summarize(records) -> dict:
    """Counts and the worst non-vacuous margin across a record list."""
    effective = [r for r in records if not r.vacuous and r.margin is not None]
    worst = min(effective, key=lambda r: r.margin) if effective else None
    return {
        "total": len(records),
        "passed": sum(1 for r in records if r.passed),
        "failed": sum(1 for r in records if not r.passed),
        "vacuous": sum(1 for r in records if r.vacuous),
        "worst_margin": None if worst is None else worst.margin,
        "worst_check": None if worst is None else worst.name,
    }


# ---------------------------------------------------------------------------
# shared sample machinery


def _matrix_of(m) -> np.ndarray:
    return m.matrix if isinstance(m, MetricField) else np.asarray(m)


def _det_ratio(w: np.ndarray, det0: np.ndarray) -> np.ndarray:
    return np.linalg.det(w).real / det0


def _region_mask(region, grid: Grid) -> np.ndarray:
    if isinstance(region, RegionSpec):
        return region.mask(grid)
    mask = np.asarray(region, dtype=bool)
    if mask.shape != grid.shape:
        raise ParameterError(
            f"region mask shape {mask.shape} does not match grid {grid.shape}")
    if not mask.any() or mask.all():
        raise ParameterError("region mask must be a proper nonempty subset")
    return mask


def _tlabel(t: float) -> str:
    return f"t={t:.6g}"


@dataclass
class SampleState:
    """One path sample with its assembled equation data and derived fields."""

    sample: PathSample
    problem: MAProblem
    w: np.ndarray
    inv_w: np.ndarray
    det_w: np.ndarray

    @property
    def t(self) -> float:
        return self.sample.t


def prepare_states(omega0: MetricField, path: ContinuityPath,
                   psi=None) -> list:
    """Rebuild the reference form and solved metric at every path sample.

    The path stores potentials, not matrices; this reassembles chi_t from
    the stored parameters so the audits can evaluate both sides of every
    inequality on the grid.
    """
    p = path.params
    grid = omega0.grid
    states = []
    for s in path.samples:
        prob = assemble_problem(omega0, path.mode, s.t,
                                alpha=p.get("alpha", 1.0),
                                beta=p.get("beta", 1.0),
                                delta1=p.get("delta1", 1.0), psi=psi)
        w = prob.chi + grid.ddc(s.phi)
        inv_w = np.linalg.inv(w)
        det_w = np.linalg.det(w).real
        states.append(SampleState(sample=s, problem=prob, w=w,
                                  inv_w=inv_w, det_w=det_w))
    return states


def laplacian(grid: Grid, inverse: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Metric Laplacian of a scalar field, from the inverse metric."""
    return trace_against(inverse, grid.ddc(values))


def divergence_integral(grid: Grid, inv_w: np.ndarray, det_w: np.ndarray,
                        values: np.ndarray) -> float:
    """Integral of the metric Laplacian against the metric volume."""
    return float(grid.integrate(laplacian(grid, inv_w, values) * det_w))


def check_divergence(grid: Grid, inv_w: np.ndarray, det_w: np.ndarray,
                     values: np.ndarray, tol: float = _IDENTITY_TOL,
                     name: str = "divergence") -> AuditRecord:
    """The Laplacian of any scalar integrates to zero against the volume."""
    val = divergence_integral(grid, inv_w, det_w, values)
    return _mk(name, "id.divergence", -abs(val), tol, {"integral": val})


# ---------------------------------------------------------------------------
# pointwise comparison inequality


def check_schwarz(omega_g, eta, a: float, b: float, mu: float,
                  kappa: Optional[np.ndarray] = None, *,
                  grid: Optional[Grid] = None, tol: float = _INEQ_TOL,
                  name: str = "schwarz") -> AuditRecord:
    """Second-order lower bound for the log of the trace of eta.

    Under the Ricci hypothesis Ric(g) >= -a*g + b*eta and a global bound
    mu on the bisectional maximum of eta, the field log tr_g(eta) satisfies

        Lap_g log tr_g(eta) >= -a + (-mu + b/n) tr_g(eta).

    The hypothesis is verified pointwise first; when it fails the record is
    vacuous, not failed.  A pointwise bound field ``kappa`` (the per-point
    bisectional maximum) sharpens mu; its margin rides along in details.
    """
    if grid is None:
        if isinstance(omega_g, MetricField):
            grid = omega_g.grid
        elif isinstance(eta, MetricField):
            grid = eta.grid
        else:
            raise ParameterError("pass grid= when both metrics are arrays")
    g = _matrix_of(omega_g)
    eta_m = _matrix_of(eta)
    n = grid.n
    det_g = np.linalg.det(g).real
    if det_g.min() <= 0.0:
        raise ParameterError("omega_g must be positive definite everywhere")
    ric_g = -grid.ddc(np.log(det_g))
    hyp = ric_g + a * g - b * eta_m
    hyp_margin = float(rel_eigvalsh(hyp, g)[..., 0].min())
    details = {"hypothesis_margin": hyp_margin, "a": a, "b": b, "mu": mu}
    inv_g = np.linalg.inv(g)
    tr = trace_against(inv_g, eta_m)
    if tr.min() <= 0.0:
        raise ParameterError("trace of eta must be positive everywhere")
    lhs = laplacian(grid, inv_g, np.log(tr))
    rhs = -a + (-mu + b / n) * tr
    margin = float((lhs - rhs).min())
    if kappa is not None:
        kap = np.asarray(kappa, dtype=float)
        rhs_ref = -a + (-kap + b / n) * tr
        details["refined_margin"] = float((lhs - rhs_ref).min())
    if hyp_margin < -tol:
        details["unverified_margin"] = margin
        return _vacuous(name, "ineq.schwarz_trace_log", tol,
                        "Ricci lower-bound hypothesis fails pointwise",
                        details)
    return _mk(name, "ineq.schwarz_trace_log", margin, tol, details)


# ---------------------------------------------------------------------------
# per-sample path checks


def check_trace_bound(omega0: MetricField, path: ContinuityPath,
                      delta1: float, mu: float, eta=None, *,
                      psi=None, states=None, tol: float = _INEQ_TOL) -> list:
    """Upper bound on the trace of eta along the path.

    For t strictly above n*delta1*mu the solved metric satisfies
    sup tr(eta) <= n*delta1 / (t - mu*n*delta1); samples at or below that
    parameter value are recorded as out of range and excluded.
    """
    if path.mode != "thm1":
        raise ParameterError("trace bound applies to thm1 paths")
    grid = omega0.grid
    n = grid.n
    eta_m = _matrix_of(eta) if eta is not None else omega0.matrix
    if states is None:
        states = prepare_states(omega0, path, psi=psi)
    records = []
    for st in states:
        t = st.t
        nm = f"trace_bound[{_tlabel(t)}]"
        lim = n * delta1 * mu
        if t <= lim:
            records.append(_vacuous(nm, "ineq.trace_upper_bound", tol,
                                    f"t = {t:g} is not above {lim:g}",
                                    {"t": t, "limit": lim}))
            continue
        bound = n * delta1 / (t - mu * n * delta1)
        sup_tr = float(trace_against(st.inv_w, eta_m).max())
        records.append(_mk(nm, "ineq.trace_upper_bound", bound - sup_tr, tol,
                           {"t": t, "bound": bound, "sup_trace": sup_tr}))
    return records


def check_sup_ut(omega0: MetricField, path: ContinuityPath, delta1: float,
                 eps: float, b0: float, c0: float, *, psi=None, states=None,
                 tol: float = _INEQ_TOL) -> list:
    """Upper bounds on the normalized potential along the path.

    Three nested levels per sample: the sharp maximum-principle bound
    (log of the largest density ratio of the reference form), the windowed
    constant bound n*log(a_win + b0) when t is inside the window, and the
    scale-level bound n*log(c0 + b0) when the window fits under c0.  The
    record margin is the worst applicable level; each level is in details.
    """
    grid = omega0.grid
    n = grid.n
    if states is None:
        states = prepare_states(omega0, path, psi=psi)
    p = path.params
    alpha = p.get("alpha", 1.0)
    if path.mode == "thm1":
        c_exp = 1.0
        a_win = 2.0 * n * delta1 * eps
    else:
        c_exp = path.c
        if alpha <= 0:
            raise ParameterError("thm2 window needs alpha > 0")
        a_win = 4.0 * n * eps / ((n + 1.0) * alpha)
    ric = ricci_form(omega0)
    g0 = omega0.matrix
    det0 = omega0.det
    level_ok = a_win <= c0 + tol
    records = []
    for st in states:
        t = st.t
        nm = f"sup_bound[{_tlabel(t)}]"
        sup_u = float(st.sample.u.max())
        wref = t * g0 - ric
        pd = rel_eigvalsh(wref, g0)[..., 0] > 0.0
        details = {"t": t, "sup_u": sup_u, "window": a_win,
                   "exponent": c_exp}
        margins = []
        if pd.any():
            ratio = _det_ratio(wref, det0)
            sup_ratio = float(ratio[pd].max())
            m_sharp = math.log(sup_ratio) / c_exp - sup_u
            details["sharp_margin"] = m_sharp
            details["sup_density_ratio"] = sup_ratio
            # the density bound via b0 holds wherever the form is definite
            details["b0_step_margin"] = (n * math.log(t + b0)
                                         - math.log(sup_ratio))
            margins.append(m_sharp)
        else:
            details["sharp_margin"] = None
        if t <= a_win + tol:
            m_win = (n / c_exp) * math.log(a_win + b0) - sup_u
            details["window_margin"] = m_win
            margins.append(m_win)
            if level_ok:
                m_lvl = (n / c_exp) * math.log(c0 + b0) - sup_u
                details["level_margin"] = m_lvl
                margins.append(m_lvl)
        if not margins:
            records.append(_vacuous(nm, "ineq.sup_u_upper", tol,
                                    "no bound applies at this t", details))
            continue
        records.append(_mk(nm, "ineq.sup_u_upper", min(margins), tol,
                           details))
    return records


def check_thm2_differential(omega0: MetricField, sample: PathSample, *,
                            alpha: float, beta: float,
                            lam: Optional[float] = None,
                            tau: Optional[np.ndarray] = None,
                            state: Optional[SampleState] = None,
                            tol: float = _INEQ_TOL) -> AuditRecord:
    """Differential inequality for log of the background trace, thm2 form.

    Checks Lap(log G - (alpha/2beta) phi) against the linear-in-G lower
    bound, with the global constant lam and, when supplied, the pointwise
    weighted field tau.  Realized uniform-equivalence constants for the
    sample ride along in details.
    """
    if beta <= 0:
        raise ParameterError("beta must be positive")
    grid = omega0.grid
    n = grid.n
    t = sample.t
    if state is None:
        prob = assemble_problem(omega0, "thm2", t, alpha=alpha, beta=beta)
        w = prob.chi + grid.ddc(sample.phi)
        inv_w = np.linalg.inv(w)
        det_w = np.linalg.det(w).real
    else:
        w, inv_w, det_w = state.w, state.inv_w, state.det_w
    g0 = omega0.matrix
    big_g = trace_against(inv_w, g0)
    v = np.log(big_g) - (alpha / (2.0 * beta)) * sample.phi
    lhs = laplacian(grid, inv_w, v)
    const = alpha * n / beta + 1.0
    details = {"t": t, "alpha": alpha, "beta": beta}
    margins = []
    if lam is not None:
        if lam >= 0:
            rate = ((n + 1.0) * alpha * t - 2.0 * n * lam) / (2.0 * beta * n)
            key = "global_margin_nonneg"
        else:
            rate = ((n + 1.0) * alpha * t
                    - (n + 1.0) * lam) / (2.0 * beta * n)
            key = "global_margin_neg"
        m = float((lhs - (rate * big_g - const)).min())
        details[key] = m
        details["lam"] = lam
        margins.append(m)
    if tau is not None:
        tau_v = np.asarray(tau, dtype=float)
        rate_p = ((n + 1.0) * alpha * t - tau_v) / (2.0 * beta * n)
        m_p = float((lhs - (rate_p * big_g - const)).min())
        details["pointwise_margin"] = m_p
        margins.append(m_p)
    if not margins:
        raise ParameterError("supply lam, tau, or both")
    # realized consequences at this sample
    rel = rel_eigvalsh(w, g0)
    rel_min = float(rel[..., 0].min())
    rel_max = float(rel[..., -1].max())
    details["rel_eig_min"] = rel_min
    details["rel_eig_max"] = rel_max
    details["realized_equivalence_constant"] = (
        max(rel_max, 1.0 / rel_min) if rel_min > 0 else None)
    ric = ricci_form(omega0)
    pd = rel_eigvalsh(t * g0 - ric, g0)[..., 0] > 0.0
    if pd.any():
        c_exp = 1.0 + alpha / (2.0 * beta)
        sup_ratio = float(_det_ratio(t * g0 - ric, omega0.det)[pd].max())
        details["sup_phi_margin"] = (math.log(sup_ratio) / c_exp
                                     - float(sample.phi.max()))
        details["volume_ratio_margin"] = float(
            math.log(sup_ratio) - np.log(det_w / omega0.det).max())
    return _mk(f"thm2_differential[{_tlabel(t)}]", "ineq.thm2_differential",
               min(margins), tol, details)


# ---------------------------------------------------------------------------
# the integral chain on a region


def check_integral_lemma(omega0: MetricField, sample: PathSample,
                         kappa, region, *, mode: str = "thm1",
                         psi=None, eta=None, delta1: float = 1.0,
                         alpha: float = 1.0, beta: float = 1.0,
                         delta: Optional[float] = None,
                         delta2: Optional[float] = None,
                         c1: Optional[float] = None,
                         c2: Optional[float] = None,
                         state: Optional[SampleState] = None,
                         tol: float = _INEQ_TOL) -> list:
    """Chain of integral estimates bounding the region supremum from below.

    Evaluates every link separately: the divergence identity, the
    integrated comparison inequality, restriction to the region, the
    pointwise and weighted arithmetic-geometric mean steps, the equation
    substitution identity, and the numerator, denominator, fraction, and
    final-display bounds.  Links whose preconditions fail on this data are
    vacuous.  The last returned record is the composite: it fails at the
    first broken link, so a deep failure is never masked by later slack.

    ``kappa`` is the weighted pointwise extremum field of the comparison
    metric (mode thm1) or of the weighted orthogonal form (mode thm2);
    an ExtremalField is accepted and its weighted field used.
    """
    if mode not in ("thm1", "thm2"):
        raise ParameterError(f"unknown mode {mode!r}")
    grid = omega0.grid
    n = grid.n
    t = sample.t
    kap = kappa.weighted_field if hasattr(kappa, "weighted_field") else kappa
    kap = np.asarray(kap, dtype=float)
    if kap.shape != grid.shape:
        raise ParameterError(
            f"kappa shape {kap.shape} does not match grid {grid.shape}")
    mask = _region_mask(region, grid)
    if state is None:
        prob = assemble_problem(omega0, mode, t, alpha=alpha, beta=beta,
                                delta1=delta1, psi=psi)
        w = prob.chi + grid.ddc(sample.phi)
        inv_w = np.linalg.inv(w)
        det_w = np.linalg.det(w).real
    else:
        prob, w, inv_w, det_w = (state.problem, state.w, state.inv_w,
                                 state.det_w)
    psi_vals = prob.psi if mode == "thm1" else None
    det0 = omega0.det
    eta_m = _matrix_of(eta) if eta is not None else omega0.matrix
    det_eta = np.linalg.det(eta_m).real if eta is not None else det0
    c_exp = prob.c
    lab = _tlabel(t)
    resid = float(sample.diagnostics.get("residual", 0.0))
    tol_id = max(_IDENTITY_TOL, 10.0 * resid)
    records = []

    tr = trace_against(inv_w, eta_m)
    log_tr = np.log(tr)
    if mode == "thm1":
        v_field = log_tr
    else:
        v_field = log_tr - (alpha / (2.0 * beta)) * sample.phi

    # 1. divergence identity
    records.append(check_divergence(grid, inv_w, det_w, v_field,
                                    tol=tol_id,
                                    name=f"chain.divergence[{lab}]"))

    # 2. integrated comparison inequality
    vol_t = float(grid.integrate(det_w))
    if mode == "thm1":
        coeff = -kap + t / (n * delta1)
        lhs_i = vol_t
    else:
        coeff = ((n + 1.0) * alpha * t - kap) / (2.0 * beta * n)
        lhs_i = (alpha * n / beta + 1.0) * vol_t
    rhs_i = float(grid.integrate(coeff * tr * det_w))
    records.append(_mk(f"chain.integrated[{lab}]", "ineq.integrated_schwarz",
                       lhs_i - rhs_i, tol,
                       {"lhs": lhs_i, "rhs": rhs_i, "t": t}))

    # 3. restriction to the region: needs the integrand nonnegative off it
    if mode == "thm1":
        weight = -kap
    else:
        weight = -kap / (2.0 * beta * n)
    rhs_u = float(grid.integrate(np.where(mask, weight * tr * det_w, 0.0)))
    pre_min = float(coeff.min())
    nm = f"chain.restriction[{lab}]"
    if pre_min < -tol:
        records.append(_vacuous(nm, "ineq.region_restriction", tol,
                                "comparison integrand changes sign",
                                {"coefficient_min": pre_min}))
    else:
        records.append(_mk(nm, "ineq.region_restriction", rhs_i - rhs_u, tol,
                           {"coefficient_min": pre_min, "region_term": rhs_u}))

    # 4. pointwise arithmetic-geometric mean, everywhere
    root = (det_eta / det_w) ** (1.0 / n)
    amgm = tr - n * root
    records.append(_mk(f"chain.amgm[{lab}]", "ineq.amgm",
                       float(amgm.min()), _AMGM_TOL,
                       {"min_at_region": float(amgm[mask].min())}))

    # 4b. weighted region version: needs the weight nonnegative on the region
    kap_u_max = float(kap[mask].max())
    rhs_root = float(grid.integrate(np.where(mask,
                                             n * weight * root * det_w, 0.0)))
    nm = f"chain.amgm_weighted[{lab}]"
    if kap_u_max > tol:
        records.append(_vacuous(nm, "ineq.amgm_weighted", tol,
                                "field is positive somewhere on the region",
                                {"kappa_region_max": kap_u_max}))
    else:
        records.append(_mk(nm, "ineq.amgm_weighted", rhs_u - rhs_root, tol,
                           {"kappa_region_max": kap_u_max,
                            "root_term": rhs_root}))

    # 5. equation substitution identity
    log_ratio = np.log(det_w / det0)
    if mode == "thm1":
        tilt = (t / delta1) * psi_vals if psi_vals is not None else 0.0
        resid_f = log_ratio - (sample.u - tilt)
    else:
        resid_f = log_ratio - c_exp * sample.phi
    id_resid = float(np.abs(resid_f).max())
    records.append(_mk(f"chain.substitution[{lab}]", "id.density_equation",
                       -id_resid, tol_id, {"max_residual": id_resid}))

    sup_u = float(sample.u.max())
    u_star = sample.u - sup_u

    # 6. numerator lower bound on the region
    if mode == "thm1":
        tilt_n = (np.exp((t / (n * delta1)) * psi_vals)
                  if psi_vals is not None else 1.0)
        num = float(grid.integrate(np.where(
            mask, -kap * tilt_n * (det_eta / det0) ** (1.0 / n) * det_w, 0.0)))
        int_eu = float(grid.integrate(np.where(mask,
                                               np.exp(u_star) * det0, 0.0)))
        nm = f"chain.numerator[{lab}]"
        pre_fail = []
        if delta is None or delta2 is None:
            pre_fail.append("delta and delta2 are required")
        else:
            if kap_u_max > -delta + tol:
                pre_fail.append(
                    f"field max on region {kap_u_max:g} is not below "
                    f"-delta = {-delta:g}")
            vol_ratio_min = float((det_eta / det0)[mask].min())
            if vol_ratio_min < delta2 - tol:
                pre_fail.append(
                    f"volume ratio min {vol_ratio_min:g} is below "
                    f"delta2 = {delta2:g}")
        if pre_fail:
            records.append(_vacuous(nm, "ineq.numerator_lower", tol,
                                    "; ".join(pre_fail),
                                    {"numerator": num}))
        else:
            floor = delta * delta2 ** (1.0 / n) * math.exp(sup_u) * int_eu
            details = {
                "numerator": num,
                "floor": floor,
                "display_variant_margin": num - delta * delta2 * int_eu,
                "display_variant_over_n_margin":
                    num - delta * delta2 ** (1.0 / n) / n * int_eu,
            }
            records.append(_mk(nm, "ineq.numerator_lower", num - floor, tol,
                               details))
    else:
        num = float(grid.integrate(np.where(
            mask, -kap * np.exp(c_exp * u_star) * det0, 0.0)))
        int_eu = float(grid.integrate(np.where(
            mask, np.exp(c_exp * u_star) * det0, 0.0)))
        nm = f"chain.numerator[{lab}]"
        if delta is None:
            records.append(_vacuous(nm, "ineq.numerator_lower", tol,
                                    "delta is required", {"numerator": num}))
        elif kap_u_max > -(n + 1.0) * delta + tol:
            records.append(_vacuous(
                nm, "ineq.numerator_lower", tol,
                f"field max on region {kap_u_max:g} is not below "
                f"-(n+1)*delta = {-(n + 1.0) * delta:g}",
                {"numerator": num}))
        else:
            floor = (n + 1.0) * delta * int_eu
            records.append(_mk(nm, "ineq.numerator_lower", num - floor, tol,
                               {"numerator": num, "floor": floor}))

    # 7. denominator upper bound
    nm = f"chain.denominator[{lab}]"
    if mode == "thm1":
        tilt_d = (np.exp(-(t / delta1) * psi_vals)
                  if psi_vals is not None else 1.0)
        den = float(grid.integrate(np.exp(u_star) * tilt_d * det0))
    else:
        den = float(grid.integrate(np.exp(c_exp * u_star) * det0))
    if c2 is None:
        records.append(_vacuous(nm, "ineq.denominator_upper", tol,
                                "c2 not supplied", {"denominator": den}))
    else:
        records.append(_mk(nm, "ineq.denominator_upper", c2 - den, tol,
                           {"denominator": den, "c2": c2,
                            "conditional": True}))

    # 7b. region mass against the probed family infimum
    nm = f"chain.region_mass[{lab}]"
    if c1 is None:
        records.append(_vacuous(nm, "ineq.region_mass_lower", tol,
                                "c1 not supplied", {"region_mass": int_eu}))
    else:
        records.append(_mk(nm, "ineq.region_mass_lower", int_eu - c1, tol,
                           {"region_mass": int_eu, "c1": c1,
                            "conditional": True}))

    # 8. fraction lower bound against the probed constants
    nm = f"chain.fraction[{lab}]"
    ratio = num / vol_t if vol_t > 0 else None
    if mode == "thm1":
        have = (c1 is not None and c2 is not None and delta is not None
                and delta2 is not None and ratio is not None
                and kap_u_max <= -delta + tol)
        floor_frac = (delta * delta2 ** (1.0 / n) * c1 / c2) if have else None
    else:
        have = (c1 is not None and c2 is not None and delta is not None
                and ratio is not None
                and kap_u_max <= -(n + 1.0) * delta + tol)
        floor_frac = ((n + 1.0) * delta * c1 / c2) if have else None
    if not have:
        records.append(_vacuous(nm, "ineq.fraction_lower", tol,
                                "needs c1, c2, delta(s), and a negative "
                                "field on the region", {"ratio": ratio}))
    else:
        records.append(_mk(nm, "ineq.fraction_lower", ratio - floor_frac, tol,
                           {"ratio": ratio, "floor": floor_frac,
                            "conditional": True}))

    # 9. final display: region supremum from below
    nm = f"chain.final[{lab}]"
    if ratio is None or ratio <= 0:
        records.append(_vacuous(nm, "ineq.sup_region_lower", tol,
                                "fraction is not positive on this data",
                                {"ratio": ratio}))
    else:
        sup_reg = float(sample.u[mask].max())
        if mode == "thm1":
            bound = n * math.log(n) + n * math.log(ratio)
            details = {
                "sup_region": sup_reg,
                "bound": bound,
                "display_variant_margin":
                    sup_reg - (n * math.log(n) + math.log(ratio)),
            }
            if c1 is not None and c2 is not None and delta is not None \
                    and delta2 is not None:
                base = delta * c1 / c2
                details["constant_statement_margin"] = sup_reg - (
                    n * math.log(n) + math.log(base * delta2))
                details["constant_proof_margin"] = sup_reg - (
                    n * math.log(n) + math.log(base * delta2 ** (1.0 / n) / n))
                details["conditional"] = True
        else:
            bound = (n / c_exp) * math.log(ratio / (2.0 * alpha * n
                                                    + 2.0 * beta))
            details = {"sup_region": sup_reg, "bound": bound}
            if c1 is not None and c2 is not None and delta is not None:
                details["constant_statement_margin"] = sup_reg - (
                    (n / c_exp) * math.log(
                        (n + 1.0) * delta * c1
                        / ((2.0 * alpha * n + 2.0 * beta) * c2)))
                details["conditional"] = True
        records.append(_mk(nm, "ineq.sup_region_lower", sup_reg - bound, tol,
                           details))

    # composite: first broken link wins
    broken = next((r for r in records if not r.passed), None)
    comp_details = {"links": len(records),
                    "first_broken": None if broken is None else broken.name}
    records.append(AuditRecord(
        name=f"chain.composite[{lab}]", anchor="chain.integral_lemma",
        margin=None if broken is None else broken.margin, tol=tol,
        passed=broken is None, vacuous=False, details=comp_details))
    return records


# ---------------------------------------------------------------------------
# constants and probes


def compute_b0(omega0: MetricField) -> float:
    """Smallest nonnegative b with Ric >= -b * omega0 on the grid."""
    ric = ricci_form(omega0)
    low = float(rel_eigvalsh(ric, omega0.matrix)[..., 0].min())
    return max(0.0, -low)


def neg_ricci_volume(omega0: MetricField) -> float:
    """Top power of the negative Ricci form, integrated."""
    ric = ricci_form(omega0)
    return float(omega0.grid.integrate(np.linalg.det(-ric).real))


def _psh_family(omega0: MetricField, form_scale: float, family_size: int,
                seed: int):
    """Deterministic family of admissible potentials, sup-normalized.

    Candidates are trigonometric bumps rescaled to keep
    form_scale * omega0 + ddc(v) nonnegative, plus periodic regularized
    log-pit profiles.  Returns (candidates, skipped) where each candidate
    is (label, values, admissibility margin).
    """
    grid = omega0.grid
    g0 = omega0.matrix
    rng = np.random.default_rng(seed)
    out = []
    skipped = 0

    def admit(label, raw):
        nonlocal skipped
        hess = grid.ddc(raw)
        low = float(rel_eigvalsh(hess, g0)[..., 0].min())
        if low >= 0.0:
            scale = 1.0
        else:
            scale = form_scale / (-low)
        for frac in (0.25, 0.9):
            v = frac * scale * raw
            margin = float(rel_eigvalsh(form_scale * g0 + grid.ddc(v),
                                        g0)[..., 0].min())
            if margin < -1e-10:
                skipped += 1
                continue
            out.append((f"{label}/frac={frac}", v - v.max(), margin))

    out.append(("zero", np.zeros(grid.shape), form_scale))
    d = 2 * grid.n
    n_trig = max(1, (family_size - 1) * 2 // 3)
    for i in range(n_trig):
        mode = rng.integers(0, 3, size=d)
        if not mode.any():
            mode[0] = 1
        kind = "cos" if rng.random() < 0.5 else "sin"
        term = TrigTerm(1.0, tuple(int(m) for m in mode), kind)
        admit(f"trig{i}", TrigExpr((term,), 0.0).on_grid(grid))
    n_log = max(1, family_size - 1 - n_trig)
    for i in range(n_log):
        center = rng.random(d)
        smooth = rng.choice([0.05, 0.15, 0.3])
        q = np.zeros(grid.shape)
        for ax in range(d):
            q = q + np.sin(np.pi * (grid.axis_coordinate(ax)
                                    - center[ax])) ** 2
        admit(f"logpit{i}", np.log(q + smooth ** 2))
    return out, skipped


def compute_c1_probe(omega0: MetricField, region, c0: float, b0: float,
                     family_size: int = 12, seed: int = 0,
                     full: bool = False):
    """Empirical upper bound for the smallest region mass of e^v.

    Minimizes the region integral of e^v over a family of admissible
    potentials for the form (c0 + b0) * omega0.  The true infimum can be
    lower; the value is flagged as a probe wherever it is consumed.
    """
    grid = omega0.grid
    mask = _region_mask(region, grid)
    det0 = omega0.det
    family, skipped = _psh_family(omega0, c0 + b0, family_size, seed)
    values = {}
    for label, v, margin in family:
        values[label] = float(grid.integrate(np.where(mask,
                                                      np.exp(v) * det0, 0.0)))
    best = min(values.values())
    if full:
        return {"c1": best, "candidates": values, "skipped": skipped,
                "family_size": family_size, "seed": seed,
                "note": "empirical upper bound on an infimum"}
    return best


def alpha_probe(omega0: MetricField, c0: float, beta_exp: float = 2.0,
                family_size: int = 12, seed: int = 0, full: bool = False):
    """Empirical lower bound for the exponential integrability constant.

    Maximizes the integral of e^(-beta_exp * v) against (c0 * omega0)^n
    over admissible sup-normalized potentials v for c0 * omega0.
    """
    if not (0.0 < beta_exp <= 2.0):
        raise ParameterError(f"beta_exp must lie in (0, 2], got {beta_exp}")
    grid = omega0.grid
    n = grid.n
    det_scaled = (c0 ** n) * omega0.det
    family, skipped = _psh_family(omega0, c0, family_size, seed)
    values = {}
    for label, v, margin in family:
        values[label] = float(grid.integrate(np.exp(-beta_exp * v)
                                             * det_scaled))
    worst = max(values.values())
    if full:
        return {"bound": worst, "candidates": values, "skipped": skipped,
                "beta_exp": beta_exp, "c0": c0,
                "note": "empirical lower bound on a supremum"}
    return worst


def compute_c2(omega0: MetricField, mode: str, c0: float = 1.0,
               delta1: float = 1.0, psi=None) -> float:
    """Denominator constant: plain volume, or the tilted volume at level c0.

    The thm1 realization integrates the tilt at its largest admissible
    parameter value, which dominates the denominator for every t up to c0.
    """
    grid = omega0.grid
    det0 = omega0.det
    if mode == "thm1" and psi is not None:
        vals = psi.on_grid(grid) if isinstance(psi, TrigExpr) \
            else np.asarray(psi, dtype=float)
        vals = vals - vals.max()
        return float(grid.integrate(np.exp(-(c0 / delta1) * vals) * det0))
    return float(grid.integrate(det0))


def compute_c4(omega0: MetricField, delta1: float, eps: float,
               mode: str = "thm1", alpha: float = 1.0,
               full: bool = False):
    """Linear-in-eps control of the perturbed volume expansion.

    Expands the n-th power of (a * omega0 - Ric) binomially and divides the
    correction terms by eps, where a is the mode-dependent window width.
    Each mixed integral is kept for the report.
    """
    if eps <= 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    grid = omega0.grid
    n = grid.n
    if mode == "thm1":
        a = 2.0 * n * delta1 * eps
    else:
        if alpha <= 0:
            raise ParameterError("thm2 window needs alpha > 0")
        a = 4.0 * n * eps / ((n + 1.0) * alpha)
    neg_ric = -ricci_form(omega0)
    terms = {}
    total = 0.0
    for k in range(1, n + 1):
        mk = mixed_top_integral(grid, omega0.matrix, neg_ric, k)
        terms[k] = mk
        total += math.comb(n, k) * a ** k * mk
    c4 = total / eps
    if full:
        return {"c4": c4, "window": a, "eps": eps,
                "mixed_integrals": {str(k): v for k, v in terms.items()}}
    return c4


def epsilon_threshold(mode: str, n: int, c0: float, delta1: float,
                      alpha: float, c3: Optional[float],
                      c4: Optional[float]) -> dict:
    """Largest admissible eps: the minimum of the applicable candidates."""
    if mode == "thm1":
        cands = {"scale": c0 / (2.0 * n * delta1)}
    else:
        cands = {"scale": (n + 1.0) * alpha * c0 / (4.0 * n)}
    if c3 is not None and c4 is not None and c4 > 0:
        cands["gap"] = c3 / (2.0 * c4)
    return {"value": min(cands.values()), "candidates": cands}


def compute_constants(omega0: MetricField, mode: str, *, region,
                      eps: float, c0: float = 1.0, delta1: float = 1.0,
                      alpha: float = 1.0, psi=None,
                      path: Optional[ContinuityPath] = None,
                      t_limit: Optional[float] = None,
                      family_size: int = 12, seed: int = 0) -> dict:
    """Assemble every constant the gap verdict needs, with provenance."""
    n = omega0.grid.n
    b0 = compute_b0(omega0)
    c1 = compute_c1_probe(omega0, region, c0, b0, family_size=family_size,
                          seed=seed, full=True)
    probe = alpha_probe(omega0, c0, beta_exp=2.0, family_size=family_size,
                        seed=seed, full=True)
    c2 = compute_c2(omega0, mode, c0=c0, delta1=delta1, psi=psi)
    c3 = None
    if path is not None:
        lim = t_limit
        if lim is None:
            lim = path.params.get("threshold")
        if lim is None:
            lim = path.schedule.t_end * 0.5
        try:
            c3 = estimate_c3(path, lim).to_dict()
        except ParameterError:
            c3 = None
    c4 = compute_c4(omega0, delta1, eps, mode=mode, alpha=alpha, full=True)
    thr = epsilon_threshold(mode, n, c0, delta1, alpha,
                            None if c3 is None else c3["value"], c4["c4"])
    return {
        "b0": b0,
        "c0": c0,
        "c1": c1,
        "alpha_probe": probe,
        "c2": c2,
        "c3": c3,
        "c4": c4,
        "eps": eps,
        "eps_threshold": thr,
        "probed": ["c1", "alpha_probe"],
    }


# ---------------------------------------------------------------------------
# the gap verdict


def gap_report(omega0: MetricField, path: Optional[ContinuityPath],
               hypotheses: dict, constants: dict, eps: float, *,
               mode: str = "thm1", zero_tol: float = 1e-8) -> AuditReport:
    """Assemble the volume-gap verdict from certified hypotheses and constants.

    The headline is a logical-consistency statement: the top power of the
    negative Ricci form integrates to zero on every geometry this package
    builds, so a fully certified hypothesis set with eps at or below the
    threshold would contradict the gap it implies.  If that situation is
    ever reached with the measured integral actually at zero, the function
    raises instead of returning, because it means either the certifier or
    an estimate is wrong.

    ``hypotheses`` maps names to certification reports (objects with a
    ``certified`` attribute or plain dicts).  ``constants`` should come from
    compute_constants; missing required entries are listed in the error.
    """
    required = ["b0", "c0", "c2", "c4", "eps_threshold"]
    missing = [k for k in required if k not in constants]
    if missing:
        raise ParameterError("constants block is missing: "
                             + ", ".join(missing))
    if not hypotheses:
        raise ParameterError("no hypothesis certifications supplied")

    def _cert(h):
        return h.certified if hasattr(h, "certified") else bool(h["certified"])

    cert_map = {k: _cert(v) for k, v in hypotheses.items()}
    all_certified = all(cert_map.values())
    int_neg = constants.get("int_neg_ricci_n")
    if int_neg is None:
        int_neg = neg_ricci_volume(omega0)
    thr = constants["eps_threshold"]["value"]
    below = eps <= thr
    c3_block = constants.get("c3")
    c3_val = None if c3_block is None else c3_block["value"]
    c4_val = constants["c4"]["c4"]
    implied = None if c3_val is None else c3_val - c4_val * eps

    background_flat = abs(int_neg) <= zero_tol
    contradiction = all_certified and below and background_flat
    if contradiction:
        raise AssertionError(
            "inconsistent state: every hypothesis certified with eps = "
            f"{eps:g} at or below the threshold {thr:g}, yet the negative "
            f"Ricci volume is {int_neg:.3e}; a positive gap should follow, "
            "so a certificate or an estimate is wrong")

    if not all_certified:
        failed = sorted(k for k, ok in cert_map.items() if not ok)
        verdict = ("hypotheses not certified ({}), no gap is asserted"
                   .format(", ".join(failed)))
    elif not below:
        verdict = (f"hypotheses certified but eps = {eps:g} exceeds the "
                   f"threshold {thr:g}, no gap is asserted")
    else:
        verdict = (f"hypotheses certified with eps = {eps:g} at or below "
                   f"{thr:g}; the implied gap is consistent with the "
                   f"measured volume {int_neg:.3e}")

    gap = {
        "int_neg_ricci_n": int_neg,
        "certified": cert_map,
        "all_certified": all_certified,
        "eps": eps,
        "eps_threshold": constants["eps_threshold"],
        "eps_below_threshold": below,
        "c3_minus_c4_eps": implied,
        "consistent": True,
        "verdict": verdict,
    }
    overridden = "int_neg_ricci_n" in constants
    if overridden and not background_flat:
        vol_check = _vacuous("gap.neg_ricci_volume", "id.neg_ricci_volume",
                             zero_tol, "volume supplied by caller, not "
                             "computed from the geometry",
                             {"integral": int_neg})
    else:
        vol_check = _mk("gap.neg_ricci_volume", "id.neg_ricci_volume",
                        -abs(int_neg), zero_tol, {"integral": int_neg})
    return AuditReport(checks=[vol_check], constants=constants, gap=gap)
