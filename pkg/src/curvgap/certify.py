"""Certification of curvature and comparison hypotheses on a torus geometry.

Three hypothesis classes are checked, each producing a report rather than an
exception on failure:

* quasi-negativity of an extremal curvature field: at most ``eps`` everywhere
  and at most ``-delta`` on a marked region,
* domination of one metric by a multiple of another up to a Hessian
  correction term,
* a pointwise lower bound on the volume-form ratio over the marked region.

Margins are worst-case slacks (nonnegative means the inequality holds), and
every report echoes its parameters so a run directory is self-describing.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .grid import Grid
from .metrics import MetricField, TrigExpr, rel_eigvalsh
from .functionals import ExtremalField

_DEFAULT_SLACK = 1e-8
_MAX_WITNESSES = 8


@dataclass(frozen=True)
class RegionSpec:
    """Periodic box on the torus: center plus per-axis half-widths.

    A grid point belongs to the region when its wrapped distance to the
    center is at most the half-width along every real axis.
    """

    center: tuple
    radii: tuple

    def __post_init__(self):
        if len(self.center) != len(self.radii):
            raise ParameterError(
                f"center has {len(self.center)} axes, radii has {len(self.radii)}")
        if any(r <= 0 for r in self.radii):
            raise ParameterError(f"half-widths must be positive, got {self.radii}")
        if any(r >= 0.5 for r in self.radii):
            raise ParameterError(
                f"half-width >= 0.5 covers a full period; got {self.radii}")

    @staticmethod
    def from_dict(data: dict, n: int) -> "RegionSpec":
        center = tuple(float(c) for c in data.get("center", (0.5,) * (2 * n)))
        radii_raw = data.get("radii", 0.25)
        if np.isscalar(radii_raw):
            radii = (float(radii_raw),) * (2 * n)
        else:
            radii = tuple(float(r) for r in radii_raw)
        if len(center) != 2 * n:
            raise ParameterError(
                f"region center needs {2 * n} coordinates, got {len(center)}")
        return RegionSpec(center, radii)

    def to_dict(self) -> dict:
        return {"center": list(self.center), "radii": list(self.radii)}

    def mask(self, grid: Grid) -> np.ndarray:
        """Boolean array over grid points; True inside the region."""
        if len(self.center) != 2 * grid.n:
            raise ParameterError(
                f"region has {len(self.center)} axes, grid has {2 * grid.n}")
        inside = np.ones(grid.shape, dtype=bool)
        for axis in range(2 * grid.n):
            d = np.abs(grid.axis_coordinate(axis) - self.center[axis])
            d = np.minimum(d, 1.0 - d)
            inside &= d <= self.radii[axis] + 1e-12
        if not inside.any():
            raise ParameterError(
                "region mask is empty; enlarge radii or refine the grid")
        if inside.all():
            raise ParameterError(
                "region mask covers the whole grid; it must be a proper subset")
        return inside


@dataclass
class HypothesisReport:
    """Outcome of one certification: verdict, margins, witnesses, echo."""

    name: str
    certified: bool
    margins: dict
    witnesses: list = field(default_factory=list)
    params: dict = field(default_factory=dict)
    slack: float = _DEFAULT_SLACK

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "certified": bool(self.certified),
            "margins": {k: float(v) for k, v in self.margins.items()},
            "witnesses": self.witnesses,
            "params": self.params,
            "slack": float(self.slack),
        }


def _collect_witnesses(values: np.ndarray, bound: float, mask: np.ndarray,
                       grid: Grid, constraint: str, slack: float) -> list:
    """Points where values > bound + slack inside mask, worst first."""
    viol = np.where(mask & (values > bound + slack))
    if viol[0].size == 0:
        return []
    flat_vals = values[viol]
    order = np.argsort(-flat_vals)[:_MAX_WITNESSES]
    out = []
    for j in order:
        idx = tuple(int(axis_idx[j]) for axis_idx in viol)
        out.append({
            "point": list(idx),
            "coords": [round(float(c), 12) for c in grid.point_coords(idx)],
            "value": float(values[idx]),
            "constraint": constraint,
        })
    return out


def certify_quasi_negative(extremal: ExtremalField, eps: float, delta: float,
                           region: RegionSpec, grid: Grid,
                           slack: float = _DEFAULT_SLACK) -> HypothesisReport:
    """Check F <= eps on the whole grid and F <= -delta on the region.

    ``F`` is the extremal field's plain per-point maximum.  Both margins are
    reported: ``global`` is min over all points of eps - F, ``region`` is
    min over region points of -delta - F.
    """
    if eps <= 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    if delta <= 0:
        raise ParameterError(f"delta must be positive, got {delta}")
    values = np.asarray(extremal.max_field, dtype=float)
    if values.shape != grid.shape:
        raise ParameterError(
            f"field shape {values.shape} does not match grid shape {grid.shape}")
    if not np.all(np.isfinite(values)):
        raise ParameterError(
            "extremal field contains non-finite entries (was it masked?); "
            "quasi-negativity needs values at every grid point")
    mask = region.mask(grid)
    margin_global = float(eps - values.max())
    margin_region = float(-delta - values[mask].max())
    certified = margin_global >= -slack and margin_region >= -slack
    witnesses = (
        _collect_witnesses(values, eps, np.ones_like(mask), grid, "global", slack)
        + _collect_witnesses(values, -delta, mask, grid, "region", slack))
    return HypothesisReport(
        name=f"quasi_negative[{extremal.kind}]",
        certified=certified,
        margins={"global": margin_global, "region": margin_region},
        witnesses=witnesses,
        params={"eps": float(eps), "delta": float(delta),
                "functional": extremal.kind, "region": region.to_dict(),
                **{k: v for k, v in extremal.params.items()
                   if isinstance(v, (int, float, str))}},
        slack=slack,
    )


def _psi_field(psi, grid: Grid) -> np.ndarray:
    if psi is None:
        return np.zeros(grid.shape)
    if isinstance(psi, TrigExpr):
        return psi.on_grid(grid)
    arr = np.asarray(psi, dtype=float)
    if arr.shape != grid.shape:
        raise ParameterError(
            f"psi field shape {arr.shape} does not match grid shape {grid.shape}")
    return arr


def certify_delta1_bounded(eta: MetricField, omega: MetricField, psi,
                           delta1: float,
                           slack: float = _DEFAULT_SLACK) -> HypothesisReport:
    """Check eta <= delta1*omega + ddc(psi) pointwise as Hermitian forms.

    The comparison function psi (a trig expression, an array over the grid,
    or None for zero) is normalized to sup psi = 0 before anything else;
    the Hessian term is unchanged by the shift, so the verdict cannot depend
    on it.  Two margins come back: ``primary`` is the smallest relative
    eigenvalue of delta1*omega + ddc(psi) - eta against omega, and
    ``scaled_form`` is the same inequality divided through by delta1
    (omega + ddc(psi)/delta1 - eta/delta1 against omega), assembled and
    solved independently as a cross-check.  They agree up to rounding.
    """
    if delta1 <= 0:
        raise ParameterError(f"delta1 must be positive, got {delta1}")
    if (eta.grid.n, eta.grid.N) != (omega.grid.n, omega.grid.N):
        raise ParameterError("eta and omega live on different grids")
    grid = omega.grid
    psi_vals = _psi_field(psi, grid)
    sup_psi = float(psi_vals.max())
    psi_vals = psi_vals - sup_psi
    hess = grid.ddc(psi_vals)

    defect = delta1 * omega.matrix + hess - eta.matrix
    rel = rel_eigvalsh(defect, omega.matrix)
    margin = float(rel[..., 0].min())

    scaled = omega.matrix + (hess - eta.matrix) / delta1
    rel_scaled = rel_eigvalsh(scaled, omega.matrix)
    margin_scaled = float(rel_scaled[..., 0].min())

    flat = rel[..., 0].reshape(-1)
    worst = int(np.argmin(flat))
    worst_idx = tuple(int(i) for i in np.unravel_index(worst, grid.shape))
    witnesses = []
    if margin < -slack:
        witnesses.append({
            "point": list(worst_idx),
            "coords": [round(float(c), 12) for c in grid.point_coords(worst_idx)],
            "value": margin,
            "constraint": "min relative eigenvalue",
        })
    return HypothesisReport(
        name="delta1_bounded",
        certified=margin >= -slack,
        margins={"primary": margin, "scaled_form": margin_scaled,
                 "sup_psi_before_shift": sup_psi},
        witnesses=witnesses,
        params={"delta1": float(delta1)},
        slack=slack,
    )


def certify_volume_noncollapse(eta: MetricField, omega: MetricField,
                               delta2: float, region: RegionSpec,
                               slack: float = _DEFAULT_SLACK) -> HypothesisReport:
    """Check det(eta)/det(omega) >= delta2 at every region point."""
    if delta2 <= 0:
        raise ParameterError(f"delta2 must be positive, got {delta2}")
    grid = omega.grid
    mask = region.mask(grid)
    ratio = eta.det / omega.det
    margin = float(ratio[mask].min() - delta2)
    witnesses = _collect_witnesses(-ratio, -delta2, mask, grid,
                                   "volume ratio", slack)
    return HypothesisReport(
        name="volume_noncollapse",
        certified=margin >= -slack,
        margins={"region": margin},
        witnesses=witnesses,
        params={"delta2": float(delta2), "region": region.to_dict()},
        slack=slack,
    )


def find_delta(extremal: ExtremalField, eps: float, region: RegionSpec,
               grid: Grid, tol: float = 1e-4,
               slack: float = _DEFAULT_SLACK) -> float:
    """Largest delta for which quasi-negativity certifies, to ``tol``.

    Returns 0.0 when no positive delta certifies (the region maximum is not
    negative, or the global eps constraint already fails).  Bisection runs
    on the actual certifier so the answer inherits its slack handling.
    """
    if tol <= 0:
        raise ParameterError(f"tol must be positive, got {tol}")

    def ok(delta: float) -> bool:
        return certify_quasi_negative(
            extremal, eps, delta, region, grid, slack=slack).certified

    lo = tol
    if not ok(lo):
        return 0.0
    hi = lo
    while ok(hi):
        hi *= 2.0
        if hi > 1e12:
            raise ParameterError(
                "field appears unbounded below on the region; "
                "no finite largest delta")
    # invariant: ok(lo) holds, ok(hi) fails
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo
