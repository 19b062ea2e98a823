"""Hermitian metric fields on the torus and their Chern curvature.

A metric is a Hermitian positive definite matrix field g[..., i, j] holding
the components g_{i jbar}.  Four construction families are supported:

``flat``
    The identity matrix everywhere.
``kahler_potential``
    g = I + ddc(phi) for a real trigonometric potential phi; always Kahler.
``conformal``
    g = exp(lam) * I for a real trigonometric exponent lam; Kahler only for
    n = 1, which makes it the stock non-Kahler Hermitian example in higher
    dimension.
``direct``
    Explicit Hermitian components, each entry a trigonometric expression;
    the loosest family, validated pointwise for positivity.

Curvature follows the Chern connection:

    R_{i jbar k lbar} = -d_k dbar_l g_{i jbar}
                        + g^{p qbar} (d_k g_{i qbar}) (dbar_l g_{p jbar})

with the first pair (i, jbar) indexing the bundle and the second pair
(k, lbar) the base directions.  The Ricci form is -ddc log det g, which for
any Hermitian metric coincides with the bundle-index trace of R.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from math import factorial

import numpy as np

from .errors import NotPositiveDefinite, ParameterError, SingularMetric
from .grid import Grid

_FAMILIES = ("flat", "kahler_potential", "conformal", "direct")


# -- trigonometric expressions -------------------------------------------------


@dataclass(frozen=True)
class TrigTerm:
    coefficient: float
    modes: tuple
    kind: str  # "cos" or "sin"

    def __post_init__(self):
        if self.kind not in ("cos", "sin"):
            raise ParameterError(f"trig term kind must be 'cos' or 'sin', got {self.kind!r}")
        if not all(isinstance(m, int) for m in self.modes):
            raise ParameterError(f"trig term modes must be integers, got {self.modes!r}")


@dataclass(frozen=True)
class TrigExpr:
    """Finite trigonometric sum c0 + sum_j c_j trig(2 pi m_j . x).

    The mode vector of each term has one integer per real axis, ordered
    (x^1, y^1, ..., x^n, y^n).  Expressions evaluate exactly at arbitrary
    points, which keeps them usable both for grid sampling and for
    independent pointwise checks.
    """

    terms: tuple = ()
    constant: float = 0.0

    @staticmethod
    def from_dict(data: dict, n_axes: int) -> "TrigExpr":
        if not isinstance(data, dict):
            raise ParameterError(f"trig expression must be an object, got {type(data).__name__}")
        terms = []
        for raw in data.get("terms", []):
            modes = tuple(raw["modes"])
            if len(modes) != n_axes:
                raise ParameterError(
                    f"mode vector {modes} has length {len(modes)}, expected {n_axes}")
            terms.append(TrigTerm(float(raw["c"]), modes, raw.get("kind", "cos")))
        return TrigExpr(tuple(terms), float(data.get("constant", 0.0)))

    def to_dict(self) -> dict:
        return {
            "constant": self.constant,
            "terms": [
                {"c": t.coefficient, "modes": list(t.modes), "kind": t.kind}
                for t in self.terms
            ],
        }

    @property
    def max_mode(self) -> int:
        return max((max(abs(m) for m in t.modes) for t in self.terms), default=0)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Value at points of shape (..., 2n)."""
        pts = np.asarray(points, dtype=float)
        out = np.full(pts.shape[:-1], self.constant, dtype=float)
        for t in self.terms:
            phase = 2.0 * np.pi * (pts @ np.asarray(t.modes, dtype=float))
            out += t.coefficient * (np.cos(phase) if t.kind == "cos" else np.sin(phase))
        return out

    def on_grid(self, grid: Grid) -> np.ndarray:
        out = np.full(grid.shape, self.constant, dtype=float)
        for t in self.terms:
            phase = np.zeros(grid.shape)
            for axis, m in enumerate(t.modes):
                if m:
                    phase = phase + (2.0 * np.pi * m) * grid.axis_coordinate(axis)
            out += t.coefficient * (np.cos(phase) if t.kind == "cos" else np.sin(phase))
        return out

    def complex_modes(self, n_axes: int) -> list:
        """Decompose into exponentials: pairs (w, m) with expr = sum w e^{2 pi i m.x}.

        Conjugate mode pairs are listed explicitly, so derivatives of any
        order follow by multiplying w with per-factor symbols.  The constant
        contributes (c0, zero mode).
        """
        comps = []
        for t in self.terms:
            m = np.asarray(t.modes, dtype=float)
            half = 0.5 * t.coefficient
            if t.kind == "cos":
                comps.append((complex(half), m))
                comps.append((complex(half), -m))
            else:
                comps.append((complex(0.0, -half), m))
                comps.append((complex(0.0, half), -m))
        if self.constant:
            comps.append((complex(self.constant), np.zeros(n_axes)))
        return comps

    def holo_deriv_at(self, points: np.ndarray, n: int, holo: tuple = (),
                      anti: tuple = ()) -> np.ndarray:
        """Exact mixed derivative at arbitrary points.

        ``holo`` lists z-indices and ``anti`` lists zbar-indices, each applied
        once per occurrence.  Returns a complex array shaped like the leading
        axes of ``points``.
        """
        pts = np.asarray(points, dtype=float)
        out = np.zeros(pts.shape[:-1], dtype=np.complex128)
        for w, m in self.complex_modes(2 * n):
            mult = w
            for j in holo:
                mult *= np.pi * (m[2 * j + 1] + 1.0j * m[2 * j])
            for j in anti:
                mult *= np.pi * (-m[2 * j + 1] + 1.0j * m[2 * j])
            if mult == 0:
                continue
            out += mult * np.exp(2.0j * np.pi * (pts @ m))
        return out


# -- metric construction -------------------------------------------------------


@dataclass(frozen=True)
class MetricSpec:
    """Recipe for one metric field."""

    family: str
    potential: TrigExpr | None = None          # kahler_potential
    log_conformal: TrigExpr | None = None      # conformal
    components: dict | None = None             # direct: {"ij": {"re":..., "im":...}}

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ParameterError(
                f"unknown metric family {self.family!r}; expected one of {_FAMILIES}")
        if self.family == "kahler_potential" and self.potential is None:
            raise ParameterError("kahler_potential family requires a potential expression")
        if self.family == "conformal" and self.log_conformal is None:
            raise ParameterError("conformal family requires a log_conformal expression")
        if self.family == "direct" and not self.components:
            raise ParameterError("direct family requires component expressions")

    @staticmethod
    def from_dict(data: dict, n: int) -> "MetricSpec":
        family = data.get("family")
        if family == "flat":
            return MetricSpec("flat")
        if family == "kahler_potential":
            return MetricSpec(family, potential=TrigExpr.from_dict(
                data.get("potential", {}), 2 * n))
        if family == "conformal":
            return MetricSpec(family, log_conformal=TrigExpr.from_dict(
                data.get("log_conformal", {}), 2 * n))
        if family == "direct":
            comps = {}
            for key, entry in data.get("components", {}).items():
                i, j = (int(part) for part in key.split(","))
                if not (0 <= i <= j):
                    raise ParameterError(f"direct component key {key!r} must have 0 <= i <= j")
                comps[(i, j)] = {
                    "re": TrigExpr.from_dict(entry.get("re", {}), 2 * n),
                    "im": TrigExpr.from_dict(entry.get("im", {}), 2 * n),
                }
            return MetricSpec(family, components=comps)
        raise ParameterError(f"unknown metric family {family!r}; expected one of {_FAMILIES}")

    def to_dict(self) -> dict:
        if self.family == "flat":
            return {"family": "flat"}
        if self.family == "kahler_potential":
            return {"family": self.family, "potential": self.potential.to_dict()}
        if self.family == "conformal":
            return {"family": self.family, "log_conformal": self.log_conformal.to_dict()}
        return {
            "family": "direct",
            "components": {
                f"{i},{j}": {"re": entry["re"].to_dict(), "im": entry["im"].to_dict()}
                for (i, j), entry in sorted(self.components.items())
            },
        }


def hermitize(m: np.ndarray) -> np.ndarray:
    """Average a matrix field with its conjugate transpose."""
    return 0.5 * (m + np.conj(np.swapaxes(m, -1, -2)))


def rel_eigvalsh(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Eigenvalues of Hermitian a relative to Hermitian positive definite b.

    Batched over leading axes via the Cholesky transform; returns real
    eigenvalues sorted ascending along the last axis.
    """
    chol = np.linalg.cholesky(b)
    x = np.linalg.solve(chol, a)
    m = np.conj(np.swapaxes(np.linalg.solve(chol, np.conj(np.swapaxes(x, -1, -2))), -1, -2))
    return np.linalg.eigvalsh(hermitize(m))


def _check_positive(grid: Grid, matrix: np.ndarray, what: str) -> float:
    eigs = np.linalg.eigvalsh(hermitize(matrix))
    min_eig = float(eigs[..., 0].min())
    if not np.isfinite(min_eig) or min_eig <= 0.0:
        flat_idx = int(np.argmin(eigs[..., 0]))
        point = tuple(int(c) for c in np.unravel_index(flat_idx, grid.shape))
        raise NotPositiveDefinite(
            f"{what} is not positive definite: eigenvalue {min_eig:.6e} "
            f"at grid point {point}",
            point=point, eigenvalue=min_eig)
    return min_eig


@dataclass
class MetricField:
    """A realized Hermitian metric: samples plus validation metadata."""

    grid: Grid
    spec: MetricSpec
    matrix: np.ndarray
    min_eigenvalue: float

    @cached_property
    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.matrix)

    @cached_property
    def det(self) -> np.ndarray:
        d = np.linalg.det(self.matrix).real
        if not np.all(np.isfinite(d)) or d.min() <= 0.0:
            flat_idx = int(np.argmin(d))
            point = np.unravel_index(flat_idx, self.grid.shape)
            raise SingularMetric(
                f"metric determinant {d.reshape(-1)[flat_idx]:.6e} at grid point {point}")
        return d

    @cached_property
    def cholesky(self) -> np.ndarray:
        return np.linalg.cholesky(self.matrix)

    @cached_property
    def kahler_defect(self) -> float:
        """max |d_k g_{i jbar} - d_i g_{k jbar}| over the grid; 0 means Kahler."""
        n = self.grid.n
        d = [self.grid.holo_deriv(self.matrix, k) for k in range(n)]
        worst = 0.0
        for k in range(n):
            for i in range(k + 1, n):
                worst = max(worst, float(np.max(np.abs(d[k][..., i, :] - d[i][..., k, :]))))
        return worst

    def is_kahler(self, tol: float = 1e-10) -> bool:
        return self.kahler_defect <= tol

    def matrix_at(self, points: np.ndarray) -> np.ndarray:
        """Analytic metric matrix at arbitrary points of shape (..., 2n)."""
        return _assemble_matrix(self.spec, self.grid.n, points=points)


def _assemble_matrix(spec: MetricSpec, n: int, grid: Grid | None = None,
                     points: np.ndarray | None = None) -> np.ndarray:
    """Sample a metric family on the grid or at arbitrary points.

    Exactly one of ``grid`` and ``points`` is given.  Grid sampling uses
    spectral ddc for the potential family, which is exact below the alias
    limit; pointwise sampling uses closed-form derivatives.
    """
    if grid is not None:
        base_shape = grid.shape
    else:
        pts = np.asarray(points, dtype=float)
        base_shape = pts.shape[:-1]
    out = np.zeros(base_shape + (n, n), dtype=np.complex128)

    if spec.family == "flat":
        out[...] = np.eye(n)
        return out

    if spec.family == "kahler_potential":
        if grid is not None:
            if 2 * spec.potential.max_mode >= grid.N:
                raise ParameterError(
                    f"potential mode {spec.potential.max_mode} is not resolvable "
                    f"on an N = {grid.N} grid; need max mode < N/2")
            out = grid.ddc(spec.potential.on_grid(grid))
        else:
            for i in range(n):
                for j in range(n):
                    out[..., i, j] = spec.potential.holo_deriv_at(
                        points, n, holo=(i,), anti=(j,))
        out += np.eye(n)
        return out

    if spec.family == "conformal":
        lam = (spec.log_conformal.on_grid(grid) if grid is not None
               else spec.log_conformal.evaluate(points))
        out[...] = np.eye(n)
        out *= np.exp(lam)[..., None, None]
        return out

    # direct
    for i in range(n):
        if (i, i) not in spec.components:
            raise ParameterError(f"direct family is missing diagonal component ({i},{i})")
    for (i, j), entry in spec.components.items():
        if j >= n:
            raise ParameterError(f"direct component ({i},{j}) out of range for n = {n}")
        re = (entry["re"].on_grid(grid) if grid is not None
              else entry["re"].evaluate(points))
        im = (entry["im"].on_grid(grid) if grid is not None
              else entry["im"].evaluate(points))
        if i == j:
            if entry["im"].terms or entry["im"].constant:
                raise ParameterError(f"diagonal component ({i},{i}) must be real")
            out[..., i, i] = re
        else:
            out[..., i, j] = re + 1.0j * im
            out[..., j, i] = re - 1.0j * im
    return out


def build_metric(grid: Grid, spec: MetricSpec) -> MetricField:
    """Realize a metric spec on a grid, validating positivity.

    Raises NotPositiveDefinite with the worst grid point and eigenvalue if
    the assembled matrix field fails the pointwise check.
    """
    matrix = _assemble_matrix(spec, grid.n, grid=grid)
    min_eig = _check_positive(grid, matrix, f"metric (family {spec.family!r})")
    return MetricField(grid=grid, spec=spec, matrix=matrix, min_eigenvalue=min_eig)


# -- curvature ------------------------------------------------------------------


def ricci_form(metric: MetricField) -> np.ndarray:
    """Ricci form -ddc log det g as a Hermitian matrix field."""
    return -metric.grid.ddc(np.log(metric.det))


@dataclass
class CurvatureTensorField:
    """Chern curvature samples R[..., i, j, k, l] plus derived quantities."""

    grid: Grid
    metric: MetricField
    tensor: np.ndarray
    ricci: np.ndarray

    @cached_property
    def b0(self) -> float:
        """Smallest b >= 0 with Ricci >= -b * g pointwise."""
        eigs = rel_eigvalsh(-self.ricci, self.metric.matrix)
        return max(0.0, float(eigs[..., -1].max()))


def chern_curvature(metric: MetricField) -> CurvatureTensorField:
    """Assemble the full Chern curvature tensor of a metric field.

    The tensor is stored with bundle indices first: R[..., i, j, k, l] holds
    R_{i jbar k lbar}.  Conjugate symmetry R_{i jbar k lbar} =
    conj(R_{j ibar l kbar}) holds by construction of the two terms.
    """
    grid, g = metric.grid, metric.matrix
    n = grid.n
    inv = metric.inverse
    first = [grid.holo_deriv(g, k) for k in range(n)]

    shape = grid.shape + (n, n, n, n)
    tensor = np.empty(shape, dtype=np.complex128)
    for k in range(n):
        dk_bar = [grid.holo_deriv(first[k], l, conjugate=True) for l in range(n)]
        for l in range(n):
            second = dk_bar[l]
            torsionish = first[k] @ inv @ np.conj(np.swapaxes(first[l], -1, -2))
            tensor[..., :, :, k, l] = -second + torsionish
    return CurvatureTensorField(grid=grid, metric=metric, tensor=tensor,
                                ricci=ricci_form(metric))


def curvature_at_points(spec: MetricSpec, n: int, points: np.ndarray,
                        step: float = 3e-3) -> np.ndarray:
    """Chern curvature at arbitrary points from centered finite differences.

    Builds nothing spectral: metric matrices are evaluated analytically at
    stencil points and the derivative combinations use fourth-order central
    differences in each real coordinate.  Intended as an independent
    reference for the spectral assembly.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]

    def g_at(shift):
        return _assemble_matrix(spec, n, points=pts + shift)

    coeffs = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0
    offs = np.array([-2.0, -1.0, 1.0, 2.0])

    def axis_deriv(fn, axis):
        def d(shift):
            acc = 0.0
            for c, o in zip(coeffs, offs):
                e = np.zeros(2 * n)
                e[axis] = o * step
                acc = acc + c * fn(shift + e)
            return acc / step
        return d

    def holo(fn, j, conjugate=False):
        dx = axis_deriv(fn, 2 * j)
        dy = axis_deriv(fn, 2 * j + 1)
        sign = 1.0j if conjugate else -1.0j
        return lambda shift: 0.5 * (dx(shift) + sign * dy(shift))

    zero = np.zeros(2 * n)
    g0 = g_at(zero)
    inv = np.linalg.inv(g0)
    out = np.empty(pts.shape[:-1] + (n, n, n, n), dtype=np.complex128)
    for k in range(n):
        dk = holo(g_at, k)
        dk0 = dk(zero)
        for l in range(n):
            second = holo(dk, l, conjugate=True)(zero)
            dl0 = holo(g_at, l)(zero)
            torsionish = dk0 @ inv @ np.conj(np.swapaxes(dl0, -1, -2))
            out[..., :, :, k, l] = -second + torsionish
    return out


# -- mixed determinant integrals -------------------------------------------------


def mixed_density(a: np.ndarray, b: np.ndarray, k: int, n: int) -> np.ndarray:
    """Pointwise density of the k-fold product of a with the (n-k)-fold of b.

    Expands det(s a + b) in powers of s at integer nodes and rescales the
    coefficient of s^k by k! (n-k)! / n!.  With a = b = g every k returns
    det g, the top-power density of a single form.
    """
    if not (0 <= k <= n):
        raise ParameterError(f"mixed power k = {k} out of range for n = {n}")
    nodes = np.arange(n + 1, dtype=float)
    dets = np.stack([np.linalg.det(s * a + b).real for s in nodes], axis=-1)
    vand = np.vander(nodes, n + 1, increasing=True)
    coeffs = dets @ np.linalg.inv(vand).T
    scale = factorial(k) * factorial(n - k) / factorial(n)
    return coeffs[..., k] * scale


def mixed_top_integral(grid: Grid, a: np.ndarray, b: np.ndarray, k: int) -> float:
    """Integral over the torus of the mixed density of (a^k, b^{n-k})."""
    return grid.integrate(mixed_density(a, b, k, grid.n))
