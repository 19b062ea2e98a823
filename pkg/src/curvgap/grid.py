"""Uniform periodic grids and spectral calculus on complex tori.

The model space is the torus obtained from C^n by quotienting out the unit
Gaussian lattice in every complex coordinate, so each of the 2n real
coordinates x^1, y^1, ..., x^n, y^n lives in [0, 1).  Fields are sampled on
a uniform lattice with N points per axis and all derivatives are spectral:
a field is identified with its trigonometric interpolant and differentiated
exactly.  Because products of sampled fields are formed pointwise, results
are exact for band-limited data and spectrally accurate for smooth data.

Conventions
-----------
* d/dz^k = (d/dx^k - i d/dy^k) / 2 and d/dzbar^k is its conjugate.
* (ddc f)_{i jbar} = d^2 f / dz^i dzbar^j, a Hermitian matrix field for
  real f.
* Integration is the lattice mean times the unit torus volume, so the
  constant 1 integrates to exactly 1.0.

Array layout
------------
A scalar field is an ndarray of shape (N,) * 2n with axes ordered
(x^1, y^1, ..., x^n, y^n); component indices of matrix and tensor fields
trail the point axes.  Binary dumps flatten in C order, which makes them
point-major and component-minor.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FieldChecksumError, ParameterError

_LAYOUT_TAG = "point-major,component-minor,row-major:x1,y1,...,xn,yn"


def _is_power_of_two(m: int) -> bool:
    return m >= 1 and (m & (m - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Uniform sampling lattice on the unit complex torus.

    Parameters
    ----------
    n : int
        Complex dimension, between 1 and 3.
    N : int
        Points per real axis; a power of two, at least 8.  The lattice has
        N ** (2n) points in total.
    """

    n: int
    N: int
    _wavenumbers: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not isinstance(self.n, int) or not (1 <= self.n <= 3):
            raise ParameterError(f"complex dimension n must be 1, 2 or 3, got {self.n!r}")
        if not isinstance(self.N, int) or self.N < 8 or not _is_power_of_two(self.N):
            raise ParameterError(
                f"N must be a power of two with N >= 8, got {self.N!r}")
        # Integer Fourier modes with the Nyquist mode removed: the symmetric
        # trigonometric interpolant of real samples has zero derivative from
        # that mode at the nodes.
        modes = np.fft.fftfreq(self.N, d=1.0 / self.N)
        modes[self.N // 2] = 0.0
        object.__setattr__(self, "_wavenumbers", 2.0j * np.pi * modes)

    @property
    def shape(self) -> tuple:
        return (self.N,) * (2 * self.n)

    @property
    def npoints(self) -> int:
        return self.N ** (2 * self.n)

    def axis_coordinate(self, axis: int) -> np.ndarray:
        """Coordinate values j/N along one real axis, broadcast to the grid shape."""
        if not (0 <= axis < 2 * self.n):
            raise ParameterError(f"axis {axis} out of range for 2n = {2 * self.n}")
        c = np.arange(self.N) / self.N
        shape = [1] * (2 * self.n)
        shape[axis] = self.N
        return np.broadcast_to(c.reshape(shape), self.shape)

    def coordinates(self) -> list:
        """All 2n coordinate fields, ordered (x^1, y^1, ..., x^n, y^n)."""
        return [self.axis_coordinate(a) for a in range(2 * self.n)]

    def point_coords(self, index: tuple) -> tuple:
        """Coordinates of the lattice point with the given multi-index."""
        return tuple(i / self.N for i in index)

    # -- spectral derivatives -------------------------------------------------

    def deriv_symbols(self) -> tuple:
        """Fourier multipliers of the complex first derivatives.

        Returns (sigma, tau): two lists of length n holding broadcastable
        arrays such that, for the full 2n-dimensional FFT fhat of a field f,
        ifftn(sigma[i] * fhat) is the derivative along z^i and
        ifftn(tau[j] * fhat) the derivative along zbar^j.  Products
        sigma[i] * tau[j] are then the Hessian entry multipliers, consistent
        with ddc including its Nyquist handling.
        """
        per_axis = []
        for axis in range(2 * self.n):
            shape = [1] * (2 * self.n)
            shape[axis] = self.N
            per_axis.append(self._wavenumbers.reshape(shape))
        sigma = [0.5 * (per_axis[2 * i] - 1.0j * per_axis[2 * i + 1])
                 for i in range(self.n)]
        tau = [0.5 * (per_axis[2 * j] + 1.0j * per_axis[2 * j + 1])
               for j in range(self.n)]
        return sigma, tau

    def _axis_deriv(self, f: np.ndarray, axis: int) -> np.ndarray:
        mult_shape = [1] * f.ndim
        mult_shape[axis] = self.N
        mult = self._wavenumbers.reshape(mult_shape)
        return np.fft.ifft(mult * np.fft.fft(f, axis=axis), axis=axis)

    def holo_deriv(self, f: np.ndarray, k: int, conjugate: bool = False) -> np.ndarray:
        """Exact spectral d/dz^k (or d/dzbar^k) of the interpolant of f.

        Parameters
        ----------
        f : ndarray
            Field whose leading 2n axes are the grid axes; trailing component
            axes pass through untouched.
        k : int
            Complex coordinate index, 0-based.
        conjugate : bool
            If True differentiate along zbar^k instead of z^k.
        """
        if not (0 <= k < self.n):
            raise ParameterError(f"coordinate index {k} out of range for n = {self.n}")
        dx = self._axis_deriv(f, 2 * k)
        dy = self._axis_deriv(f, 2 * k + 1)
        return 0.5 * (dx + 1.0j * dy) if conjugate else 0.5 * (dx - 1.0j * dy)

    def ddc(self, f: np.ndarray) -> np.ndarray:
        """Complex Hessian of a scalar field: out[..., i, j] = d_i dbar_j f.

        For real input the result is Hermitian by construction: entries with
        i <= j are computed spectrally and the lower triangle mirrors their
        conjugates, with real diagonal.
        """
        n = self.n
        out = np.empty(self.shape + (n, n), dtype=np.complex128)
        real_input = np.isrealobj(f) or np.max(np.abs(np.imag(f))) == 0.0
        dbar = [self.holo_deriv(f, j, conjugate=True) for j in range(n)]
        for i in range(n):
            for j in range(n):
                if real_input and j < i:
                    continue
                out[..., i, j] = self.holo_deriv(dbar[j], i)
        if real_input:
            for i in range(n):
                out[..., i, i] = out[..., i, i].real
                for j in range(i + 1, n):
                    out[..., j, i] = np.conj(out[..., i, j])
        return out

    # -- quadrature -----------------------------------------------------------

    def integrate(self, density: np.ndarray):
        """Integral of a pointwise density over the unit-volume torus.

        The quadrature is the lattice mean; a constant density c integrates
        to exactly c.  Raises ValueError naming the first offending point if
        the density is not finite everywhere.
        """
        arr = np.asarray(density)
        finite = np.isfinite(arr) if not np.iscomplexobj(arr) else (
            np.isfinite(arr.real) & np.isfinite(arr.imag))
        if not finite.all():
            bad = np.unravel_index(int(np.argmin(finite)), arr.shape)
            raise ValueError(
                f"non-finite density value {arr[bad]!r} at grid point {bad}")
        value = arr.mean()
        return complex(value) if np.iscomplexobj(arr) else float(value)


# -- binary field dumps -------------------------------------------------------


def dump_field(directory, name: str, array: np.ndarray, grid: Grid) -> Path:
    """Write a field as raw little-endian float64 plus a JSON sidecar.

    Complex data is interleaved re/im (little-endian complex128).  The
    sidecar records the grid, the layout tag, the dtype and shape, and a
    sha256 of the binary payload for integrity checking on load.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    arr = np.ascontiguousarray(array)
    if np.iscomplexobj(arr):
        payload = arr.astype("<c16").tobytes()
        dtype = "complex128"
    else:
        payload = arr.astype("<f8").tobytes()
        dtype = "float64"
    bin_path = directory / f"{name}.f64"
    bin_path.write_bytes(payload)
    meta = {
        "name": name,
        "n": grid.n,
        "N": grid.N,
        "layout": _LAYOUT_TAG,
        "dtype": dtype,
        "shape": list(arr.shape),
        "sha256": hashlib.sha256(payload).hexdigest(),
    }
    (directory / f"{name}.json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    return bin_path


def load_field(directory, name: str) -> tuple:
    """Read a dumped field, verifying shape and checksum.

    Returns (array, metadata).  Raises FieldChecksumError naming the binary
    file when the payload does not match its recorded sha256.
    """
    directory = Path(directory)
    meta = json.loads((directory / f"{name}.json").read_text())
    bin_path = directory / f"{name}.f64"
    payload = bin_path.read_bytes()
    digest = hashlib.sha256(payload).hexdigest()
    if digest != meta["sha256"]:
        raise FieldChecksumError(
            f"checksum mismatch for field dump {bin_path}: "
            f"expected {meta['sha256']}, got {digest}")
    dtype = "<c16" if meta["dtype"] == "complex128" else "<f8"
    arr = np.frombuffer(payload, dtype=dtype).reshape(meta["shape"])
    return arr.copy(), meta
