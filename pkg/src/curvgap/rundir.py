"""Run directory persistence.

Layout of a run directory:

    config.json     fully defaulted configuration echo
    meta.json       versions, grid shape, summary column-set version, timings
    fields/         binary dumps, one .bin + one .json sidecar per field
    summary.csv     one row per path sample, appended crash-safely
    report.json     deterministic (sorted keys, no timestamps)
    plots/          static SVG

Field dumps are raw little-endian arrays ('<f8' or '<c16') with a JSON
sidecar recording dtype, shape, and a sha256 of the bytes. Loading verifies
the checksum and raises FieldChecksumError naming the file on mismatch.

report.json carries no wall-clock data, so a re-run with the same inputs
and seed reproduces it byte for byte; timings live in meta.json.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from .errors import FieldChecksumError, ParameterError

SUMMARY_COLUMNS_VERSION = 1
SUMMARY_COLUMNS = [
    "index", "t", "sup_u", "min_eig", "sup_tr_eta",
    "int_exp_u", "int_exp_cu", "newton_iters", "residual",
]

_ALLOWED_DTYPES = {"<f8", "<c16"}


def _fmt(value) -> str:
    # repr of a float is its shortest round-trip decimal, so rows are
    # deterministic and lossless
    return repr(value) if isinstance(value, float) else str(value)


class RunDirectory:
    """Handle on one run's on-disk state."""

    def __init__(self, root, create: bool = True):
        self.root = Path(root)
        if create:
            self.root.mkdir(parents=True, exist_ok=True)
            (self.root / "fields").mkdir(exist_ok=True)
            (self.root / "plots").mkdir(exist_ok=True)
        elif not self.root.is_dir():
            raise ParameterError(f"run directory {self.root} does not exist")
        self._csv_header_written = (self.root / "summary.csv").exists()

    # -- config echo and metadata ------------------------------------------

    def write_config(self, echo: dict) -> None:
        path = self.root / "config.json"
        path.write_text(json.dumps(echo, indent=2, sort_keys=True) + "\n",
                        encoding="utf-8")

    def read_config(self) -> dict:
        path = self.root / "config.json"
        if not path.exists():
            raise ParameterError(f"{path} not found; not a completed run directory")
        return json.loads(path.read_text(encoding="utf-8"))

    def write_meta(self, grid_shape, timings: dict | None = None,
                   extra: dict | None = None) -> None:
        import curvgap
        import scipy
        from . import kernels
        meta = {
            "versions": {
                "curvgap": curvgap.__version__,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "python": sys.version.split()[0],
            },
            "kernel_backend": kernels.BACKEND,
            "grid_shape": list(grid_shape),
            "summary_columns_version": SUMMARY_COLUMNS_VERSION,
            "summary_columns": SUMMARY_COLUMNS,
        }
        if timings:
            meta["timings_sec"] = {k: round(v, 3) for k, v in timings.items()}
        if extra:
            meta.update(extra)
        (self.root / "meta.json").write_text(
            json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    def read_meta(self) -> dict:
        return json.loads((self.root / "meta.json").read_text(encoding="utf-8"))

    # -- binary field dumps --------------------------------------------------

    def save_field(self, name: str, array: np.ndarray) -> None:
        arr = np.ascontiguousarray(array)
        if arr.dtype == np.float64:
            dtype = "<f8"
        elif arr.dtype == np.complex128:
            dtype = "<c16"
        else:
            raise ParameterError(
                f"field {name!r} has dtype {arr.dtype}; dumps are float64 or complex128")
        data = arr.astype(dtype, copy=False).tobytes()
        bin_path = self.root / "fields" / f"{name}.bin"
        bin_path.write_bytes(data)
        sidecar = {
            "dtype": dtype,
            "shape": list(arr.shape),
            "sha256": hashlib.sha256(data).hexdigest(),
        }
        (self.root / "fields" / f"{name}.json").write_text(
            json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    def load_field(self, name: str) -> np.ndarray:
        bin_path = self.root / "fields" / f"{name}.bin"
        meta_path = self.root / "fields" / f"{name}.json"
        if not bin_path.exists() or not meta_path.exists():
            raise ParameterError(f"field dump {bin_path} (or its sidecar) is missing")
        sidecar = json.loads(meta_path.read_text(encoding="utf-8"))
        dtype = sidecar["dtype"]
        if dtype not in _ALLOWED_DTYPES:
            raise FieldChecksumError(f"{meta_path}: unsupported dtype {dtype!r}")
        data = bin_path.read_bytes()
        digest = hashlib.sha256(data).hexdigest()
        if digest != sidecar["sha256"]:
            raise FieldChecksumError(
                f"{bin_path}: sha256 {digest[:12]}... does not match sidecar "
                f"{sidecar['sha256'][:12]}...; the dump is corrupted")
        return np.frombuffer(data, dtype=dtype).reshape(sidecar["shape"]).copy()

    def list_fields(self) -> list:
        return sorted(p.stem for p in (self.root / "fields").glob("*.bin"))

    # -- summary rows ----------------------------------------------------------

    def append_summary_row(self, index: int, sample) -> None:
        """One row per path sample; header on first write; fsync per row so a
        killed process leaves a readable prefix."""
        path = self.root / "summary.csv"
        with open(path, "a", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            if not self._csv_header_written:
                writer.writerow(SUMMARY_COLUMNS)
                self._csv_header_written = True
            d = sample.diagnostics
            writer.writerow([
                index, _fmt(float(sample.t)),
                _fmt(float(d["sup_u"])), _fmt(float(d["min_eig"])),
                _fmt(float(d["sup_tr_eta"])), _fmt(float(d["int_exp_u"])),
                _fmt(float(d["int_exp_cu"])), int(d["newton_iters"]),
                _fmt(float(d["residual"])),
            ])
            fh.flush()
            os.fsync(fh.fileno())

    def read_summary(self) -> list:
        path = self.root / "summary.csv"
        if not path.exists():
            return []
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            return []
        header, body = rows[0], rows[1:]
        if header != SUMMARY_COLUMNS:
            raise ParameterError(
                f"{path} has column set {header}; this reader expects version "
                f"{SUMMARY_COLUMNS_VERSION} ({SUMMARY_COLUMNS})")
        return [dict(zip(header, row)) for row in body]

    # -- report -------------------------------------------------------------

    def write_report(self, report: dict) -> None:
        text = json.dumps(report, indent=2, sort_keys=True,
                          allow_nan=False) + "\n"
        (self.root / "report.json").write_text(text, encoding="utf-8")

    def read_report(self) -> dict:
        path = self.root / "report.json"
        if not path.exists():
            raise ParameterError(f"{path} not found; run `audit` first")
        return json.loads(path.read_text(encoding="utf-8"))

    @property
    def plots_dir(self) -> Path:
        return self.root / "plots"


def sanitize_json(obj):
    """Replace non-finite floats so reports stay strict JSON."""
    if isinstance(obj, dict):
        return {k: sanitize_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sanitize_json(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return {"non_finite": repr(obj)}
    return obj


__all__ = ["RunDirectory", "SUMMARY_COLUMNS", "SUMMARY_COLUMNS_VERSION",
           "sanitize_json"]
