"""Field snapshots and plot-data tables.

Snapshot layout (``.npz``, uncompressed, arrays in C order):

    header   float64[6]   nx, ny, lx, ly, d, time
    a1, a2   float64[nx, ny]   connection, A_j = 1j * a_j
    phi      complex128[nx, ny]
    va1, va2, vphi   (optional) velocities of a DynState

Index ``[i, j]`` is the sample at ``(i*lx/nx, j*ly/ny)``. Every snapshot is
checked for an integer flux on write and on read.
"""
from __future__ import annotations

import csv
import re
from pathlib import Path

import numpy as np

from .dynamics import DynState
from .errors import FluxError, ShapeError
from .fields import GaugePair, flux_number, magnetic_field
from .grid import TorusGrid

FLUX_TOL = 1e-10
FLOAT_FMT = "{:.12e}"


def check_flux(pair: GaugePair, grid: TorusGrid, tol: float = FLUX_TOL) -> float:
    """Vortex number of ``pair``; raises :class:`FluxError` unless it is ``degree`` to ``tol``."""
    n = flux_number(pair, grid)
    if not abs(n - pair.degree) <= tol:
        raise FluxError(f"flux {n:.15g} is not the integer {pair.degree} (tol {tol:g})")
    return n


def write_snapshot(path, pair_or_state, grid: TorusGrid, t: float | None = None) -> Path:
    path = Path(path)
    if isinstance(pair_or_state, DynState):
        state = pair_or_state
        pair = state.pair
        extra = dict(va1=state.va1, va2=state.va2, vphi=state.vphi)
        t = state.t if t is None else t
    else:
        pair, extra = pair_or_state, {}
    grid.check(pair.phi, "snapshot")
    check_flux(pair, grid)
    if not all(np.isfinite(f).all() for f in (pair.phi, *extra.values())):
        raise FluxError("snapshot fields must be finite")
    header = np.array([grid.nx, grid.ny, grid.lx, grid.ly, pair.degree, 0.0 if t is None else t], float)
    with open(path, "wb") as fh:
        np.savez(fh, header=header, a1=pair.a1, a2=pair.a2, phi=pair.phi, **extra)
    return path


def read_snapshot(path):
    """Return ``(pair_or_state, grid, t)``; a ``DynState`` if velocities were stored."""
    with np.load(path) as data:
        h = data["header"]
        if h.shape != (6,):
            raise ShapeError("snapshot header must hold six numbers")
        grid = TorusGrid(int(h[0]), int(h[1]), float(h[2]), float(h[3]))
        pair = GaugePair(data["a1"], data["a2"], data["phi"], int(h[4]))
        grid.check(pair.phi, "snapshot")
        check_flux(pair, grid)
        t = float(h[5])
        if "vphi" in data:
            return DynState(pair, data["va1"], data["va2"], data["vphi"], t), grid, t
    return pair, grid, t


def write_csv(path, header, rows) -> Path:
    """CSV with fixed float formatting so that reruns are byte-identical."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([FLOAT_FMT.format(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def export_plot_csv(path, pair: GaugePair, grid: TorusGrid) -> Path:
    """Rows ``(x, y, |phi|, iF12)`` on the sample grid (``iF12 = -b``)."""
    b = magnetic_field(pair.a1, pair.a2, pair.degree, grid)
    X, Y = np.meshgrid(grid.x, grid.y, indexing="ij")
    rows = zip(X.ravel().tolist(), Y.ravel().tolist(), np.abs(pair.phi).ravel().tolist(), (-b).ravel().tolist())
    return write_csv(path, ["x", "y", "abs_phi", "iF12"], rows)


def read_zeros(path) -> list[complex]:
    """Zeros as one complex number per line (``x+iy``, ``x+yj``, or ``x y``); ``#`` starts a comment."""
    out = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            out.append(parse_complex(line))
    return out


_NUM = r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_PREFIX_I = re.compile(rf"([+-]?{_NUM})?\s*([+-]?)\s*[ij]\s*({_NUM})?")


def parse_complex(text: str) -> complex:
    """Parse ``x+iy``, ``x+yj``, ``x+yi`` or ``x y``."""
    s = text.strip()
    parts = s.split()
    if len(parts) == 2 and not any(c in s for c in "ij"):
        return complex(float(parts[0]), float(parts[1]))
    m = _PREFIX_I.fullmatch(s)
    if m and (m.group(2) or not m.group(1)):
        x = float(m.group(1)) if m.group(1) else 0.0
        y = float(m.group(3)) if m.group(3) else 1.0
        return complex(x, -y if m.group(2) == "-" else y)
    try:
        return complex(s.replace(" ", "").replace("i", "j"))
    except ValueError:
        raise ValueError(f"cannot parse {text!r} as a complex number") from None
