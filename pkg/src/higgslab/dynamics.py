"""Second-order Ginzburg-Landau flow in temporal gauge.

Velocities are stored like the connection: ``dA_j/dt = 1j * va_j`` with real
``va_j``. The equations of motion are ``q'' = -grad U`` for ``q = (a1, a2, phi)``
under the same pairing that defines :func:`fields.gradient`, i.e.

    va1' = -(d2 b + Im(conj(phi) D1 phi))
    va2' = +(d1 b - Im(conj(phi) D2 phi))
    phi'' = (D1 D1 + D2 D2) phi + phi * (1 - |phi|**2) / 2

and the Gauss law is ``d1 va1 + d2 va2 + Im(conj(phi) phi') = 0``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .errors import DivergenceError, DomainError, ShapeError
from .fields import GaugePair, gradient, potential_energy
from .grid import TorusGrid, dperiodic, helmholtz_solve, laplacian
from .linalg import pcg

GAUSS_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class DynState:
    """Fields, velocities and time. ``va1``, ``va2`` are real (``dA/dt = 1j*va``)."""

    pair: GaugePair
    va1: np.ndarray
    va2: np.ndarray
    vphi: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        for name in ("va1", "va2"):
            arr = np.asarray(getattr(self, name))
            if np.iscomplexobj(arr):
                raise DomainError(f"{name} must be real (connection velocity is 1j*{name})")
            object.__setattr__(self, name, arr.astype(float, copy=False))
        object.__setattr__(self, "vphi", np.asarray(self.vphi, dtype=complex))
        if not (self.va1.shape == self.va2.shape == self.vphi.shape == self.pair.shape):
            raise ShapeError("velocity shapes do not match the fields")
        object.__setattr__(self, "t", float(self.t))

    @classmethod
    def at_rest(cls, pair: GaugePair, t: float = 0.0) -> "DynState":
        z = np.zeros(pair.shape)
        return cls(pair, z, z.copy(), np.zeros(pair.shape, complex), t)

    @property
    def vel(self):
        """``(dA1/dt, dA2/dt, dphi/dt)`` with imaginary connection parts."""
        return 1j * self.va1, 1j * self.va2, self.vphi

    @property
    def degree(self) -> int:
        return self.pair.degree

    def replace(self, **kw) -> "DynState":
        vals = dict(pair=self.pair, va1=self.va1, va2=self.va2, vphi=self.vphi, t=self.t)
        vals.update(kw)
        return DynState(**vals)


@dataclass(frozen=True)
class EnergyReport:
    T: float
    U: float
    total: float
    gauss_residual: float
    t: float


def kinetic_energy(state: DynState, grid: TorusGrid) -> float:
    dens = state.va1**2 + state.va2**2 + np.abs(state.vphi) ** 2
    return float(0.5 * grid.integrate(dens))


def gauss_field(state: DynState, grid: TorusGrid) -> np.ndarray:
    """Real Gauss-law density; the imaginary residual of the constraint is 1j times this."""
    div = dperiodic(state.va1, grid, -2) + dperiodic(state.va2, grid, -1)
    return div + np.imag(state.pair.phi.conj() * state.vphi)


def gauss_residual(state: DynState, grid: TorusGrid) -> float:
    return float(np.abs(gauss_field(state, grid)).max())


def solve_gauge_component(rho: np.ndarray, rhs: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Solve ``(-lap + rho) chi = rhs`` for real ``chi`` (``rho = |phi|**2 >= 0``)."""
    mean_rho = float(np.mean(rho))
    if mean_rho < 1e-14:
        return helmholtz_solve(rhs, grid, 0.0)
    scale = max(float(np.abs(rhs).max()), 1e-300)
    return pcg(lambda x: helmholtz_apply(x, rho, grid), rhs, lambda r: helmholtz_solve(r, grid, mean_rho),
               rtol=1e-14, atol=1e-15 * scale, maxiter=800)


def helmholtz_apply(x, rho, grid):
    return -laplacian(x, grid) + rho * x


def remove_gauge_part(a1, a2, phi_dot, phi, grid: TorusGrid):
    """L2-orthogonal projection of a velocity ``(1j*a1, 1j*a2, phi_dot)`` off the gauge orbit."""
    rhs = dperiodic(a1, grid, -2) + dperiodic(a2, grid, -1) + np.imag(phi.conj() * phi_dot)
    chi = solve_gauge_component(np.abs(phi) ** 2, rhs, grid)
    return (a1 + dperiodic(chi, grid, -2), a2 + dperiodic(chi, grid, -1), phi_dot - 1j * chi * phi)


def project_constraint(state: DynState, grid: TorusGrid) -> DynState:
    """Nearest state (L2 on velocities) satisfying the Gauss law; fields unchanged."""
    grid.check(state.vphi, "velocity")
    va1, va2, vphi = remove_gauge_part(state.va1, state.va2, state.vphi, state.pair.phi, grid)
    return state.replace(va1=va1, va2=va2, vphi=vphi)


def max_stable_dt(grid: TorusGrid, pair: GaugePair | None = None) -> float:
    """Verlet stability limit ``2/omega_max`` for the spectral operator.

    ``omega_max**2`` is the largest Laplacian symbol plus the largest mass
    term; the tighter ``h/sqrt(2)``-type bound of second-order differences
    does not apply to spectral derivatives.
    """
    mass = 1.0
    if pair is not None:
        mass = max(mass, 1.5 * float(np.abs(pair.phi).max()) ** 2)
    wmax2 = float(grid.neg_laplacian_symbol.max()) + mass
    return 2.0 / np.sqrt(wmax2)


def _accel(a1, a2, phi, degree, grid):
    g_a1, g_a2, g_phi = gradient(a1, a2, phi, degree, grid)
    return -g_a1, -g_a2, -g_phi


def evolve(state: DynState, dt: float, steps: int, grid: TorusGrid, *,
           gauss_tol: float = GAUSS_TOL, callback: Callable[[int, DynState], None] | None = None) -> DynState:
    """Velocity-Verlet integration for ``steps`` steps of size ``dt``.

    Refuses unstable ``dt`` and states violating the Gauss law at entry.
    ``callback(k, state)`` is invoked after every step (for snapshots).
    """
    grid.check(state.pair.phi, "state")
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    limit = max_stable_dt(grid, state.pair)
    if not (0 < dt < limit):
        raise DomainError(f"dt={dt:.4g} outside the stable range (0, {limit:.4g}) for this grid")
    g0 = gauss_residual(state, grid)
    if g0 > gauss_tol:
        raise DomainError(f"Gauss constraint violated at entry ({g0:.3e} > {gauss_tol:.1e}); "
                          "apply project_constraint first")
    d = state.degree
    a1, a2, phi = state.pair.a1.copy(), state.pair.a2.copy(), state.pair.phi.copy()
    v1, v2, vp = state.va1.copy(), state.va2.copy(), state.vphi.copy()
    f1, f2, fp = _accel(a1, a2, phi, d, grid)
    t0 = state.t
    last = state
    half = 0.5 * dt
    for k in range(1, steps + 1):
        v1 += half * f1
        v2 += half * f2
        vp += half * fp
        a1 += dt * v1
        a2 += dt * v2
        phi += dt * vp
        f1, f2, fp = _accel(a1, a2, phi, d, grid)
        v1 += half * f1
        v2 += half * f2
        vp += half * fp
        if not (np.isfinite(phi).all() and np.isfinite(a1).all() and np.isfinite(a2).all()):
            raise DivergenceError(f"non-finite fields at step {k} (t={t0 + k * dt:.6g})", last)
        if callback is not None or k == steps:
            last = DynState(GaugePair(a1.copy(), a2.copy(), phi.copy(), d), v1.copy(), v2.copy(), vp.copy(),
                            t0 + k * dt)
            if callback is not None:
                callback(k, last)
    return last


def energy_report(state: DynState, grid: TorusGrid) -> EnergyReport:
    T = kinetic_energy(state, grid)
    U = potential_energy(state.pair, grid)
    return EnergyReport(T, U, T + U, gauss_residual(state, grid), state.t)


def run(state: DynState, dt: float, t_end: float, grid: TorusGrid, *, every: int = 1, **kw) -> list[DynState]:
    """Evolve to ``t_end`` (rounded to whole steps), keeping every ``every``-th state."""
    steps = int(round((t_end - state.t) / dt))
    out = [state]

    def keep(k, s):
        if k % every == 0 or k == steps:
            out.append(s)

    evolve(state, dt, steps, grid, callback=keep, **kw)
    return out


@dataclass
class TrajectoryLog:
    """Rows of ``(t, T, U, total, gauss_residual, zeros...)`` for CSV export."""

    rows: list = field(default_factory=list)

    def record(self, report: EnergyReport, zeros: Iterable[complex] = ()):
        row = [report.t, report.T, report.U, report.total, report.gauss_residual]
        for z in zeros:
            row.extend([z.real, z.imag])
        self.rows.append(row)

    def write_csv(self, path, d: int):
        header = ["t", "T", "U", "total", "gauss_residual"]
        for k in range(d):
            header += [f"x{k + 1}", f"y{k + 1}"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in self.rows:
                w.writerow([f"{v:.12e}" for v in row])
