"""Static vortices: Bogomolny solutions with prescribed zeros, and zero finding.

A vortex with zeros ``z_1..z_d`` is written ``phi = exp(v/2) * phi0`` where
``phi0`` is the holomorphic section of the uniform-flux connection that
vanishes exactly at the zeros (a product of Jacobi theta functions) and
``v`` is a smooth periodic function solving

    lap(v) = |phi0|**2 * exp(v) - 1 + 4*pi*d/area.

With ``u = log|phi|**2 = log|phi0|**2 + v`` this is the Taubes equation
``lap(u) = exp(u) - 1 + 4*pi*sum(delta_k)``; the singular part is carried
analytically by ``phi0`` so no source is ever smeared onto the grid.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, InfeasibleError
from .fields import GaugePair, cov_derivs, magnetic_field, potential_energy
from .grid import TorusGrid, dperiodic, helmholtz_solve, laplacian
from .linalg import pcg


@dataclass(frozen=True)
class ModuliPoint:
    """Unordered collection of zero positions (complex numbers, length units).

    Zeros are kept as given so that nearby moduli stay in one smooth gauge;
    use :meth:`reduced` for representatives in the fundamental domain.
    """

    zeros: tuple = ()
    flags: tuple = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "zeros", tuple(complex(z) for z in self.zeros))

    @property
    def d(self) -> int:
        return len(self.zeros)

    def reduced(self, grid: TorusGrid) -> "ModuliPoint":
        return ModuliPoint(tuple(grid.reduce(z) for z in self.zeros), self.flags)

    def to_real(self) -> np.ndarray:
        return np.array([c for z in self.zeros for c in (z.real, z.imag)])

    @classmethod
    def from_real(cls, vec) -> "ModuliPoint":
        vec = np.asarray(vec, float)
        return cls(tuple(complex(vec[2 * k], vec[2 * k + 1]) for k in range(vec.size // 2)))

    def shifted(self, delta: complex) -> "ModuliPoint":
        return ModuliPoint(tuple(z + delta for z in self.zeros))


@dataclass(frozen=True, eq=False)
class VortexSolution:
    pair: GaugePair
    moduli: ModuliPoint
    bogomolny_residual: float
    energy: float
    v: np.ndarray = field(repr=False, default=None)
    iterations: int = 0
    grid: TorusGrid | None = field(repr=False, default=None)


def moduli_to_polynomial(moduli: ModuliPoint) -> list[complex]:
    """Coefficients of ``prod(z - z_k)`` in descending powers, leading 1 omitted."""
    if moduli.d == 0:
        return []
    return [complex(c) for c in np.poly(np.array(moduli.zeros, complex))[1:]]


def polynomial_to_moduli(coeffs) -> ModuliPoint:
    coeffs = list(coeffs)
    if not coeffs:
        return ModuliPoint(())
    roots = np.roots(np.concatenate([[1.0], np.asarray(coeffs, complex)]))
    return ModuliPoint(tuple(sorted(roots, key=lambda z: (z.real, z.imag))))


# -- theta functions --------------------------------------------------------

def _log_theta1(w: np.ndarray, tau_im: float, nterms: int | None = None) -> np.ndarray:
    """``log(theta1(w | i*tau_im))`` with the quasi-periods used to keep ``|Im w|`` small."""
    q = np.exp(-np.pi * tau_im)
    n = np.round(w.imag / (np.pi * tau_im))
    w0 = w - n * np.pi * 1j * tau_im
    m = np.round(w0.real / np.pi)
    w0 = w0 - m * np.pi
    if nterms is None:
        # with |Im w0| <= pi*tau/2 term k is bounded by exp(-pi*tau*(k*k - 1/4))
        nterms = int(np.ceil(np.sqrt(40.0 / (np.pi * tau_im)))) + 1
    e1 = np.exp(1j * w0)
    e2 = e1 * e1
    ep, em = e1, 1.0 / e1
    em2 = 1.0 / e2
    series = np.zeros_like(w0)
    for k in range(nterms):
        coef = (-1) ** k * q ** ((k + 0.5) ** 2)
        series += coef * (ep - em)
        ep = ep * e2
        em = em * em2
    with np.errstate(divide="ignore"):
        base = np.log(-1j * series)
    # theta1(w0 + m*pi + n*pi*tau) = (-1)**(m+n) * q**(-n**2) * exp(-2j*n*w0) * theta1(w0)
    return base + 1j * np.pi * (m + n) + np.pi * tau_im * n**2 - 2j * n * w0


def holomorphic_reference(moduli: ModuliPoint, grid: TorusGrid):
    """Uniform-flux pair ``(a1, a2, phi0)`` with ``dbar_A phi0 = 0`` and zeros at ``moduli``.

    Returns ``(a1, a2, log_phi0)``; ``log_phi0`` may be ``-inf`` at grid points
    that coincide with a zero.
    """
    d = moduli.d
    lx, ly, area = grid.lx, grid.ly, grid.area
    z = grid.Z
    # canonical order: relabelled moduli give bitwise identical fields
    zeros = sorted(moduli.zeros, key=lambda w: (w.real, w.imag))
    s = complex(sum(zeros)) if d else 0j
    kappa = -2.0 * np.pi * s.imag / area
    p = np.pi * d / lx + 2.0 * np.pi * s.imag / area
    q = np.pi * d / ly - 2.0 * np.pi * s.real / area
    log_phi = -np.pi * d * grid.Y**2 / area + 1j * (p * grid.X + q * grid.Y) + 1j * kappa * z
    for zk in zeros:
        log_phi = log_phi + _log_theta1(np.pi * (z - zk) / lx, ly / lx)
    a1 = 2.0 * np.pi * d * grid.Y / area - p
    a2 = np.full(grid.shape, -q)
    return a1, a2, log_phi


# -- Newton solve for the smooth part ---------------------------------------

def _taubes_residual(v, weight, c0, grid):
    return laplacian(v, grid) - weight * np.exp(v) + c0


def solve_vortex(moduli: ModuliPoint, grid: TorusGrid, tol: float = 1e-10, *,
                 max_iter: int = 50, v0: np.ndarray | None = None) -> VortexSolution:
    """Bogomolny d-vortex on the torus with zeros at ``moduli`` (with multiplicity).

    ``tol`` bounds the sup-norm of the Taubes-equation residual; ``v0`` warm
    starts the Newton iteration (e.g. from a nearby solution).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    d = moduli.d
    if grid.area <= 4.0 * np.pi * d:
        raise InfeasibleError(
            f"no {d}-vortex on a torus of area {grid.area:.6g}: need area > 4*pi*d = {4 * np.pi * d:.6g}")
    a1_0, a2_0, log_phi0 = holomorphic_reference(moduli, grid)
    shift = float(np.max(log_phi0.real))
    log_phi0 = log_phi0 - shift
    weight = np.exp(2.0 * log_phi0.real)
    c0 = 1.0 - 4.0 * np.pi * d / grid.area

    if v0 is None:
        # |phi|^2 ~ W/(W + rho) is vortex-like; scale to the Bradlow mean
        rho = float(np.mean(weight))
        v = -np.log(weight + rho) + np.log(c0 * rho + 1e-300) if d else np.zeros(grid.shape)
        v = v + np.log(c0 / max(np.mean(weight * np.exp(v)), 1e-300))
    else:
        v = np.array(v0, float)

    history = []
    res = _taubes_residual(v, weight, c0, grid)
    rnorm = float(np.abs(res).max())
    history.append(rnorm)
    it = 0
    while rnorm >= tol:
        if it >= max_iter:
            raise ConvergenceError(
                f"vortex Newton iteration did not converge in {max_iter} steps (residual {rnorm:.3e})", history)
        it += 1
        we = weight * np.exp(v)
        cshift = float(np.mean(we))
        delta = pcg(lambda x: helmholtz_apply(x, we, grid), res,
                    lambda r: helmholtz_solve(r, grid, cshift), rtol=1e-3 * min(1.0, rnorm), maxiter=400)
        step = 1.0
        while True:
            trial = v + step * delta
            tres = _taubes_residual(trial, weight, c0, grid)
            tnorm = float(np.abs(tres).max())
            if tnorm < rnorm or step < 1e-4:
                break
            step *= 0.5
        if tnorm >= rnorm:
            # no descent: accept only if the residual sits at the rounding level of the Laplacian
            if rnorm <= roundoff_floor(v, grid):
                break
            raise ConvergenceError(f"vortex Newton iteration stalled at residual {rnorm:.3e}", history)
        v, res, rnorm = trial, tres, tnorm
        history.append(rnorm)

    pair = assemble_pair(a1_0, a2_0, log_phi0, v, d, grid)
    return VortexSolution(pair, moduli, bogomolny_residual(pair, grid), potential_energy(pair, grid), v, it, grid)


def roundoff_floor(v, grid: TorusGrid) -> float:
    """Attainable sup-norm of the Taubes residual in double precision."""
    return 64.0 * np.finfo(float).eps * float(grid.neg_laplacian_symbol.max()) * max(1.0, float(np.abs(v).max()))


def helmholtz_apply(x, weight, grid):
    return -laplacian(x, grid) + weight * x


def assemble_pair(a1_0, a2_0, log_phi0, v, degree, grid) -> GaugePair:
    phi = np.exp(log_phi0 + 0.5 * v)
    a1 = a1_0 - 0.5 * dperiodic(v, grid, -1)
    a2 = a2_0 + 0.5 * dperiodic(v, grid, -2)
    return GaugePair(a1, a2, phi, degree)


def bogomolny_residuals(pair: GaugePair, grid: TorusGrid):
    """Pointwise ``(|dbar_A phi|, |iF12 - (1 - |phi|^2)/2|)``."""
    d1, d2 = cov_derivs(pair.a1, pair.a2, pair.phi, pair.degree, grid)
    b = magnetic_field(pair.a1, pair.a2, pair.degree, grid)
    return 0.5 * np.abs(d1 + 1j * d2), np.abs(b + 0.5 * (1.0 - np.abs(pair.phi) ** 2))


def bogomolny_residual(pair: GaugePair, grid: TorusGrid) -> float:
    r1, r2 = bogomolny_residuals(pair, grid)
    return float(max(r1.max(), r2.max()))


# -- zero location ----------------------------------------------------------

def section_values(phi: np.ndarray, grid: TorusGrid, degree: int, I, J) -> np.ndarray:
    """Values of the section lifted to the covering plane at integer grid indices."""
    I = np.asarray(I)
    J = np.asarray(J)
    my = np.floor_divide(J, grid.ny)
    vals = phi[np.mod(I, grid.nx), np.mod(J, grid.ny)]
    if degree:
        vals = vals * np.exp(-2j * np.pi * degree * my * (I * grid.hx) / grid.lx)
    return vals


def lifted_connection(pair: GaugePair, grid: TorusGrid, I, J):
    """``(a1, a2)`` lifted to the covering plane at integer grid indices."""
    I = np.asarray(I)
    J = np.asarray(J)
    my = np.floor_divide(J, grid.ny)
    ii, jj = np.mod(I, grid.nx), np.mod(J, grid.ny)
    a1 = pair.a1[ii, jj] + (2.0 * np.pi * pair.degree / grid.lx) * my
    return a1, pair.a2[ii, jj]


def plaquette_winding(pair: GaugePair, grid: TorusGrid) -> np.ndarray:
    """Integer winding of ``arg(phi)`` around each grid cell (lower-left index).

    Edge phase increments are unwrapped relative to the parallel transport
    ``-a.dl`` rather than to zero, so shared edges agree exactly on both sides
    of the seams and the windings always sum to the degree.
    """
    I, J = np.meshgrid(np.arange(grid.nx + 1), np.arange(grid.ny + 1), indexing="ij")
    ext = section_values(pair.phi, grid, pair.degree, I, J)
    a1, a2 = lifted_connection(pair, grid, I, J)
    ang = np.angle(ext)

    def wrap(t):
        return (t + np.pi) % (2.0 * np.pi) - np.pi

    tx = 0.5 * grid.hx * (a1[1:, :] + a1[:-1, :])
    ty = 0.5 * grid.hy * (a2[:, 1:] + a2[:, :-1])
    ex = wrap(ang[1:, :] - ang[:-1, :] + tx) - tx
    ey = wrap(ang[:, 1:] - ang[:, :-1] + ty) - ty
    circ = ex[:, :-1] + ey[1:, :] - ex[:, 1:] - ey[:-1, :]
    return np.rint(circ / (2.0 * np.pi)).astype(int)


_PATCH = 6


def _lagrange_1d(t, nodes):
    """Values and first derivatives of the Lagrange basis at ``t``."""
    n = len(nodes)
    vals = np.ones(n)
    ders = np.zeros(n)
    for k in range(n):
        others = [nodes[m] for m in range(n) if m != k]
        denom = np.prod([nodes[k] - o for o in others])
        vals[k] = np.prod([t - o for o in others]) / denom
        s = 0.0
        for i in range(len(others)):
            s += np.prod([t - o for j, o in enumerate(others) if j != i])
        ders[k] = s / denom
    return vals, ders


class _LocalModel:
    """Tensor-product polynomial interpolant of the lifted section near a cell."""

    def __init__(self, phi, grid, degree, i, j):
        off = _PATCH // 2 - 1
        self.i0, self.j0 = i - off, j - off
        I, J = np.meshgrid(np.arange(self.i0, self.i0 + _PATCH), np.arange(self.j0, self.j0 + _PATCH), indexing="ij")
        self.vals = section_values(phi, grid, degree, I, J)
        self.nodes = np.arange(_PATCH, dtype=float)
        self.grid = grid

    def to_local(self, z):
        return (z.real / self.grid.hx - self.i0, z.imag / self.grid.hy - self.j0)

    def to_global(self, s, t):
        return complex((s + self.i0) * self.grid.hx, (t + self.j0) * self.grid.hy)

    def eval(self, s, t):
        ls, dls = _lagrange_1d(s, self.nodes)
        lt, dlt = _lagrange_1d(t, self.nodes)
        f = ls @ self.vals @ lt
        fs = dls @ self.vals @ lt
        ft = ls @ self.vals @ dlt
        return f, fs, ft

    def newton(self, s, t, iters=30):
        for _ in range(iters):
            f, fs, ft = self.eval(s, t)
            jac = np.array([[fs.real, ft.real], [fs.imag, ft.imag]])
            det = np.linalg.det(jac)
            if abs(det) < 1e-14 * (abs(fs) ** 2 + abs(ft) ** 2 + 1e-300):
                return s, t, False
            ds, dt = np.linalg.solve(jac, [-f.real, -f.imag])
            s, t = s + ds, t + dt
            if abs(ds) + abs(dt) < 1e-13:
                return s, t, True
            if not (-1.0 < s < _PATCH and -1.0 < t < _PATCH):
                return s, t, False
        f, _, _ = self.eval(s, t)
        return s, t, abs(f) < 1e-10

    def gradient_norm(self, s, t):
        _, fs, ft = self.eval(s, t)
        return np.hypot(abs(fs) / self.grid.hx, abs(ft) / self.grid.hy)


def locate_zeros(pair: GaugePair, grid: TorusGrid, *, grad_floor: float = 1e-8,
                 merge: float = 0.1) -> ModuliPoint:
    """Zeros of ``phi`` with multiplicity, from plaquette windings plus local refinement.

    Positions are returned in the fundamental domain. Each cell with nonzero
    winding is refined with a degree-5 local interpolant; cells whose
    refinement is ill-conditioned fall back to the cell centre and are
    listed in ``flags``. Zeros closer than ``merge * h`` are reported as one
    location with multiplicity (a higher-order zero straddling cells splits
    into nearby simple ones at round-off level).
    """
    d = pair.degree
    wind = plaquette_winding(pair, grid)
    cells = [(int(i), int(j), int(wind[i, j])) for i, j in zip(*np.nonzero(wind))]
    cells = _cancel_pairs(cells, grid)
    zeros: list[complex] = []
    flags: list[str] = []
    for i, j, n in cells:
        model = _LocalModel(pair.phi, grid, d, i, j)
        centre = complex((i + 0.5) * grid.hx, (j + 0.5) * grid.hy)
        cs, ct = model.to_local(centre)
        if n == 1:
            s, t, ok = model.newton(cs, ct)
            if ok and abs(s - cs) < 1.5 and abs(t - ct) < 1.5 and model.gradient_norm(s, t) > grad_floor:
                zeros.append(grid.reduce(model.to_global(s, t)))
            else:
                zeros.append(grid.reduce(centre))
                flags.append(f"cell-centre fallback at {grid.reduce(centre):.6g}")
            continue
        roots = []
        for ds, dt in itertools.product(np.linspace(-0.4, 0.4, 5), repeat=2):
            s, t, ok = model.newton(cs + ds, ct + dt)
            if ok and abs(s - cs) < 1.0 and abs(t - ct) < 1.0:
                z = model.to_global(s, t)
                if all(abs(z - r) > 1e-6 * grid.h for r in roots):
                    roots.append(z)
        if len(roots) == n:
            zeros.extend(grid.reduce(r) for r in roots)
        else:
            z = _minimise_modulus(model, cs, ct)
            zeros.extend([grid.reduce(z)] * n)
            flags.append(f"multiplicity {n} at {grid.reduce(z):.6g}")
    if merge > 0 and len(zeros) > 1:
        zeros, more = _merge_close(zeros, grid, merge * grid.h)
        flags.extend(more)
    return ModuliPoint(tuple(zeros), tuple(flags))


def _merge_close(zeros, grid: TorusGrid, tol: float):
    """Replace clusters of zeros within ``tol`` of each other by their mean, repeated."""
    groups: list[list[complex]] = []
    for z in zeros:
        for grp in groups:
            if any(grid.distance(z, w) < tol for w in grp):
                grp.append(grp[0] + grid.torus_delta(z, grp[0]))
                break
        else:
            groups.append([z])
    out, flags = [], []
    for grp in groups:
        if len(grp) == 1:
            out.append(grp[0])
            continue
        c = grid.reduce(complex(np.mean(grp)))
        out.extend([c] * len(grp))
        flags.append(f"multiplicity {len(grp)} at {c:.6g}")
    return out, flags


def _minimise_modulus(model, cs, ct):
    from scipy.optimize import minimize

    def obj(p):
        f, fs, ft = model.eval(p[0], p[1])
        val = abs(f) ** 2
        g = np.array([2 * (f.conjugate() * fs).real, 2 * (f.conjugate() * ft).real])
        return val, g

    res = minimize(obj, [cs, ct], jac=True, method="BFGS", options={"gtol": 1e-16, "maxiter": 200})
    s, t = res.x
    if not (abs(s - cs) < 1.5 and abs(t - ct) < 1.5):
        s, t = cs, ct
    return model.to_global(s, t)


def _cancel_pairs(cells, grid):
    """Drop +/- winding pairs produced by phase noise, nearest first."""
    pos = [c for c in cells if c[2] > 0]
    neg = [c for c in cells if c[2] < 0]
    if not neg:
        return pos
    pos = [list(c) for c in pos]
    for i, j, n in neg:
        need = -n
        while need and pos:
            zc = complex(i * grid.hx, j * grid.hy)
            k = min(range(len(pos)), key=lambda m: grid.distance(complex(pos[m][0] * grid.hx, pos[m][1] * grid.hy), zc))
            take = min(need, pos[k][2])
            pos[k][2] -= take
            need -= take
            if pos[k][2] == 0:
                pos.pop(k)
    return [tuple(c) for c in pos]
