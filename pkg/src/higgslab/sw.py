"""Dirac operators and SW_lambda residuals on a flat product torus ``T^2 x T^2``.

Coordinates are ``z = x1 + 1j*x2`` on factor 1 and ``w = x3 + 1j*x4`` on
factor 2; fields are 4D arrays indexed ``[i1, i2, i3, i4]``. Any array may
have length 1 along an axis, meaning "constant along that axis" (the
derivative there is exactly zero), so pulled-back data never needs a full
4D allocation.

The line bundle ``E`` has degree ``d`` on factor 2 and is trivial along
factor 1; the twist convention of :mod:`grid` applies to the last two axes.
The connection is ``B = 1j * sum(b_j dx_j)`` and ``D_j = d_j + 1j*b_j``.

Spinors are lists of four components in the order ``(0, {1}, {2}, {1,2})``
of the canonical spin representation, i.e. ``(alpha, gamma_1, gamma_2, beta)``
with ``W+ = (alpha, beta)``; ``None`` stands for an identically zero component.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft
from scipy.interpolate import RectBivariateSpline
from scipy.optimize import brentq

from .clifford import SpinRep, build_spin_rep
from .errors import DomainError, ResolutionError, ShapeError
from .fields import magnetic_field, reference_a1
from .grid import TorusGrid, dperiodic, dsection, twist_phase
from .vortex import ModuliPoint, VortexSolution, holomorphic_reference, locate_zeros, solve_vortex

VACUUM_ALPHA = 2.0 * np.sqrt(np.pi)


@dataclass(frozen=True)
class KahlerTorusGrid:
    f1: TorusGrid
    f2: TorusGrid

    @classmethod
    def square(cls, n1: int, side1: float, n2: int, side2: float) -> "KahlerTorusGrid":
        return cls(TorusGrid(n1, n1, side1, side1), TorusGrid(n2, n2, side2, side2))

    @property
    def shape(self) -> tuple:
        return self.f1.shape + self.f2.shape

    @property
    def cell(self) -> float:
        return self.f1.cell * self.f2.cell

    @property
    def spacings(self) -> tuple:
        return (self.f1.hx, self.f1.hy, self.f2.hx, self.f2.hy)

    @property
    def volume(self) -> float:
        return self.f1.area * self.f2.area

    def integrate(self, f):
        f = np.asarray(f)
        # a length-1 axis stands for a constant along that axis
        tot = np.sum(f) * (self.cell * np.prod(self.shape) / f.size)
        return complex(tot) if np.iscomplexobj(tot) else float(tot)

    def coords(self):
        """Broadcastable coordinate arrays ``(x1, x2, x3, x4)``."""
        return (self.f1.x[:, None, None, None], self.f1.y[None, :, None, None],
                self.f2.x[None, None, :, None], self.f2.y[None, None, None, :])

    def check(self, arr, name="field"):
        arr = np.asarray(arr)
        if arr.ndim != 4 or any(s not in (1, n) for s, n in zip(arr.shape, self.shape)):
            raise ShapeError(f"{name} of shape {arr.shape} does not broadcast to {self.shape}")


@dataclass(frozen=True, eq=False)
class SWFields:
    """``alpha``, ``beta`` sections of ``E`` and ``Lambda^{0,2} x E``; ``b`` = four real connection arrays."""

    alpha: np.ndarray
    beta: np.ndarray
    b: tuple
    degree: int
    lam: float

    def __post_init__(self):
        if not self.lam > 0:
            raise DomainError("lambda must be positive")
        if len(self.b) != 4:
            raise ShapeError("connection needs four components")
        for bj in self.b:
            if np.iscomplexobj(bj):
                raise DomainError("connection components must be real (B = 1j*b)")
        object.__setattr__(self, "b", tuple(np.asarray(bj, float) for bj in self.b))
        object.__setattr__(self, "alpha", np.asarray(self.alpha, complex))
        object.__setattr__(self, "beta", np.asarray(self.beta, complex))
        object.__setattr__(self, "degree", int(self.degree))


@dataclass(frozen=True)
class SWResidual:
    r1: float
    r2: float
    r3: float


# -- calculus ---------------------------------------------------------------

def _dfactor1(f, grid: KahlerTorusGrid, axis: int):
    """Spectral derivative along axis 0 (x1) or 1 (x2), periodic on factor 1."""
    if f.shape[axis] == 1:
        return np.zeros_like(f, dtype=complex if np.iscomplexobj(f) else float)
    k = grid.f1.kx if axis == 0 else grid.f1.ky
    shape = [1] * f.ndim
    shape[axis] = k.size
    fh = sfft.fft(f, axis=axis)
    fh *= 1j * k.reshape(shape)
    out = sfft.ifft(fh, axis=axis)
    return out if np.iscomplexobj(f) else out.real


def _dfactor2(f, grid: KahlerTorusGrid, axis: int, degree: int):
    """Derivative along x3 (axis 2) or x4 (axis 3) of a degree-``degree`` section (or periodic array)."""
    if f.shape[axis] == 1:
        return np.zeros_like(f)
    ax = axis - 4
    if degree:
        return dsection(f, grid.f2, degree, ax)
    return dperiodic(f, grid.f2, ax)


def partial(s, j: int, grid: KahlerTorusGrid, degree: int):
    """``d_j s`` for ``j`` in 1..4 (spectral)."""
    if j <= 2:
        return _dfactor1(s, grid, j - 1)
    return _dfactor2(s, grid, j - 1, degree)


def cov(s, j: int, b, grid: KahlerTorusGrid, degree: int):
    return partial(s, j, grid, degree) + 1j * b[j - 1] * s


def _central(s, j, grid: KahlerTorusGrid, degree: int):
    """Second-order central difference ``d_j s`` honouring the twist on x4."""
    axis = j - 1
    if s.shape[axis] == 1:
        return np.zeros_like(s)
    h = grid.spacings[axis]
    if j == 4 and degree:
        ph = twist_phase(grid.f2, degree)
        psi = s * ph
        dpsi = (np.roll(psi, -1, axis) - np.roll(psi, 1, axis)) / (2 * h)
        theta = 2.0 * np.pi * degree * grid.f2.x / grid.f2.lx
        return dpsi * ph.conj() - 1j * (theta / grid.f2.ly)[:, None] * s
    return (np.roll(s, -1, axis) - np.roll(s, 1, axis)) / (2 * h)


def dbar(alpha, b, grid: KahlerTorusGrid, degree: int):
    """``dbar_B`` on sections: ``((D1 + iD2) alpha, (D3 + iD4) alpha)`` in unit (0,1)-frame components."""
    return (cov(alpha, 1, b, grid, degree) + 1j * cov(alpha, 2, b, grid, degree),
            cov(alpha, 3, b, grid, degree) + 1j * cov(alpha, 4, b, grid, degree))


def dbar_adjoint_01(gamma, b, grid: KahlerTorusGrid, degree: int):
    """Formal adjoint of :func:`dbar`: ``-(D1 - iD2) g1 - (D3 - iD4) g2``."""
    g1, g2 = gamma
    return (-(cov(g1, 1, b, grid, degree) - 1j * cov(g1, 2, b, grid, degree))
            - (cov(g2, 3, b, grid, degree) - 1j * cov(g2, 4, b, grid, degree)))


def dbar_01(gamma, b, grid: KahlerTorusGrid, degree: int):
    """``dbar_B`` on (0,1)-forms: ``(D1 + iD2) g2 - (D3 + iD4) g1``."""
    g1, g2 = gamma
    return ((cov(g2, 1, b, grid, degree) + 1j * cov(g2, 2, b, grid, degree))
            - (cov(g1, 3, b, grid, degree) + 1j * cov(g1, 4, b, grid, degree)))


def dbar_adjoint(beta, b, grid: KahlerTorusGrid, degree: int):
    """Formal adjoint of :func:`dbar_01`: ``((D3 - iD4) beta, -(D1 - iD2) beta)``."""
    return (cov(beta, 3, b, grid, degree) - 1j * cov(beta, 4, b, grid, degree),
            -(cov(beta, 1, b, grid, degree) - 1j * cov(beta, 2, b, grid, degree)))


def _add(*terms):
    terms = [t for t in terms if t is not None]
    if not terms:
        return None
    out = terms[0]
    for t in terms[1:]:
        out = out + t
    return out


def dirac_dbar(section, grid: KahlerTorusGrid, connection=None, degree: int | None = None):
    """``D = dbar_B + dbar_B^*`` on a full spinor, or on ``SWFields`` (then ``W+ -> W-``)."""
    if isinstance(section, SWFields):
        connection, degree = section.b, section.degree
        section = [section.alpha, None, None, section.beta]
    if connection is None or degree is None:
        raise DomainError("connection and degree are required for raw spinor data")
    a, g1, g2, be = section
    out = [None, None, None, None]
    if a is not None:
        c1, c2 = dbar(a, connection, grid, degree)
        out[1], out[2] = c1, c2
    if be is not None:
        c1, c2 = dbar_adjoint(be, connection, grid, degree)
        out[1], out[2] = _add(out[1], c1), _add(out[2], c2)
    if g1 is not None or g2 is not None:
        z = np.zeros((1, 1, 1, 1), complex)
        gam = (z if g1 is None else g1, z if g2 is None else g2)
        out[0] = dbar_adjoint_01(gam, connection, grid, degree)
        out[3] = dbar_01(gam, connection, grid, degree)
    return out


def dirac_clifford(section, rep: SpinRep, connection, grid: KahlerTorusGrid, degree: int,
                   derivative: str = "central"):
    """``sum_j Gamma(e_j) D_j`` with second-order central differences (or ``"spectral"``)."""
    if rep.n != 4:
        raise DomainError("the product torus needs the n = 4 spin representation")
    if len(section) != rep.dim:
        raise ShapeError(f"spinor needs {rep.dim} components")
    deriv = _central if derivative == "central" else (lambda s, j, g, d: partial(s, j, g, d))
    out = [None] * rep.dim
    for j in range(1, 5):
        gam = rep.gamma[j - 1]
        for col, s in enumerate(section):
            if s is None:
                continue
            ds = deriv(s, j, grid, degree) + 1j * connection[j - 1] * s
            for row in np.nonzero(gam[:, col])[0]:
                term = gam[row, col] * ds
                out[row] = term if out[row] is None else out[row] + term
    return out


def spinor_norm(section, grid: KahlerTorusGrid) -> float:
    """L2 norm of a spinor field (``None`` components count as zero)."""
    tot = 0.0
    for s in section:
        if s is not None:
            tot += grid.integrate(np.abs(s) ** 2)
    return float(np.sqrt(tot))


def spinor_sub(a, b):
    return [None if (x is None and y is None) else (x if y is None else (-y if x is None else x - y))
            for x, y in zip(a, b)]


# -- curvature and residuals ------------------------------------------------

def curvature_components(b, grid: KahlerTorusGrid, degree: int) -> dict:
    """Real ``f_jk`` with ``F_jk = 1j * f_jk = 1j * (d_j b_k - d_k b_j)``."""
    def d(f, j):
        if j <= 2:
            return _dfactor1(f, grid, j - 1)
        if f.shape[j - 1] == 1:
            return np.zeros_like(f)
        return dperiodic(f, grid.f2, j - 5)

    out = {
        (1, 2): d(b[1], 1) - d(b[0], 2),
        (1, 3): d(b[2], 1) - d(b[0], 3),
        (1, 4): d(b[3], 1) - d(b[0], 4),
        (2, 3): d(b[2], 2) - d(b[1], 3),
        (2, 4): d(b[3], 2) - d(b[1], 4),
    }
    shp = np.broadcast_shapes(b[2].shape, b[3].shape, (1, 1) + grid.f2.shape)
    out[(3, 4)] = magnetic_field(np.broadcast_to(b[2], shp), np.broadcast_to(b[3], shp), degree, grid.f2)
    return out


def f_omega(b, grid: KahlerTorusGrid, degree: int):
    """``F^omega = <F, omega>/|omega|^2 = (F12 + F34)/2`` (imaginary samples)."""
    f = curvature_components(b, grid, degree)
    return 0.5j * (f[(1, 2)] + f[(3, 4)])


def f_02(b, grid: KahlerTorusGrid, degree: int):
    """Unit-frame ``dz-bar ^ dw-bar`` component of ``F``: ``((F13 - F24) + 1j*(F14 + F23))/2``."""
    f = curvature_components(b, grid, degree)
    F13, F14, F23, F24 = (1j * f[k] for k in ((1, 3), (1, 4), (2, 3), (2, 4)))
    return 0.5 * ((F13 - F24) + 1j * (F14 + F23))


def sw_lambda_residual(fields: SWFields, grid: KahlerTorusGrid) -> SWResidual:
    lam = fields.lam
    a, be = fields.alpha, fields.beta
    for name, arr in (("alpha", a), ("beta", be)):
        grid.check(arr, name)
    for bj in fields.b:
        grid.check(bj, "connection")
    dirac = dirac_dbar(fields, grid)
    r1 = np.sqrt(np.abs(dirac[1]) ** 2 + np.abs(dirac[2]) ** 2)
    e2 = (4j / lam) * f_omega(fields.b, grid, fields.degree) - 4.0 * np.pi - np.abs(be) ** 2 + np.abs(a) ** 2
    e3 = (2.0 / lam) * f_02(fields.b, grid, fields.degree) - a.conj() * be
    return SWResidual(float(r1.max()), float(np.abs(e2).max()), float(np.abs(e3).max()))


def sw_gauge_transform(fields: SWFields, chi, grid: KahlerTorusGrid) -> SWFields:
    """``B -> B + 1j*d(chi)``, sections times ``exp(-1j*chi)`` for a periodic real ``chi``."""
    chi = np.asarray(chi, float)
    grid.check(chi, "chi")
    b = tuple(bj + np.real(partial(chi, j, grid, 0)) for j, bj in enumerate(fields.b, start=1))
    ph = np.exp(-1j * chi)
    return SWFields(ph * fields.alpha, ph * fields.beta, b, fields.degree, fields.lam)


def validate_chern(degE: int, degK: int, omega_class: float) -> bool:
    """``0 <= degE*[omega] <= degK*[omega]``."""
    if int(degE) != degE or int(degK) != degK:
        raise DomainError("degrees must be integers")
    if not omega_class > 0:
        raise DomainError("the Kahler class pairing must be positive")
    return bool(0 <= degE * omega_class <= degK * omega_class)


# -- vortex lifts -------------------------------------------------------------

CORE_RADIUS = 1.0  # vortex core radius in vortex (unit-mass) lengths
OUTSIDE_RADIUS = 8.0  # |alpha| deviation is measured beyond this many vortex lengths


def lift_scale(lam: float, convention: str = "exact") -> float:
    """Length of one vortex unit on factor 2.

    ``"exact"`` (``1/sqrt(4*pi*lam)``) makes the lift solve the printed SW_lambda
    system exactly; ``"area"`` (``1/sqrt(lam)``) is the plain area-lambda rescaling.
    """
    if lam <= 0:
        raise DomainError("lambda must be positive")
    if convention == "exact":
        return 1.0 / np.sqrt(4.0 * np.pi * lam)
    if convention == "area":
        return 1.0 / np.sqrt(lam)
    raise DomainError(f"unknown lift convention {convention!r}")


def lift_grid(grid: KahlerTorusGrid, lam: float, convention: str = "exact") -> TorusGrid:
    """Vortex-unit torus whose samples coincide with those of factor 2."""
    s = lift_scale(lam, convention)
    f2 = grid.f2
    return TorusGrid(f2.nx, f2.ny, f2.lx / s, f2.ly / s)


def solve_lift_vortex(zeros: ModuliPoint, lam: float, grid: KahlerTorusGrid, *, convention: str = "exact",
                      tol: float = 1e-10) -> VortexSolution:
    """Vortex with zeros at factor-2 positions ``zeros``, solved on :func:`lift_grid`."""
    s = lift_scale(lam, convention)
    _check_resolution(lam, grid, convention)
    return solve_vortex(ModuliPoint(tuple(z / s for z in zeros.zeros)), lift_grid(grid, lam, convention), tol)


def _check_resolution(lam, grid, convention):
    s = lift_scale(lam, convention)
    if s * CORE_RADIUS < 4.0 * grid.f2.h:
        raise ResolutionError(f"lambda={lam:g}: core radius {s * CORE_RADIUS:.3g} is below 4h = {4 * grid.f2.h:.3g}")


def vortex_lift(vortex: VortexSolution, lam: float, grid: KahlerTorusGrid, *, convention: str = "exact") -> SWFields:
    """``alpha = 2 sqrt(pi) phi``, ``beta = 0``, ``B`` pulled back from the rescaled vortex connection.

    ``vortex`` must live on the shape of factor 2; its lengths are read as
    vortex units and mapped onto factor 2 with :func:`lift_scale`.
    """
    if lam < 1:
        raise DomainError("vortex lifts need lambda >= 1")
    pair = vortex.pair
    if pair.shape != grid.f2.shape:
        raise ShapeError(f"vortex grid {pair.shape} does not match factor 2 {grid.f2.shape}")
    _check_resolution(lam, grid, convention)
    s = lift_scale(lam, convention)
    vg = getattr(vortex, "grid", None)
    if vg is not None and not (np.isclose(vg.lx * s, grid.f2.lx) and np.isclose(vg.ly * s, grid.f2.ly)):
        raise DomainError("vortex was not solved on the lift grid for this lambda; use solve_lift_vortex")
    alpha = VACUUM_ALPHA * pair.phi[None, None]
    beta = np.zeros((1, 1, 1, 1), complex)
    z = np.zeros((1, 1, 1, 1))
    b = (z, z.copy(), pair.a1[None, None] / s, pair.a2[None, None] / s)
    return SWFields(alpha, beta, b, pair.degree, lam)


# -- localization ---------------------------------------------------------------

def contour_radius(phi2d: np.ndarray, grid2: TorusGrid, center: complex, level: float, *, nrays: int = 32) -> float:
    """Mean radius of the ``|phi| = level`` contour around ``center`` (cubic interpolation along rays)."""
    mod = np.abs(phi2d)
    # periodic extension so that rays may cross the seams
    ext = np.block([[mod, mod], [mod, mod]])
    xs = np.arange(2 * grid2.nx) * grid2.hx
    ys = np.arange(2 * grid2.ny) * grid2.hy
    spl = RectBivariateSpline(xs, ys, ext, kx=3, ky=3)
    c = complex(np.mod(center.real, grid2.lx) + (grid2.lx if center.real < 0.5 * grid2.lx else 0.0),
                np.mod(center.imag, grid2.ly) + (grid2.ly if center.imag < 0.5 * grid2.ly else 0.0))
    rmax = 0.45 * min(grid2.lx, grid2.ly)
    radii = []
    for ang in np.linspace(0, 2 * np.pi, nrays, endpoint=False):
        u = np.exp(1j * ang)

        def f(r):
            p = c + r * u
            return float(spl(p.real, p.imag, grid=False)) - level

        rs = np.linspace(0.0, rmax, 200)
        vals = np.array([f(r) for r in rs])
        idx = np.nonzero((vals[:-1] < 0) & (vals[1:] >= 0))[0]
        if idx.size == 0:
            return float("nan")
        k = idx[0]
        radii.append(brentq(f, rs[k], rs[k + 1], xtol=1e-12))
    return float(np.mean(radii))


@dataclass
class LocalizationEntry:
    lam: float
    residual: SWResidual
    sup_beta: float
    contour_radius: float
    alpha_deviation_outside: float


@dataclass
class LocalizationReport:
    entries: list = field(default_factory=list)
    vacuum_alpha: float = VACUUM_ALPHA
    convention: str = "exact"

    @property
    def lams(self):
        return np.array([e.lam for e in self.entries])

    @property
    def radii(self):
        return np.array([e.contour_radius for e in self.entries])

    @property
    def shrink_ratios(self):
        r = self.radii
        return r[:-1] / r[1:]

    @property
    def lam_r2(self):
        return np.array([e.lam * e.residual.r2 for e in self.entries])

    @property
    def monotone(self) -> bool:
        r = self.radii
        return bool(np.all(np.diff(r) < 0)) if r.size > 1 else True


def localization_scan(vortex, lam_list, grid: KahlerTorusGrid, *, convention: str = "exact",
                      level: float = 0.5) -> LocalizationReport:
    """Lift the vortex for each ``lambda`` and measure residuals and localization.

    ``vortex`` is a :class:`VortexSolution` (its zeros are placed at the same
    fractional positions on factor 2) or a :class:`ModuliPoint` of factor-2
    positions. The contour radius is that of ``|alpha| = level * 2 sqrt(pi)``.
    """
    lam_list = [float(v) for v in lam_list]
    if any(b <= a for a, b in zip(lam_list, lam_list[1:])):
        raise DomainError("lambda list must be increasing")
    for lam in lam_list:
        _check_resolution(lam, grid, convention)
    if isinstance(vortex, VortexSolution):
        vg = getattr(vortex, "grid", None)
        if vg is None:
            raise DomainError("VortexSolution without grid information")
        zeros = ModuliPoint(tuple(complex(z.real / vg.lx * grid.f2.lx, z.imag / vg.ly * grid.f2.ly)
                                  for z in vortex.moduli.zeros))
    else:
        zeros = vortex
    rep = LocalizationReport(convention=convention)
    for lam in lam_list:
        sol = solve_lift_vortex(zeros, lam, grid, convention=convention)
        flds = vortex_lift(sol, lam, grid, convention=convention)
        res = sw_lambda_residual(flds, grid)
        alpha2 = flds.alpha[0, 0]
        s = lift_scale(lam, convention)
        if zeros.d:
            found = locate_zeros(sol.pair, sol.grid)
            centres = [z * s for z in found.zeros]
            radius = float(np.mean([contour_radius(alpha2 / VACUUM_ALPHA, grid.f2, c, level) for c in centres]))
            dist = np.min([grid.f2.distance(grid.f2.Z, c) for c in centres], axis=0)
            outside = dist > OUTSIDE_RADIUS * s
        else:
            radius = 0.0
            outside = np.ones(grid.f2.shape, bool)
        dev = np.abs(np.abs(alpha2) - VACUUM_ALPHA)[outside]
        rep.entries.append(LocalizationEntry(lam, res, float(np.abs(flds.beta).max()), radius,
                                             float(dev.max()) if dev.size else float("nan")))
    return rep


# -- random test data -----------------------------------------------------------

@dataclass(frozen=True)
class FourierData:
    """Fixed trigonometric polynomial on the product torus; sampled on any resolution.

    ``ks`` holds integer wave vectors (rows), ``cs`` their complex weights;
    axes not listed in ``axes`` are constant (length 1 when sampled).
    """

    ks: np.ndarray
    cs: np.ndarray
    axes: tuple = (0, 1, 2, 3)

    def sample(self, grid: KahlerTorusGrid, real: bool = False):
        x = grid.coords()
        L = (grid.f1.lx, grid.f1.ly, grid.f2.lx, grid.f2.ly)
        shape = tuple(n if ax in self.axes else 1 for ax, n in enumerate(grid.shape))
        out = np.zeros(shape, float if real else complex)
        for k, c in zip(self.ks, self.cs):
            term = np.asarray(c, complex)
            for ax in self.axes:
                term = term * np.exp(2j * np.pi * k[ax] * x[ax] / L[ax])
            out += term.real if real else term
        return out


def random_fourier(rng: np.random.Generator, *, modes: int = 2, terms: int = 6, axes=(0, 1, 2, 3)) -> FourierData:
    ks = np.zeros((terms, 4), int)
    for ax in axes:
        ks[:, ax] = rng.integers(-modes, modes + 1, size=terms)
    cs = rng.normal(size=terms) + 1j * rng.normal(size=terms)
    return FourierData(ks, cs, tuple(axes))


def random_smooth(grid: KahlerTorusGrid, rng: np.random.Generator, *, modes: int = 2, terms: int = 6,
                  real: bool = False):
    """Sum of a few random low Fourier modes on the product torus (periodic)."""
    return random_fourier(rng, modes=modes, terms=terms).sample(grid, real)


def base_section(f2: TorusGrid, degree: int) -> np.ndarray:
    """A fixed smooth section of the degree-``degree`` bundle on factor 2 (theta-function based, max 1).

    Any valid section is this one times a periodic function; ``periodic *
    conj(twist_phase)`` is not, since it breaks periodicity in ``x3``.
    """
    if degree == 0:
        return np.ones(f2.shape, complex)
    if degree < 0:
        return base_section(f2, -degree).conj()
    zeros = ModuliPoint(tuple(complex((0.31 + k) / degree * f2.lx, 0.47 * f2.ly) for k in range(degree)))
    log_phi = holomorphic_reference(zeros, f2)[2]
    return np.exp(log_phi - np.max(log_phi.real))


def random_section(grid: KahlerTorusGrid, degree: int, rng, **kw):
    """Smooth random section of the degree-``degree`` bundle on factor 2."""
    return random_smooth(grid, rng, **kw) * base_section(grid.f2, degree)


def random_connection(grid: KahlerTorusGrid, degree: int, rng, *, amplitude: float = 0.3, **kw):
    """Uniform-flux reference on factor 2 plus smooth periodic perturbations."""
    b = [amplitude * random_smooth(grid, rng, real=True, **kw) for _ in range(4)]
    b[2] = b[2] + reference_a1(grid.f2, degree)
    return tuple(b)


# each connection component varies along two axes, which keeps 4D refinement cheap
_CONNECTION_AXES = ((1, 2), (0, 3), (1, 3), (0, 2))


def dirac_refinement(n_list, rng: np.random.Generator, *, side1: float = 2.0, side2: float = 3.0,
                     degree: int = 1, modes: int = 1, terms: int = 6, amplitude: float = 0.3) -> dict:
    """Sup discrepancy between central-difference :func:`dirac_clifford` and spectral :func:`dirac_dbar`.

    One random ``W+`` spinor and connection (fixed trigonometric data) are
    sampled on ``n^4`` grids for each ``n`` in ``n_list``. The adjointness
    defect of ``dbar``/``dbar^*`` is measured on the coarsest grid.
    """
    alpha_d = random_fourier(rng, modes=modes, terms=terms)
    beta_d = random_fourier(rng, modes=modes, terms=terms)
    conn_d = [random_fourier(rng, modes=modes, terms=terms, axes=ax) for ax in _CONNECTION_AXES]
    rep = build_spin_rep(2)
    out = {"n": [], "h": [], "errors": [], "adjointness": []}
    for idx, n in enumerate(n_list):
        grid = KahlerTorusGrid.square(n, side1, n, side2)
        ph = base_section(grid.f2, degree)
        b = [amplitude * d.sample(grid, real=True) for d in conn_d]
        b[2] = b[2] + reference_a1(grid.f2, degree)
        sec = [alpha_d.sample(grid) * ph, None, None, beta_d.sample(grid) * ph]
        exact = dirac_dbar(sec, grid, b, degree)
        approx = dirac_clifford(sec, rep, b, grid, degree)
        scale = max(float(np.abs(c).max()) for c in exact if c is not None)
        err = max(float(np.abs(x - y).max()) for x, y in zip(approx, exact) if x is not None)
        del approx
        if idx == 0:
            out["adjointness"].append(dbar_adjointness(grid, degree, rng, b))
        out["n"].append(n)
        out["h"].append(grid.f2.h)
        out["errors"].append(err / scale)
        del exact, sec, b
    return out


def dbar_adjointness(grid: KahlerTorusGrid, degree: int, rng, b=None) -> float:
    """Relative defect of ``<dbar u, v> = <u, dbar^* v>`` on both form degrees, random smooth data."""
    b = random_connection(grid, degree, rng) if b is None else b

    def ip(u, v):
        return sum(grid.integrate(np.conj(x) * y) for x, y in zip(u, v))

    u = random_section(grid, degree, rng)
    g = (random_section(grid, degree, rng), random_section(grid, degree, rng))
    be = random_section(grid, degree, rng)
    lhs0, rhs0 = ip(dbar(u, b, grid, degree), g), ip([u], [dbar_adjoint_01(g, b, grid, degree)])
    lhs1, rhs1 = ip([dbar_01(g, b, grid, degree)], [be]), ip(g, dbar_adjoint(be, b, grid, degree))
    return float(max(abs(lhs0 - rhs0) / abs(lhs0), abs(lhs1 - rhs1) / abs(lhs1)))


def default_rep() -> SpinRep:
    return build_spin_rep(2)
