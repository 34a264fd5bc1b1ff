"""Gauge pairs on the twisted torus: curvature, covariant derivative, energy.

The connection is stored through its real components, ``A_j = 1j * a_j``.
For degree ``d`` the first component carries the uniform-flux reference
part ``2*pi*d*y/area`` so that ``a1 - 2*pi*d*y/area`` and ``a2`` are periodic.
With these conventions ``F12 = 1j * b`` with ``b = d1 a2 - d2 a1`` and
``(i/2pi) * integral(F12) = -integral(b)/(2pi) = d`` for every stored pair.

The potential energy

    U = 1/2 * integral( b**2 + |D1 phi|**2 + |D2 phi|**2 + (1 - |phi|**2)**2 / 4 )

uses ``D_j = d_j + 1j*a_j``; all derivatives are spectral, so the discrete
gradient returned by :func:`el_residual` is exact for the discrete energy.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError, FluxError, ShapeError
from .grid import TorusGrid, dperiodic, dsection


@dataclass(frozen=True, eq=False)
class GaugePair:
    """A connection ``A = 1j*(a1 dx + a2 dy)`` and a section ``phi`` of degree ``degree``."""

    a1: np.ndarray
    a2: np.ndarray
    phi: np.ndarray
    degree: int

    def __post_init__(self):
        for name in ("a1", "a2"):
            arr = np.asarray(getattr(self, name))
            if np.iscomplexobj(arr):
                raise DomainError(f"{name} must be real (A = 1j*a); got complex samples")
            object.__setattr__(self, name, arr.astype(float, copy=False))
        phi = np.asarray(self.phi, dtype=complex)
        object.__setattr__(self, "phi", phi)
        if not (self.a1.shape == self.a2.shape == phi.shape):
            raise ShapeError(f"component shapes differ: {self.a1.shape}, {self.a2.shape}, {phi.shape}")
        if int(self.degree) != self.degree:
            raise DomainError("degree must be an integer")
        object.__setattr__(self, "degree", int(self.degree))

    @classmethod
    def from_imaginary(cls, A1, A2, phi, degree: int, atol: float = 0.0) -> "GaugePair":
        """Build from purely imaginary connection samples; any real part is an error."""
        A1 = np.asarray(A1)
        A2 = np.asarray(A2)
        for name, A in (("A1", A1), ("A2", A2)):
            if np.any(np.abs(np.real(A)) > atol):
                raise DomainError(f"{name} has a nonzero real part; connection samples must be imaginary")
        return cls(np.imag(A1).astype(float), np.imag(A2).astype(float), phi, degree)

    @property
    def A1(self) -> np.ndarray:
        return 1j * self.a1

    @property
    def A2(self) -> np.ndarray:
        return 1j * self.a2

    @property
    def shape(self):
        return self.phi.shape

    def replace(self, **kw) -> "GaugePair":
        fields = dict(a1=self.a1, a2=self.a2, phi=self.phi, degree=self.degree)
        fields.update(kw)
        return GaugePair(**fields)


@dataclass(frozen=True, eq=False)
class Field2Form:
    """Curvature coefficient ``F12`` (purely imaginary samples)."""

    F12: np.ndarray

    @property
    def b(self) -> np.ndarray:
        return self.F12.imag


class ELResidual(NamedTuple):
    phi: np.ndarray
    A1: np.ndarray
    A2: np.ndarray


def reference_a1(grid: TorusGrid, degree: int) -> np.ndarray:
    return (2.0 * np.pi * degree / grid.area) * grid.Y


def reference_pair(grid: TorusGrid, degree: int, phi=None) -> GaugePair:
    """Uniform-flux connection ``F12 = -2*pi*1j*d/area`` with the given section (default 0)."""
    if phi is None:
        phi = np.zeros(grid.shape, complex)
    elif np.isscalar(phi):
        phi = np.full(grid.shape, phi, complex)
    return GaugePair(reference_a1(grid, degree).copy(), np.zeros(grid.shape), phi, degree)


def vacuum(grid: TorusGrid) -> GaugePair:
    return GaugePair(np.zeros(grid.shape), np.zeros(grid.shape), np.ones(grid.shape, complex), 0)


def _check(pair: GaugePair, grid: TorusGrid):
    if pair.shape[-2:] != grid.shape:
        raise ShapeError(f"pair has shape {pair.shape}, grid is {grid.shape}")


def magnetic_field(a1, a2, degree: int, grid: TorusGrid) -> np.ndarray:
    """Real ``b = d1 a2 - d2 a1`` honouring the linear reference part of ``a1``."""
    a1p = a1 - reference_a1(grid, degree)
    return dperiodic(a2, grid, -2) - dperiodic(a1p, grid, -1) - 2.0 * np.pi * degree / grid.area


def curvature(pair: GaugePair, grid: TorusGrid) -> Field2Form:
    _check(pair, grid)
    return Field2Form(1j * magnetic_field(pair.a1, pair.a2, pair.degree, grid))


def cov_derivs(a1, a2, phi, degree: int, grid: TorusGrid):
    """``(D1 phi, D2 phi)`` with ``D_j = d_j + 1j*a_j``."""
    d1 = dsection(phi, grid, degree, -2) + 1j * a1 * phi
    d2 = dsection(phi, grid, degree, -1) + 1j * a2 * phi
    return d1, d2


def covariant_derivative(pair: GaugePair, grid: TorusGrid):
    _check(pair, grid)
    return cov_derivs(pair.a1, pair.a2, pair.phi, pair.degree, grid)


def energy_density(pair: GaugePair, grid: TorusGrid) -> np.ndarray:
    _check(pair, grid)
    b = magnetic_field(pair.a1, pair.a2, pair.degree, grid)
    d1, d2 = cov_derivs(pair.a1, pair.a2, pair.phi, pair.degree, grid)
    rho = np.abs(pair.phi) ** 2
    return 0.5 * (b**2 + np.abs(d1) ** 2 + np.abs(d2) ** 2 + 0.25 * (1.0 - rho) ** 2)


def potential_energy(pair: GaugePair, grid: TorusGrid) -> float:
    return float(grid.integrate(energy_density(pair, grid)))


def flux_number(pair: GaugePair, grid: TorusGrid) -> float:
    """Unrounded ``(i/2pi) * integral(F12)``."""
    _check(pair, grid)
    return float(-grid.integrate(magnetic_field(pair.a1, pair.a2, pair.degree, grid)) / (2.0 * np.pi))


def vortex_number(pair: GaugePair, grid: TorusGrid, tol: float = 1e-6) -> int:
    flux = flux_number(pair, grid)
    if not np.isfinite(flux):
        raise FluxError("non-finite flux")
    n = int(round(flux))
    if abs(flux - n) > tol:
        raise FluxError(f"flux {flux!r} is not integral within {tol}")
    return n


def _is_periodic(chi: np.ndarray) -> bool:
    scale = 0.0
    jump = 0.0
    for axis in (-2, -1):
        interior = np.abs(np.diff(chi, axis=axis))
        seam = np.abs(np.take(chi, 0, axis=axis) - np.take(chi, -1, axis=axis))
        scale = max(scale, float(interior.max(initial=0.0)))
        jump = max(jump, float(seam.max(initial=0.0)))
    return jump <= 10.0 * scale + 1e-12


def gauge_transform(pair: GaugePair, chi: np.ndarray, grid: TorusGrid) -> GaugePair:
    """``A -> A + 1j*d(chi)``, ``phi -> exp(-1j*chi)*phi`` for periodic real ``chi``."""
    _check(pair, grid)
    chi = np.asarray(chi)
    if chi.shape != grid.shape:
        raise ShapeError(f"chi has shape {chi.shape}, grid is {grid.shape}")
    if np.iscomplexobj(chi):
        raise DomainError("gauge function must be real")
    if not _is_periodic(chi):
        raise DomainError("gauge function is not periodic on the torus")
    return GaugePair(
        pair.a1 + dperiodic(chi, grid, -2),
        pair.a2 + dperiodic(chi, grid, -1),
        np.exp(-1j * chi) * pair.phi,
        pair.degree,
    )


def gradient(a1, a2, phi, degree: int, grid: TorusGrid):
    """Gradient of the discrete potential energy w.r.t. ``(a1, a2, phi)``.

    The pairing is ``<f, g> = Re sum(conj(f) g) * cell``, so that
    ``dU = <g_a1, da1> + <g_a2, da2> + <g_phi, dphi>``.
    """
    b = magnetic_field(a1, a2, degree, grid)
    d1, d2 = cov_derivs(a1, a2, phi, degree, grid)
    dd1 = dsection(d1, grid, degree, -2) + 1j * a1 * d1
    dd2 = dsection(d2, grid, degree, -1) + 1j * a2 * d2
    rho = np.abs(phi) ** 2
    g_phi = -(dd1 + dd2) - 0.5 * (1.0 - rho) * phi
    conj_phi = phi.conj()
    g_a1 = dperiodic(b, grid, -1) + np.imag(conj_phi * d1)
    g_a2 = -dperiodic(b, grid, -2) + np.imag(conj_phi * d2)
    return g_a1, g_a2, g_phi


def el_residual(pair: GaugePair, grid: TorusGrid) -> ELResidual:
    """First variation of ``U`` w.r.t. ``(conj(phi), A)``; connection parts are imaginary."""
    _check(pair, grid)
    g_a1, g_a2, g_phi = gradient(pair.a1, pair.a2, pair.phi, pair.degree, grid)
    return ELResidual(g_phi, 1j * g_a1, 1j * g_a2)


def el_residual_norm(pair: GaugePair, grid: TorusGrid) -> float:
    r = el_residual(pair, grid)
    return float(max(np.abs(r.phi).max(), np.abs(r.A1).max(), np.abs(r.A2).max()))
