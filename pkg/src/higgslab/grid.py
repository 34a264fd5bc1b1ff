"""Flat torus grids and the spectral calculus used by every field module.

Arrays are indexed ``[i, j]`` with ``x = i*hx`` and ``y = j*hy`` and the two
spatial axes are always the last two axes, so the same routines act on 2D
fields and on batched (e.g. 4D product-torus) data.

Sections of the degree-``d`` bundle obey

    phi(x + lx, y) = phi(x, y)
    phi(x, y + ly) = exp(-2j*pi*d*x/lx) * phi(x, y)

and are differentiated along ``y`` after multiplying by the compensating
phase ``exp(1j*theta(x)*y/ly)``, ``theta(x) = 2*pi*d*x/lx``, which makes every
``x = const`` line periodic.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import scipy.fft as sfft

from .errors import ShapeError


@dataclass(frozen=True)
class TorusGrid:
    """Collocated ``nx`` by ``ny`` grid on the flat torus ``[0, lx) x [0, ly)``."""

    nx: int
    ny: int
    lx: float
    ly: float

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny:
            raise ValueError("nx and ny must be integers")
        if self.nx < 16 or self.ny < 16:
            raise ValueError(f"grid needs at least 16 samples per side, got {self.nx}x{self.ny}")
        if not (self.lx > 0 and self.ly > 0):
            raise ValueError("side lengths must be positive")
        object.__setattr__(self, "nx", int(self.nx))
        object.__setattr__(self, "ny", int(self.ny))
        object.__setattr__(self, "lx", float(self.lx))
        object.__setattr__(self, "ly", float(self.ly))

    @classmethod
    def square(cls, n: int, area: float = 100.0) -> "TorusGrid":
        side = float(np.sqrt(area))
        return cls(n, n, side, side)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def h(self) -> float:
        return min(self.hx, self.hy)

    @property
    def area(self) -> float:
        return self.lx * self.ly

    @property
    def cell(self) -> float:
        return self.hx * self.hy

    @cached_property
    def x(self) -> np.ndarray:
        return np.arange(self.nx) * self.hx

    @cached_property
    def y(self) -> np.ndarray:
        return np.arange(self.ny) * self.hy

    @cached_property
    def X(self) -> np.ndarray:
        return np.broadcast_to(self.x[:, None], self.shape)

    @cached_property
    def Y(self) -> np.ndarray:
        return np.broadcast_to(self.y[None, :], self.shape)

    @cached_property
    def Z(self) -> np.ndarray:
        return self.X + 1j * self.Y

    @cached_property
    def kx(self) -> np.ndarray:
        """Angular wavenumbers along x with the Nyquist mode removed."""
        return _deriv_wavenumbers(self.nx, self.lx)

    @cached_property
    def ky(self) -> np.ndarray:
        return _deriv_wavenumbers(self.ny, self.ly)

    @cached_property
    def neg_laplacian_symbol(self) -> np.ndarray:
        """Symbol of ``-(d1 d1 + d2 d2)`` built from the derivative wavenumbers.

        Using the composed first-derivative symbol (Nyquist mode set to zero)
        keeps the Laplacian the exact adjoint composition of the gradient.
        """
        return self.kx[:, None] ** 2 + self.ky[None, :] ** 2

    def integrate(self, f: np.ndarray) -> float | np.ndarray:
        """Rectangle rule over the last two axes (spectrally accurate on a torus)."""
        return np.sum(f, axis=(-2, -1)) * self.cell

    def check(self, f: np.ndarray, name: str = "field") -> None:
        if f.shape[-2:] != self.shape:
            raise ShapeError(f"{name} has shape {f.shape}, grid expects trailing {self.shape}")

    def reduce(self, z: complex) -> complex:
        """Representative of ``z`` in the fundamental domain ``[0,lx) x [0,ly)``."""
        return complex(np.mod(z.real, self.lx), np.mod(z.imag, self.ly))

    def torus_delta(self, z1, z2):
        """Shortest lattice-translate of ``z1 - z2``."""
        dz = np.asarray(z1) - np.asarray(z2)
        dx = dz.real - self.lx * np.round(dz.real / self.lx)
        dy = dz.imag - self.ly * np.round(dz.imag / self.ly)
        return dx + 1j * dy

    def distance(self, z1, z2):
        return np.abs(self.torus_delta(z1, z2))


def _deriv_wavenumbers(n: int, length: float) -> np.ndarray:
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=length / n)
    if n % 2 == 0:
        k[n // 2] = 0.0
    return k


def _axis_k(grid: TorusGrid, axis: int) -> np.ndarray:
    return grid.kx if axis == -2 else grid.ky


def dperiodic(f: np.ndarray, grid: TorusGrid, axis: int) -> np.ndarray:
    """Spectral derivative of a periodic array along ``axis`` (-2 for x, -1 for y)."""
    k = _axis_k(grid, axis)
    shape = [1] * f.ndim
    shape[axis] = k.size
    if np.isrealobj(f):
        n = f.shape[axis]
        kr = k[: n // 2 + 1].copy()
        if n % 2 == 0:
            kr[-1] = 0.0
        shape[axis] = kr.size
        fh = sfft.rfft(f, axis=axis)
        fh *= 1j * kr.reshape(shape)
        return sfft.irfft(fh, n=n, axis=axis)
    fh = sfft.fft(f, axis=axis)
    fh *= 1j * k.reshape(shape)
    return sfft.ifft(fh, axis=axis)


@lru_cache(maxsize=64)
def _twist_phase(grid: TorusGrid, degree: int) -> np.ndarray:
    theta = 2.0 * np.pi * degree * grid.x / grid.lx
    return np.exp(1j * theta[:, None] * grid.y[None, :] / grid.ly)


@lru_cache(maxsize=64)
def _twist_shift(grid: TorusGrid, degree: int) -> np.ndarray:
    theta = 2.0 * np.pi * degree * grid.x / grid.lx
    return (theta / grid.ly)[:, None] * np.ones((1, grid.ny))


def twist_phase(grid: TorusGrid, degree: int) -> np.ndarray:
    """``exp(1j*theta(x)*y/ly)``: multiplies a section into a y-periodic array."""
    return _twist_phase(grid, int(degree))


def dsection(phi: np.ndarray, grid: TorusGrid, degree: int, axis: int) -> np.ndarray:
    """Spectral derivative of a degree-``degree`` section along ``axis``."""
    if axis == -2 or degree == 0:
        return dperiodic(phi.astype(complex, copy=False), grid, axis)
    ph = twist_phase(grid, degree)
    dpsi = dperiodic(phi * ph, grid, -1)
    return dpsi * ph.conj() - 1j * _twist_shift(grid, degree) * phi


def helmholtz_solve(rhs: np.ndarray, grid: TorusGrid, shift: float) -> np.ndarray:
    """Solve ``(-Laplacian + shift) u = rhs`` spectrally.

    For ``shift == 0`` the mean of ``rhs`` is discarded and the zero-mean
    solution is returned.
    """
    sym = grid.neg_laplacian_symbol + shift
    if np.isrealobj(rhs):
        fh = sfft.rfft2(rhs, axes=(-2, -1))
        s = sym[:, : grid.ny // 2 + 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(s > 0, fh / np.where(s > 0, s, 1.0), 0.0)
        return sfft.irfft2(out, s=grid.shape, axes=(-2, -1))
    fh = sfft.fft2(rhs, axes=(-2, -1))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(sym > 0, fh / np.where(sym > 0, sym, 1.0), 0.0)
    return sfft.ifft2(out, axes=(-2, -1))


def laplacian(f: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Composed spectral Laplacian ``d1 d1 + d2 d2`` of a periodic array."""
    if np.isrealobj(f):
        fh = sfft.rfft2(f, axes=(-2, -1))
        fh *= -grid.neg_laplacian_symbol[:, : grid.ny // 2 + 1]
        return sfft.irfft2(fh, s=grid.shape, axes=(-2, -1))
    fh = sfft.fft2(f, axes=(-2, -1))
    fh *= -grid.neg_laplacian_symbol
    return sfft.ifft2(fh, axes=(-2, -1))
