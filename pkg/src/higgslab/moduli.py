"""Kinetic metric on the vortex moduli space and its geodesics.

Tangent vectors are central differences of solved vortices along a moduli
direction, Richardson-extrapolated from steps ``delta`` and ``delta/2`` and
then projected off the gauge orbit. The metric is the Gram matrix of the
projected tangents in the kinetic pairing, so ``T = g(v, v)/2`` for moduli
velocity ``v``.

Two charts are used: zero positions, and (near collisions, where positions
stop being smooth coordinates) the coefficients of the monic polynomial with
roots ``z_k - anchor``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

from .dynamics import remove_gauge_part
from .errors import ConditioningError, ConvergenceError, InfeasibleError
from .fields import GaugePair
from .grid import TorusGrid, dperiodic
from .vortex import ModuliPoint, VortexSolution, moduli_to_polynomial, polynomial_to_moduli, solve_vortex

SOLVE_TOL = 1e-12
RICHARDSON_RTOL = 0.01


# -- charts -----------------------------------------------------------------

@dataclass(frozen=True)
class Chart:
    """``kind`` is ``"position"`` or ``"coefficient"``; ``anchor`` shifts the coefficient chart."""

    kind: str = "position"
    anchor: complex = 0j

    def __post_init__(self):
        if self.kind not in ("position", "coefficient"):
            raise ValueError(f"unknown chart {self.kind!r}")

    def coords(self, m: ModuliPoint) -> np.ndarray:
        if self.kind == "position":
            return m.to_real()
        c = moduli_to_polynomial(m.shifted(-self.anchor))
        return np.array([v for z in c for v in (z.real, z.imag)])

    def moduli(self, x, like: ModuliPoint | None = None) -> ModuliPoint:
        """Moduli at coordinates ``x``; coefficient-chart roots are labelled to follow ``like``."""
        x = np.asarray(x, float)
        if self.kind == "position":
            return ModuliPoint.from_real(x)
        coeffs = [complex(x[2 * k], x[2 * k + 1]) for k in range(x.size // 2)]
        m = polynomial_to_moduli(coeffs).shifted(self.anchor)
        return match_labels(m, like) if like is not None else m

    def velocity_from_positions(self, m: ModuliPoint, zdot) -> np.ndarray:
        """Chart velocity for position velocity ``zdot`` (real 2d vector) at ``m``."""
        zdot = np.asarray(zdot, float)
        if self.kind == "position":
            return zdot.copy()
        w = np.array(m.zeros) - self.anchor
        dz = zdot[0::2] + 1j * zdot[1::2]
        dp = np.zeros(len(w), complex)
        for k in range(len(w)):
            others = np.poly(np.delete(w, k)) if len(w) > 1 else np.array([1.0 + 0j])
            dp -= dz[k] * others
        return np.array([v for z in dp for v in (z.real, z.imag)])

    def velocity_to_positions(self, m: ModuliPoint, xdot) -> np.ndarray:
        xdot = np.asarray(xdot, float)
        if self.kind == "position":
            return xdot.copy()
        w = np.array(m.zeros) - self.anchor
        d = len(w)
        dc = xdot[0::2] + 1j * xdot[1::2]
        out = np.zeros(2 * d)
        for k in range(d):
            # delta P(w_k) + P'(w_k) delta w_k = 0
            dP = sum(dc[j] * w[k] ** (d - 1 - j) for j in range(d))
            dprime = np.prod([w[k] - w[l] for l in range(d) if l != k]) if d > 1 else 1.0
            dz = -dP / dprime if dprime != 0 else complex(np.nan, np.nan)
            out[2 * k], out[2 * k + 1] = dz.real, dz.imag
        return out


POSITIONS = Chart("position")


def match_labels(m: ModuliPoint, like: ModuliPoint) -> ModuliPoint:
    """Reorder ``m`` to minimise the summed distance to ``like`` (plane metric, d <= 4)."""
    if m.d != like.d or m.d <= 1:
        return m
    zs = np.array(m.zeros)
    ref = np.array(like.zeros)
    best = min(permutations(range(m.d)), key=lambda p: float(np.sum(np.abs(zs[list(p)] - ref))))
    return ModuliPoint(tuple(zs[list(best)]))


def min_separation(m: ModuliPoint) -> float:
    if m.d < 2:
        return np.inf
    z = np.array(m.zeros)
    diff = np.abs(z[:, None] - z[None, :])
    return float(diff[np.triu_indices(m.d, 1)].min())


# -- tangents ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TangentSolution:
    """Gauge-orthogonal tangent ``(dA1, dA2, dphi) = (1j*da1, 1j*da2, dphi)``."""

    da1: np.ndarray
    da2: np.ndarray
    dphi: np.ndarray
    moduli: ModuliPoint
    direction: np.ndarray
    orthogonality_residual: float = 0.0
    flags: tuple = ()

    @property
    def dA1(self):
        return 1j * self.da1

    @property
    def dA2(self):
        return 1j * self.da2


def kinetic_pairing(t1, t2, grid: TorusGrid) -> float:
    """``integral(Re(dphi1 conj(dphi2)) + da1*da1' + da2*da2')`` for ``(da1, da2, dphi)`` triples."""
    return float(grid.integrate(np.real(t1[2] * np.conj(t2[2])) + t1[0] * t2[0] + t1[1] * t2[1]))


def orthogonality_residual(da1, da2, dphi, phi, grid: TorusGrid) -> float:
    """Sup of the gauge-pairing density relative to the tangent's sup size."""
    dens = dperiodic(da1, grid, -2) + dperiodic(da2, grid, -1) + np.imag(phi.conj() * dphi)
    scale = max(float(np.abs(da1).max()), float(np.abs(da2).max()), float(np.abs(dphi).max()))
    return float(np.abs(dens).max() / scale) if scale > 0 else 0.0


class _Stencil:
    """Vortex solves around a base point, warm-started from the base solution."""

    def __init__(self, grid: TorusGrid, chart: Chart, x, base: VortexSolution | None = None,
                 like: ModuliPoint | None = None, tol: float = SOLVE_TOL, warm: VortexSolution | None = None):
        self.grid = grid
        self.chart = chart
        self.x = np.asarray(x, float)
        self.tol = tol
        self.like = like
        m = chart.moduli(self.x, like)
        if base is None:
            base = solve_vortex(m, grid, tol, v0=None if warm is None else warm.v)
        self.base = base

    def pair_at(self, y) -> GaugePair:
        m = self.chart.moduli(y, self.like)
        return solve_vortex(m, self.grid, self.tol, v0=self.base.v).pair

    def raw_derivative(self, y, u, delta):
        """Central difference of ``(a1, a2, phi)`` at ``y`` along ``u`` with step ``delta``."""
        p = self.pair_at(y + delta * u)
        q = self.pair_at(y - delta * u)
        s = 0.5 / delta
        return ((p.a1 - q.a1) * s, (p.a2 - q.a2) * s, (p.phi - q.phi) * s)

    def tangent(self, y, u, delta, phi=None):
        """Richardson-extrapolated, gauge-projected derivative; returns ``(triple, rel_change)``."""
        d1 = self.raw_derivative(y, u, delta)
        d2 = self.raw_derivative(y, u, 0.5 * delta)
        ext = tuple((4.0 * b - a) / 3.0 for a, b in zip(d1, d2))
        if phi is None:
            phi = self.pair_at(y).phi if not np.array_equal(y, self.x) else self.base.pair.phi
        proj = remove_gauge_part(ext[0], ext[1], ext[2], phi, self.grid)
        num = sum(float(np.sum(np.abs(a - b) ** 2)) for a, b in zip(d1, d2))
        den = sum(float(np.sum(np.abs(b) ** 2)) for b in d2)
        rel = np.sqrt(num / den) if den > 0 else 0.0
        return proj, rel


def default_delta(grid: TorusGrid) -> float:
    """Moduli-space stencil step. The speed drift of geodesics scales as ``delta**4``;
    ``h`` keeps it below 1e-4 through a head-on collision at 64^2, area 100."""
    return grid.h


def tangent_solution(moduli: ModuliPoint, direction, grid: TorusGrid, *, delta: float | None = None,
                     base: VortexSolution | None = None) -> TangentSolution:
    """Gauge-orthogonal derivative of the vortex family along a position-chart ``direction``.

    The result is assembled from partial derivatives along the coordinate
    axes that ``direction`` uses, so it is exactly linear in ``direction``.
    """
    direction = np.asarray(direction, float)
    if direction.shape != (2 * moduli.d,):
        raise ValueError(f"direction must have length {2 * moduli.d}")
    delta = default_delta(grid) if delta is None else delta
    shape = grid.shape
    da1, da2, dphi = np.zeros(shape), np.zeros(shape), np.zeros(shape, complex)
    flags = []
    if np.any(direction):
        st = _Stencil(grid, POSITIONS, moduli.to_real(), base)
        phi = st.base.pair.phi
        for a in np.nonzero(direction)[0]:
            e = np.zeros(direction.size)
            e[a] = 1.0
            (t1, t2, t3), rel = st.tangent(st.x, e, delta, phi)
            if rel > RICHARDSON_RTOL:
                flags.append(f"Richardson disagreement {rel:.2%} along axis {a}")
            da1 += direction[a] * t1
            da2 += direction[a] * t2
            dphi += direction[a] * t3
        res = orthogonality_residual(da1, da2, dphi, phi, grid)
    else:
        res = 0.0
    return TangentSolution(da1, da2, dphi, moduli, direction.copy(), res, tuple(flags))


# -- metric -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MetricSample:
    moduli: ModuliPoint
    g: np.ndarray
    chart: Chart = POSITIONS
    flags: tuple = field(default=(), compare=False)

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.g)


def _metric(stencil: _Stencil, delta: float):
    n = stencil.x.size
    phi = stencil.base.pair.phi
    tans = []
    flags = []
    for a in range(n):
        e = np.zeros(n)
        e[a] = 1.0
        t, rel = stencil.tangent(stencil.x, e, delta, phi)
        if rel > RICHARDSON_RTOL:
            flags.append(f"Richardson disagreement {rel:.2%} along axis {a}")
        tans.append(t)
    g = np.empty((n, n))
    for a in range(n):
        for b in range(a, n):
            g[a, b] = g[b, a] = kinetic_pairing(tans[a], tans[b], stencil.grid)
    return g, flags


def metric_at(moduli: ModuliPoint, grid: TorusGrid, *, chart: Chart = POSITIONS, delta: float | None = None,
              base: VortexSolution | None = None) -> MetricSample:
    """Kinetic metric at ``moduli`` in ``chart`` coordinates."""
    delta = default_delta(grid) if delta is None else delta
    st = _Stencil(grid, chart, chart.coords(moduli), base, like=moduli)
    g, flags = _metric(st, delta)
    if moduli.d and np.linalg.eigvalsh(g).min() <= 0:
        raise ConditioningError(f"metric is not positive definite at {moduli.zeros}")
    return MetricSample(moduli, g, chart, tuple(flags))


# -- geodesics --------------------------------------------------------------

@dataclass(frozen=True)
class GeodesicPoint:
    tau: float
    moduli: ModuliPoint
    velocity: np.ndarray  # position-chart velocity (nan at exact coincidence)
    chart: Chart
    coords: np.ndarray
    coord_velocity: np.ndarray
    speed2: float


@dataclass
class GeodesicPath:
    """Sequence of :class:`GeodesicPoint`; ``error`` is set if integration stopped early."""

    points: list = field(default_factory=list)
    error: str | None = None

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)

    def __getitem__(self, k):
        return self.points[k]

    @property
    def taus(self) -> np.ndarray:
        return np.array([p.tau for p in self.points])

    def positions(self) -> np.ndarray:
        return np.array([p.moduli.zeros for p in self.points])


class _GeodesicRHS:
    """Hamiltonian vector field ``x' = g^-1 p``, ``p' = (1/2) d_x g(x')(x', x')``."""

    def __init__(self, grid, chart, delta, cond_tol, base):
        self.grid = grid
        self.chart = chart
        self.delta = delta
        self.cond_tol = cond_tol
        self.base = base
        self.like = None

    def metric(self, x):
        st = _Stencil(self.grid, self.chart, x, like=self.like, warm=self.base)
        self.base = st.base
        g, _ = _metric(st, self.delta)
        return g, st

    def velocity(self, x, p):
        g, st = self.metric(x)
        ev = np.linalg.eigvalsh(g)
        if ev.min() < self.cond_tol * np.trace(g):
            raise ConditioningError(f"metric nearly singular (eigenvalues {ev}) in {self.chart.kind} chart")
        return np.linalg.solve(g, p), g, st

    def __call__(self, x, p):
        xdot, g, st = self.velocity(x, p)
        speed = float(np.linalg.norm(xdot))
        force = np.zeros_like(x)
        if speed == 0.0:
            return xdot, force
        u = xdot / speed
        h = self.delta

        def K(y):
            t, _ = st.tangent(y, u, h)
            return kinetic_pairing(t, t, self.grid)

        n = x.size
        if self.chart.kind == "position" and n > 2:
            # K is translation invariant in the position chart: differentiate along
            # relative directions only and recover the gradient from sum(grad) = 0
            d = n // 2
            dirs = []
            for k in range(d - 1):
                for comp in (0, 1):
                    e = np.zeros(n)
                    e[2 * k + comp], e[2 * (d - 1) + comp] = 1.0, -1.0
                    dirs.append(e)
            D = np.array([_richardson_slope(K, x, e, h) for e in dirs]).reshape(d - 1, 2)
            G = D - D.sum(axis=0) / d
            grad = np.vstack([G, -G.sum(axis=0)]).ravel()
        else:
            grad = np.array([_richardson_slope(K, x, e, h) for e in np.eye(n)])
        force = 0.5 * speed**2 * grad
        return xdot, force


def _richardson_slope(f, x, e, h):
    """Fourth-order central slope of ``f`` at ``x`` along ``e`` from steps ``h`` and ``h/2``."""
    k1 = f(x + h * e) - f(x - h * e)
    k2 = f(x + 0.5 * h * e) - f(x - 0.5 * h * e)
    return (4.0 * k2 / h - k1 / (2.0 * h)) / 3.0


def geodesic(moduli0: ModuliPoint, velocity0, tau_end: float, grid: TorusGrid, *, dtau: float = 0.05,
             delta: float | None = None, switch_in: float | None = None, switch_out: float | None = None,
             cond_tol: float = 1e-6, max_substeps: int = 8) -> GeodesicPath:
    """RK4 integration of the kinetic-metric geodesic from ``moduli0`` with position velocity ``velocity0``.

    The coefficient chart (anchored at the centre of mass) is used whenever the
    minimum zero separation drops below ``switch_in`` (default ``4h``) and left
    again once it exceeds ``switch_out`` (default ``8h``).
    """
    if tau_end <= 0:
        raise ValueError("tau_end must be positive")
    velocity0 = np.asarray(velocity0, float)
    if velocity0.shape != (2 * moduli0.d,):
        raise ValueError(f"velocity0 must have length {2 * moduli0.d}")
    delta = default_delta(grid) if delta is None else delta
    switch_in = 4.0 * grid.h if switch_in is None else switch_in
    switch_out = 8.0 * grid.h if switch_out is None else switch_out
    path = GeodesicPath()
    m = moduli0
    chart = POSITIONS if min_separation(m) >= switch_in else _coefficient_chart(m)
    x = chart.coords(m)
    try:
        rhs = _GeodesicRHS(grid, chart, delta, cond_tol, None)
        rhs.like = m
        g, _ = rhs.metric(x)
        xdot = chart.velocity_from_positions(m, velocity0)
        p = g @ xdot
    except (ConvergenceError, InfeasibleError) as exc:
        path.error = f"metric evaluation failed at tau=0: {exc}"
        return path
    path.points.append(_point(0.0, m, chart, x, xdot, g))
    nsteps = int(np.ceil(tau_end / dtau - 1e-9))
    h = tau_end / nsteps
    if not np.any(velocity0):
        for k in range(1, nsteps + 1):
            path.points.append(_point(k * h, m, chart, x, xdot, g))
        return path
    tau = 0.0
    for k in range(1, nsteps + 1):
        nsub = _substeps(chart, m, xdot, h, max_substeps)
        hs = h / nsub
        try:
            for _ in range(nsub):
                rhs.like = m
                x, p = _rk4_step(rhs, x, p, hs)
                tau += hs
                m = chart.moduli(x, m)
                xdot, g, _ = rhs.velocity(x, p)
                sep = min_separation(m)
                new = None
                if chart.kind == "position" and sep < switch_in:
                    new = _coefficient_chart(m)
                elif chart.kind == "coefficient" and sep > switch_out:
                    new = POSITIONS
                if new is not None:
                    zdot = chart.velocity_to_positions(m, xdot)
                    if np.all(np.isfinite(zdot)):
                        chart = new
                        x = chart.coords(m)
                        rhs = _GeodesicRHS(grid, chart, delta, cond_tol, rhs.base)
                        rhs.like = m
                        g, _ = rhs.metric(x)
                        xdot = chart.velocity_from_positions(m, zdot)
                        p = g @ xdot
        except ConditioningError as exc:
            exc.partial = path
            raise
        except (ConvergenceError, InfeasibleError) as exc:
            path.error = f"metric evaluation failed near tau={tau:.4g}: {exc}"
            return path
        tau = k * h
        path.points.append(_point(tau, m, chart, x, xdot, g))
    return path


def _rk4_step(rhs, x, p, h):
    k1 = rhs(x, p)
    k2 = rhs(x + 0.5 * h * k1[0], p + 0.5 * h * k1[1])
    k3 = rhs(x + 0.5 * h * k2[0], p + 0.5 * h * k2[1])
    k4 = rhs(x + h * k3[0], p + h * k3[1])
    return (x + h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
            p + h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]))


def _substeps(chart, m, xdot, h, cap):
    """Position-chart velocities blow up like 1/separation near collisions; keep steps short."""
    if chart.kind != "position" or m.d < 2:
        return 1
    sep = min_separation(m)
    zdot = xdot[0::2] + 1j * xdot[1::2]
    rel = float(np.abs(zdot[:, None] - zdot[None, :]).max())
    return int(min(cap, max(1, np.ceil(h * rel / (0.1 * sep)))))


def _coefficient_chart(m: ModuliPoint) -> Chart:
    return Chart("coefficient", complex(np.mean(m.zeros)))


def _point(tau, m, chart, x, xdot, g) -> GeodesicPoint:
    with np.errstate(all="ignore"):
        vel = chart.velocity_to_positions(m, xdot)
    return GeodesicPoint(float(tau), m, vel, chart, np.array(x, float), np.array(xdot, float),
                         float(xdot @ g @ xdot))


def scattering_angle(path_or_positions) -> float:
    """Angle in degrees between the incoming and outgoing relative axes of a two-vortex path.

    Zeros are indistinguishable, so the result is folded into ``[0, 90]``.
    """
    pos = path_or_positions.positions() if isinstance(path_or_positions, GeodesicPath) else np.asarray(
        path_or_positions)
    rel_in = pos[0, 0] - pos[0, 1]
    rel_out = pos[-1, 0] - pos[-1, 1]
    ang = np.degrees(abs(np.angle(rel_out / rel_in)))
    ang = ang % 180.0
    return float(min(ang, 180.0 - ang))
