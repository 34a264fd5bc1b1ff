"""Comparison of slow field dynamics with moduli-space geodesics.

A run at slow speed ``eps`` starts from the static vortex at ``moduli0``
with field velocity ``eps * tangent(velocity0)``; its zeros, read in slow
time ``tau = eps * t``, are compared with the geodesic through the same data.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

from .dynamics import DynState, evolve, kinetic_energy, max_stable_dt, project_constraint
from .errors import ConditioningError, ConvergenceError, DivergenceError, DomainError, InfeasibleError
from .grid import TorusGrid
from .moduli import Chart, GeodesicPath, geodesic, metric_at, tangent_solution
from .vortex import ModuliPoint, locate_zeros, solve_vortex

COLLISION_WINDOW = 0.05


@dataclass
class TrajectoryPoint:
    t: float
    moduli: ModuliPoint
    crossing: bool = False
    alternative: ModuliPoint | None = None  # second-best labelling at a crossing


@dataclass
class AdiabaticReport:
    eps: list
    deviations: list
    ratios: list
    window_deviations: list = field(default_factory=list)
    energy_partition: list = field(default_factory=list)
    failures: dict = field(default_factory=dict)
    collision_tau: float | None = None
    geodesic: GeodesicPath | None = field(default=None, repr=False)
    trajectories: dict = field(default_factory=dict, repr=False)

    @property
    def monotone(self) -> bool:
        dev = np.asarray(self.deviations, float)
        return bool(np.all(np.isfinite(dev)) and np.all(np.diff(dev) < 0))


def prepare_adiabatic_state(moduli0: ModuliPoint, velocity0, eps: float, grid: TorusGrid, *,
                            delta: float | None = None) -> DynState:
    """Static vortex at ``moduli0`` moving with moduli velocity ``eps * velocity0``."""
    if eps < 0:
        raise DomainError("eps must be nonnegative")
    sol = solve_vortex(moduli0, grid, 1e-12)
    state = DynState.at_rest(sol.pair)
    if eps == 0 or moduli0.d == 0:
        return state
    tan = tangent_solution(moduli0, velocity0, grid, delta=delta, base=sol)
    state = state.replace(va1=eps * tan.da1, va2=eps * tan.da2, vphi=eps * tan.dphi)
    return project_constraint(state, grid)


def _unwrap(zeros, ref, grid: TorusGrid):
    """Lattice translate of each zero nearest to the corresponding reference point."""
    return [r + grid.torus_delta(z, r) for z, r in zip(zeros, ref)]


def _match(m: ModuliPoint, prev: ModuliPoint, grid: TorusGrid):
    """Best and second-best labelling of ``m`` against ``prev`` under the torus metric."""
    zs = list(m.zeros)
    ref = list(prev.zeros)
    scored = []
    for p in permutations(range(len(zs))):
        cand = [zs[i] for i in p]
        cost = float(sum(grid.distance(z, r) ** 2 for z, r in zip(cand, ref)))
        scored.append((cost, _unwrap(cand, ref, grid)))
    scored.sort(key=lambda c: c[0])
    return scored


class _Tracker:
    def __init__(self, grid: TorusGrid, start: ModuliPoint | None = None):
        self.grid = grid
        self.prev = start
        self.points: list[TrajectoryPoint] = []

    def add(self, t: float, m: ModuliPoint):
        if self.prev is None or m.d == 0:
            pt = TrajectoryPoint(t, m)
        else:
            if m.d != self.prev.d:
                raise DomainError(f"vortex number changed along the run ({self.prev.d} -> {m.d})")
            scored = _match(m, self.prev, self.grid)
            best = ModuliPoint(tuple(scored[0][1]))
            crossing, alt = False, None
            if len(scored) > 1:
                c0, c1 = scored[0][0], scored[1][0]
                if c1 - c0 < 0.5 * (c0 + self.grid.h ** 2):
                    crossing, alt = True, ModuliPoint(tuple(scored[1][1]))
            pt = TrajectoryPoint(t, best, crossing, alt)
        self.prev = pt.moduli
        self.points.append(pt)
        return pt


def zero_trajectory(run, grid: TorusGrid, *, start: ModuliPoint | None = None) -> list[TrajectoryPoint]:
    """Zeros along a list of ``DynState`` with labels carried by nearest-neighbour matching.

    Positions are unwrapped so that each label moves continuously in the plane.
    Ambiguous matchings (near collisions) are flagged with both labellings.
    """
    tr = _Tracker(grid, start)
    for state in run:
        tr.add(state.t, locate_zeros(state.pair, grid))
    return tr.points


def moduli_deviation(m: ModuliPoint, ref: ModuliPoint, chart: Chart, grid: TorusGrid) -> float:
    """Euclidean distance in ``chart`` between ``m`` and ``ref`` (labels and lattice translates optimised)."""
    if m.d != ref.d:
        raise DomainError("moduli of different vortex number")
    if m.d == 0:
        return 0.0
    scored = _match(m, ref, grid)
    if chart.kind == "position":
        return float(np.sqrt(scored[0][0]))
    near = ModuliPoint(tuple(scored[0][1]))
    return float(np.linalg.norm(chart.coords(near) - chart.coords(ref)))


def _collision_tau(path: GeodesicPath) -> float | None:
    if path.points[0].moduli.d < 2:
        return None
    from .moduli import min_separation
    seps = np.array([min_separation(p.moduli) for p in path])
    k = int(np.argmin(seps))
    # a collision is a separation minimum well inside the path
    if 0 < k < len(seps) - 1 and seps[k] < 0.5 * seps[0]:
        return float(path.points[k].tau)
    return None


def adiabatic_compare(moduli0: ModuliPoint, velocity0, eps_list, tau_end: float, grid: TorusGrid, *,
                      dtau: float = 0.05, path: GeodesicPath | None = None,
                      window: float = COLLISION_WINDOW, dt_fraction: float = 0.25) -> AdiabaticReport:
    """Sup-deviation in slow time between field runs at each ``eps`` and the geodesic.

    The geodesic is computed once (or passed as ``path``, which must start at
    ``moduli0`` and sample slow time every ``dtau``). Deviations inside
    ``|tau - tau_c| < window`` around a collision are reported separately.
    """
    eps_list = [float(e) for e in eps_list]
    if not eps_list or any(e <= 0 for e in eps_list):
        raise DomainError("eps values must be positive")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise DomainError("eps list must be strictly decreasing")
    if tau_end <= 0:
        raise DomainError("tau_end must be positive")
    velocity0 = np.asarray(velocity0, float)
    if path is None:
        try:
            path = geodesic(moduli0, velocity0, tau_end, grid, dtau=dtau)
        except ConditioningError as exc:
            path = getattr(exc, "partial", None)
            if path is None or len(path) < 2:
                raise
            path.error = str(exc)
    taus = path.taus
    dtau = float(taus[1] - taus[0]) if len(taus) > 1 else dtau
    tau_c = _collision_tau(path)
    g0 = metric_at(moduli0, grid).g if moduli0.d else np.zeros((0, 0))
    report = AdiabaticReport(eps_list, [], [], collision_tau=tau_c, geodesic=path)
    if path.error:
        report.failures["geodesic"] = path.error
    for eps in eps_list:
        try:
            dev, win, part, traj = _one_run(moduli0, velocity0, eps, path, grid, dtau, tau_c, window,
                                            dt_fraction, g0)
        except (DivergenceError, ConvergenceError, InfeasibleError, DomainError) as exc:
            report.failures[eps] = f"{type(exc).__name__}: {exc}"
            report.deviations.append(float("nan"))
            report.window_deviations.append(float("nan"))
            report.energy_partition.append(float("nan"))
            continue
        report.deviations.append(dev)
        report.window_deviations.append(win)
        report.energy_partition.append(part)
        report.trajectories[eps] = traj
    dev = report.deviations
    report.ratios = [a / b if b > 0 else float("inf") for a, b in zip(dev, dev[1:])]
    return report


def _one_run(moduli0, velocity0, eps, path, grid, dtau, tau_c, window, dt_fraction, g0):
    state = prepare_adiabatic_state(moduli0, velocity0, eps, grid)
    t_step = dtau / eps
    n_per = int(np.ceil(t_step / (dt_fraction * grid.h)))
    dt = t_step / n_per
    if dt >= max_stable_dt(grid, state.pair):
        raise DomainError("time step too large for this grid")
    T0 = kinetic_energy(state, grid)
    tracker = _Tracker(grid, moduli0)
    tracker.add(0.0, moduli0)
    samples = [(0.0, T0)]

    def cb(k, s):
        if k % n_per == 0:
            tracker.add(s.t * eps, locate_zeros(s.pair, grid))
            samples.append((s.t * eps, kinetic_energy(s, grid)))

    evolve(state, dt, n_per * (len(path) - 1), grid, callback=cb)
    dev_out, dev_in, part = 0.0, 0.0, 0.0
    for gp, tp, (tau, T) in zip(path.points, tracker.points, samples):
        d = moduli_deviation(tp.moduli, gp.moduli, gp.chart, grid)
        near = tau_c is not None and abs(gp.tau - tau_c) < window
        if near:
            dev_in = max(dev_in, d)
        else:
            dev_out = max(dev_out, d)
            if T0 > 0:
                part = max(part, abs(T - 0.5 * eps**2 * gp.speed2) / T0)
    return dev_out, dev_in, part, tracker.points
