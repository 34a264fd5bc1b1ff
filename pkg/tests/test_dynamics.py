import numpy as np
import pytest
from numpy.testing import assert_allclose

from higgslab.adiabatic import prepare_adiabatic_state
from higgslab.dynamics import (DynState, TrajectoryLog, energy_report, evolve, gauss_residual, kinetic_energy,
                               max_stable_dt, project_constraint, run)
from higgslab.errors import DomainError
from higgslab.fields import GaugePair, gauge_transform, magnetic_field, vacuum
from higgslab.grid import TorusGrid
from higgslab.vortex import ModuliPoint, locate_zeros, solve_vortex

from conftest import check_flux, smooth_periodic


def random_velocity_state(grid, rng, zeros=(3 + 4j, 7 + 5j), scale=0.05):
    sol = solve_vortex(ModuliPoint(zeros), grid, 1e-12)
    # the scalar velocity must be a section of the same twisted bundle as phi
    vphi = scale * (smooth_periodic(grid, rng, 2) + 1j * smooth_periodic(grid, rng, 2)) * sol.pair.phi
    st = DynState(sol.pair, scale * smooth_periodic(grid, rng, 2), scale * smooth_periodic(grid, rng, 2), vphi)
    return project_constraint(st, grid)


def energy_series(state, dt, t_end, grid):
    E = []
    gauss = []

    def cb(k, s):
        r = energy_report(s, grid)
        E.append(r.total)
        gauss.append((s.t, r.gauss_residual))

    E0 = energy_report(state, grid).total
    final = evolve(state, dt, int(round(t_end / dt)), grid, callback=cb)
    return E0, np.array(E), np.array(gauss), final


def test_kinetic_energy_examples():
    g = TorusGrid(32, 40, 6.0, 7.0)
    st = DynState.at_rest(vacuum(g))
    assert kinetic_energy(st, g) == 0
    c = 0.3 - 0.4j
    st = st.replace(vphi=np.full(g.shape, c))
    assert_allclose(kinetic_energy(st, g), g.area * abs(c) ** 2 / 2, rtol=1e-14)


def test_kinetic_energy_scales_quadratically(grid64):
    m = ModuliPoint((3.5 + 5j, 6.5 + 5j))
    v = [1.0, 0.0, -1.0, 0.0]
    T = [kinetic_energy(prepare_adiabatic_state(m, v, eps, grid64), grid64) for eps in (0.2, 0.1, 0.05)]
    assert_allclose(T[0] / T[1], 4.0, atol=1e-3)
    assert_allclose(T[1] / T[2], 4.0, atol=1e-3)
    assert kinetic_energy(prepare_adiabatic_state(m, v, 0.0, grid64), grid64) == 0


def test_gauss_residual_examples(grid64, rng):
    sol = solve_vortex(ModuliPoint((5 + 5j,)), grid64, 1e-12)
    assert gauss_residual(DynState.at_rest(sol.pair), grid64) == 0
    pure_gauge = DynState.at_rest(sol.pair).replace(vphi=1j * sol.pair.phi)
    assert gauss_residual(pure_gauge, grid64) > 0.1
    st = random_velocity_state(grid64, rng)
    assert gauss_residual(st, grid64) < 1e-10


def test_projection_properties(grid64, rng):
    st = random_velocity_state(grid64, rng)
    once = project_constraint(st, grid64)
    twice = project_constraint(once, grid64)
    for a, b in [(once.va1, twice.va1), (once.va2, twice.va2), (once.vphi, twice.vphi)]:
        assert_allclose(a, b, atol=1e-12)
    # a satisfying state is unchanged
    assert_allclose(once.vphi, st.vphi, atol=1e-12)


def test_static_vortex_is_stationary(grid64):
    sol = solve_vortex(ModuliPoint((3 + 3j, 6 + 7j)), grid64, 1e-12)
    st = DynState.at_rest(sol.pair)
    out = evolve(st, grid64.h / 4, 100, grid64)
    check_flux(out.pair, grid64)
    assert_allclose(np.abs(out.pair.phi), np.abs(sol.pair.phi), atol=1e-8)
    b0 = magnetic_field(sol.pair.a1, sol.pair.a2, 2, grid64)
    b1 = magnetic_field(out.pair.a1, out.pair.a2, 2, grid64)
    assert_allclose(b1, b0, atol=1e-8)


def test_energy_report_examples(grid64):
    r = energy_report(DynState.at_rest(vacuum(grid64), t=1.5), grid64)
    assert (r.T, r.U, r.total, r.gauss_residual, r.t) == (0, 0, 0, 0, 1.5)
    sol = solve_vortex(ModuliPoint((2 + 2j, 6 + 5j)), grid64, 1e-12)
    r = energy_report(DynState.at_rest(sol.pair), grid64)
    assert r.T == 0 and r.gauss_residual == 0
    assert_allclose(r.U, sol.energy, rtol=1e-12)
    assert_allclose(r.total, 2 * np.pi, rtol=1e-9)


def drift_study(st, grid, t_end=4.0):
    drifts = []
    for dt in (grid.h / 4, grid.h / 8):
        E0, E, gauss, final = energy_series(st, dt, t_end, grid)
        drifts.append(abs(E[-1] - E0) / E0 / t_end)
        check_flux(final.pair, grid)
        slope = np.polyfit(gauss[:, 0], gauss[:, 1], 1)[0]
        assert abs(slope) < 1e-8
    return drifts


def test_energy_conservation_slow_motion(grid64):
    st = prepare_adiabatic_state(ModuliPoint((3.5 + 5j, 6.5 + 5j)), [1.0, 0.0, -1.0, 0.0], 0.2, grid64)
    drifts = drift_study(st, grid64)
    assert drifts[0] < 1e-6
    assert drifts[0] / drifts[1] >= 3.5


def test_energy_error_is_second_order_on_rough_data(grid64, rng):
    drifts = drift_study(random_velocity_state(grid64, rng), grid64)
    assert drifts[0] / drifts[1] >= 3.5


def test_boosted_vortex_translates(grid64):
    eps = 0.1
    st = prepare_adiabatic_state(ModuliPoint((5 + 5j,)), [1.0, 0.5], eps, grid64)
    states = run(st, grid64.h / 4, 5.0, grid64, every=32)
    v = eps * (1.0 + 0.5j)
    for s in states[1:]:
        z = locate_zeros(s.pair, grid64).zeros[0]
        moved = grid64.torus_delta(z, 5 + 5j)
        assert abs(moved - v * s.t) <= 0.02 * abs(v) * s.t
    r0, r1 = energy_report(states[0], grid64), energy_report(states[-1], grid64)
    assert r0.T > 0
    assert_allclose(r1.total, r0.total, rtol=1e-7)


def test_gauge_covariance_of_evolution(grid64, rng):
    st = random_velocity_state(grid64, rng)
    chi = smooth_periodic(grid64, rng, 2)
    moved_pair = gauge_transform(st.pair, chi, grid64)
    # static gauge transforms act on velocities by the same phase
    moved = DynState(moved_pair, st.va1, st.va2, np.exp(-1j * chi) * st.vphi)
    a = evolve(st, grid64.h / 4, 40, grid64)
    b = evolve(moved, grid64.h / 4, 40, grid64)
    assert_allclose(np.abs(b.pair.phi), np.abs(a.pair.phi), atol=1e-8)
    assert_allclose(magnetic_field(b.pair.a1, b.pair.a2, 2, grid64),
                    magnetic_field(a.pair.a1, a.pair.a2, 2, grid64), atol=1e-8)


def test_evolve_rejects_bad_input(grid64):
    sol = solve_vortex(ModuliPoint((5 + 5j,)), grid64, 1e-12)
    st = DynState.at_rest(sol.pair)
    with pytest.raises(DomainError):
        evolve(st, 2 * max_stable_dt(grid64, sol.pair), 1, grid64)
    with pytest.raises(DomainError):
        evolve(st.replace(vphi=1j * sol.pair.phi), grid64.h / 4, 1, grid64)
    with pytest.raises(DomainError):
        DynState(sol.pair, 1j * np.ones(grid64.shape), st.va2, st.vphi)


def test_trajectory_log(tmp_path, grid64):
    st = DynState.at_rest(solve_vortex(ModuliPoint((5 + 5j,)), grid64, 1e-12).pair)
    log = TrajectoryLog()
    log.record(energy_report(st, grid64), [5 + 5j])
    path = tmp_path / "t.csv"
    log.write_csv(path, 1)
    lines = path.read_text().splitlines()
    assert lines[0].split(",") == ["t", "T", "U", "total", "gauss_residual", "x1", "y1"]
    assert float(lines[1].split(",")[5]) == 5.0
