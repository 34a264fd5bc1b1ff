import numpy as np
import pytest
from numpy.testing import assert_allclose

from higgslab.adiabatic import prepare_adiabatic_state
from higgslab.dynamics import kinetic_energy
from higgslab.grid import TorusGrid
from higgslab.moduli import (POSITIONS, Chart, geodesic, kinetic_pairing, metric_at, scattering_angle,
                             tangent_solution)
from higgslab.vortex import ModuliPoint

from conftest import HEADON_TAU_END


def test_tangent_single_vortex(grid64):
    z0 = 4 + 6j
    t = tangent_solution(ModuliPoint((z0,)), [1.0, 0.0], grid64)
    assert t.orthogonality_residual < 1e-8
    r = grid64.distance(grid64.Z, z0)
    w = np.abs(t.dphi) ** 2
    assert w[r < 4].sum() > 0.99 * w.sum()
    assert np.abs(t.dphi).max() > 0.1


def test_tangent_linearity(grid64):
    m = ModuliPoint((3 + 4j, 7 + 6j))
    zero = tangent_solution(m, np.zeros(4), grid64)
    assert np.abs(zero.dphi).max() == 0 and np.abs(zero.da1).max() == 0
    v = np.array([0.3, -1.2, 0.5, 0.8])
    t1 = tangent_solution(m, v, grid64)
    t2 = tangent_solution(m, -2.5 * v, grid64)
    assert_allclose(t2.dphi, -2.5 * t1.dphi, atol=1e-12)
    assert_allclose(t2.da2, -2.5 * t1.da2, atol=1e-12)


def test_metric_single_vortex_constant(grid64):
    gs = [metric_at(ModuliPoint((z,)), grid64).g for z in (0j, 2.1 + 7.3j, 5 + 5j, 8.8 + 0.4j, 3.3 + 3.9j)]
    m = gs[0][0, 0]
    assert m > 0
    for g in gs:
        assert_allclose(g, m * np.eye(2), rtol=0, atol=0.01 * m)
    # the translation metric of a unit vortex is its energy
    assert_allclose(m, np.pi, rtol=1e-3)


def test_metric_block_diagonal_when_separated():
    g = TorusGrid.square(128, 24.0**2)
    single = metric_at(ModuliPoint((6 + 12j,)), g).g[0, 0]
    pair = metric_at(ModuliPoint((6 + 12j, 15 + 12j)), g).g
    assert_allclose(pair, single * np.eye(4), rtol=0, atol=0.01 * single)


def test_metric_symmetric_and_permutation_invariant(grid64):
    m = ModuliPoint((2 + 3j, 7 + 6j, 4 + 8j))
    g = metric_at(m, grid64).g
    assert np.abs(g - g.T).max() / np.abs(g).max() < 1e-8
    perm = [1, 2, 0]
    gp = metric_at(ModuliPoint(tuple(m.zeros[k] for k in perm)), grid64).g
    idx = np.array([[2 * k, 2 * k + 1] for k in perm]).ravel()
    assert_allclose(gp, g[np.ix_(idx, idx)], atol=1e-12 * np.abs(g).max())


def test_kinetic_consistency(grid64, rng):
    for d in (1, 2, 3):
        m = ModuliPoint(tuple(complex(*rng.uniform(0, 10, 2)) for _ in range(d)))
        v = rng.normal(size=2 * d)
        g = metric_at(m, grid64).g
        T = kinetic_energy(prepare_adiabatic_state(m, v, 1.0, grid64), grid64)
        assert abs(0.5 * v @ g @ v - T) / T < 1e-6


def test_kinetic_pairing_matches_metric(grid64):
    m = ModuliPoint((3 + 4j, 7 + 6j))
    ta = tangent_solution(m, [1, 0, 0, 0], grid64)
    tb = tangent_solution(m, [0, 0, 0, 1], grid64)
    g = metric_at(m, grid64).g
    assert_allclose(kinetic_pairing((ta.da1, ta.da2, ta.dphi), (tb.da1, tb.da2, tb.dphi), grid64), g[0, 3],
                    atol=1e-10)


def test_coefficient_chart_round_trip():
    m = ModuliPoint((1 + 2j, -0.5 + 1j, 2 - 1j))
    ch = Chart("coefficient", 0.3 + 0.2j)
    back = ch.moduli(ch.coords(m), like=m)
    assert_allclose(back.zeros, m.zeros, atol=1e-12)
    zdot = np.array([0.1, 0.2, -0.3, 0.4, 0.5, -0.6])
    assert_allclose(ch.velocity_to_positions(m, ch.velocity_from_positions(m, zdot)), zdot, atol=1e-12)
    assert_allclose(POSITIONS.coords(m), m.to_real())


def test_geodesic_at_rest(grid64):
    path = geodesic(ModuliPoint((3 + 4j, 7 + 6j)), np.zeros(4), 0.2, grid64)
    assert len(path) == 5
    for p in path:
        assert p.moduli.zeros == path[0].moduli.zeros


def test_geodesic_single_vortex_straight(grid64):
    v = np.array([0.6, -0.8])
    path = geodesic(ModuliPoint((5 + 5j,)), v, 0.3, grid64, dtau=0.1)
    for p in path:
        assert_allclose(p.moduli.zeros[0], 5 + 5j + p.tau * (0.6 - 0.8j), atol=1e-8)
        assert_allclose(p.speed2, path[0].speed2, rtol=1e-6)


@pytest.mark.slow
def test_headon_scattering_is_ninety_degrees(headon_path):
    assert headon_path.error is None
    assert headon_path.taus[-1] == pytest.approx(HEADON_TAU_END)
    assert abs(scattering_angle(headon_path) - 90.0) < 2.0
    # symmetric collision: centre of mass stays put
    com = headon_path.positions().mean(axis=1)
    assert_allclose(com, 5 + 5j, atol=1e-6)


@pytest.mark.slow
def test_headon_speed_conserved(headon_path):
    s = np.array([p.speed2 for p in headon_path if p.tau <= 1.0 + 1e-9])
    assert np.abs(s / s[0] - 1).max() < 1e-4
