import numpy as np
import pytest
from numpy.testing import assert_allclose

from higgslab.errors import DomainError, ResolutionError
from higgslab.sw import (VACUUM_ALPHA, KahlerTorusGrid, SWFields, curvature_components,
                         dbar_adjointness, default_rep, dirac_clifford, dirac_dbar, dirac_refinement, f_02,
                         lift_scale, localization_scan, random_connection, random_section, random_smooth,
                         solve_lift_vortex,
                         spinor_norm, spinor_sub, sw_gauge_transform, sw_lambda_residual, validate_chern,
                         vortex_lift)
from higgslab.vortex import ModuliPoint, locate_zeros


@pytest.fixture(scope="module")
def small():
    return KahlerTorusGrid.square(16, 2.0, 16, 3.0)


@pytest.fixture(scope="module")
def lift_grid():
    return KahlerTorusGrid.square(16, 1.0, 192, 2.0)


def zero4():
    return np.zeros((1, 1, 1, 1))


def test_vacuum_residual_is_zero(small):
    for lam in (1.0, 7.5, 100.0):
        f = SWFields(np.full((1, 1, 1, 1), VACUUM_ALPHA), np.zeros((1, 1, 1, 1)), (zero4(),) * 4, 0, lam)
        r = sw_lambda_residual(f, small)
        assert r.r1 == 0.0 and r.r3 == 0.0
        assert r.r2 < 1e-13


def test_pulled_back_connection_has_no_02_part(small, rng):
    full = random_connection(small, 1, rng)
    # keep only the factor-2 dependence of the factor-2 components
    b = (zero4(), zero4(), full[2][:1, :1], full[3][:1, :1])
    assert np.abs(f_02(b, small, 1)).max() == 0
    f = SWFields(random_section(small, 1, rng), np.zeros((1, 1, 1, 1)), b, 1, 4.0)
    assert sw_lambda_residual(f, small).r3 == 0.0


def test_curvature_of_reference_connection(small):
    from higgslab.fields import reference_a1
    b = (zero4(), zero4(), reference_a1(small.f2, 2)[None, None], np.zeros((1, 1) + small.f2.shape))
    f = curvature_components(b, small, 2)
    assert_allclose(f[(3, 4)], -2 * np.pi * 2 / small.f2.area, atol=1e-12)
    for key in ((1, 2), (1, 3), (1, 4), (2, 3), (2, 4)):
        assert np.abs(f[key]).max() == 0


def test_dbar_adjointness(small, rng):
    for d in (0, 1, 2):
        assert dbar_adjointness(small, d, rng) < 1e-10


def test_plane_wave_eigenvalue(small):
    x1, x2, x3, x4 = small.coords()
    k = 2 * np.pi * np.array([1 / 2.0, -2 / 2.0, 1 / 3.0, 3 / 3.0])
    wave = np.exp(1j * (k[0] * x1 + k[1] * x2 + k[2] * x3 + k[3] * x4))
    b = (zero4(),) * 4
    for slot in range(4):
        spinor = [None] * 4
        spinor[slot] = wave
        twice = dirac_dbar(dirac_dbar(spinor, small, b, 0), small, b, 0)
        assert_allclose(twice[slot], np.dot(k, k) * wave, atol=1e-10)
        for other in range(4):
            if other != slot and twice[other] is not None:
                assert np.abs(twice[other]).max() < 1e-10


def test_constant_section_is_harmonic(small):
    rep = default_rep()
    spinor = [np.full((1, 1, 1, 1), 1.0 + 0.5j), None, None, np.full((1, 1, 1, 1), -2.0)]
    for out in (dirac_clifford(spinor, rep, (zero4(),) * 4, small, 0), dirac_dbar(spinor, small, (zero4(),) * 4, 0)):
        assert all(o is None or np.abs(o).max() == 0 for o in out)


def test_spectral_clifford_equals_dbar(small, rng):
    b = random_connection(small, 1, rng)
    spinor = [random_section(small, 1, rng) for _ in range(4)]
    a = dirac_clifford(spinor, default_rep(), b, small, 1, derivative="spectral")
    e = dirac_dbar(spinor, small, b, 1)
    assert spinor_norm(spinor_sub(a, e), small) < 1e-10 * spinor_norm(e, small)


def test_clifford_dirac_linear(small, rng):
    rep = default_rep()
    b = random_connection(small, 1, rng)
    u = [random_section(small, 1, rng), None, None, random_section(small, 1, rng)]
    v = [random_section(small, 1, rng), None, None, random_section(small, 1, rng)]
    c = 0.4 - 1.1j
    comb = [u[0] + c * v[0], None, None, u[3] + c * v[3]]
    lhs = dirac_clifford(comb, rep, b, small, 1)
    du, dv = dirac_clifford(u, rep, b, small, 1), dirac_clifford(v, rep, b, small, 1)
    rhs = [None if x is None else x + c * y for x, y in zip(du, dv)]
    assert spinor_norm(spinor_sub(lhs, rhs), small) < 1e-12 * spinor_norm(rhs, small)


def test_dirac_refinement_order(rng):
    out = dirac_refinement([16, 32], rng)
    assert out["adjointness"][0] < 1e-10
    assert out["errors"][0] / out["errors"][1] >= 3.5


@pytest.mark.parametrize("args, expected", [((0, 0, 1), True), ((5, 3, 1), False), ((2, 2, 1), True),
                                            ((-1, 2, 1.0), False)])
def test_validate_chern(args, expected):
    assert validate_chern(*args) is expected


def test_validate_chern_rejects_bad_class():
    with pytest.raises(DomainError):
        validate_chern(1, 2, 0.0)


def test_lift_vacuum(lift_grid):
    sol = solve_lift_vortex(ModuliPoint(()), 4.0, lift_grid)
    f = vortex_lift(sol, 4.0, lift_grid)
    assert_allclose(f.alpha, VACUUM_ALPHA, atol=1e-14)
    r = sw_lambda_residual(f, lift_grid)
    assert r.r1 < 1e-14 and r.r2 < 1e-13 and r.r3 == 0
    rep = localization_scan(ModuliPoint(()), [4.0, 8.0], lift_grid)
    assert all(e.alpha_deviation_outside < 1e-13 for e in rep.entries)


def test_lift_single_vortex(lift_grid):
    lam = 16.0
    zeros = ModuliPoint((1.0 + 1.0j,))
    sol = solve_lift_vortex(zeros, lam, lift_grid)
    f = vortex_lift(sol, lam, lift_grid)
    r = sw_lambda_residual(f, lift_grid)
    assert r.r1 < 1e-6
    assert r.r3 == 0.0
    assert np.abs(f.beta).max() == 0
    # |alpha| is at its vacuum value away from the zero
    dist = lift_grid.f2.distance(lift_grid.f2.Z, 1.0 + 1.0j)
    s = lift_scale(lam)
    outside = dist > 8 * s
    assert np.abs(f.alpha[0, 0])[outside].min() >= 0.99 * VACUUM_ALPHA
    z = locate_zeros(sol.pair, sol.grid).zeros[0] * s
    assert abs(z - (1.0 + 1.0j)) < lift_grid.f2.h


def test_lift_errors(lift_grid):
    sol = solve_lift_vortex(ModuliPoint((1 + 1j,)), 4.0, lift_grid)
    with pytest.raises(DomainError):
        vortex_lift(sol, 8.0, lift_grid)
    with pytest.raises(DomainError):
        vortex_lift(sol, 0.5, lift_grid)
    with pytest.raises(ResolutionError):
        solve_lift_vortex(ModuliPoint((1 + 1j,)), 1e4, lift_grid)
    with pytest.raises(DomainError):
        localization_scan(ModuliPoint((1 + 1j,)), [8.0, 4.0], lift_grid)


def test_residuals_gauge_invariant(rng):
    grid = KahlerTorusGrid.square(16, 1.0, 64, 1.4)
    sol = solve_lift_vortex(ModuliPoint((0.6 + 0.8j,)), 4.0, grid)
    f = vortex_lift(sol, 4.0, grid)
    # perturb off the solution so all residuals are nonzero
    pert = random_connection(grid, 0, rng, amplitude=0.2)
    b = tuple(x + y for x, y in zip(f.b, pert))
    alpha = f.alpha * (1 + 0.1 * random_section(grid, 0, rng))
    g = SWFields(alpha, 0.1 * random_section(grid, 1, rng), b, 1, 4.0)
    chi = 0.15 * random_smooth(grid, rng, modes=1, real=True)
    r0 = sw_lambda_residual(g, grid)
    r1 = sw_lambda_residual(sw_gauge_transform(g, chi, grid), grid)
    assert min(r0.r1, r0.r2, r0.r3) > 0
    for a, c in ((r0.r1, r1.r1), (r0.r2, r1.r2), (r0.r3, r1.r3)):
        assert abs(a - c) <= 1e-6 * a


def test_localization_shrinks(lift_grid):
    rep = localization_scan(ModuliPoint((1.0 + 1.0j,)), [4.0, 8.0, 16.0], lift_grid)
    assert rep.monotone
    assert_allclose(rep.shrink_ratios, np.sqrt(2), rtol=0.15)
    for e in rep.entries:
        assert e.residual.r3 == 0.0 and e.residual.r1 < 1e-6
        assert e.sup_beta == 0.0
        assert e.alpha_deviation_outside < 0.01 * VACUUM_ALPHA
