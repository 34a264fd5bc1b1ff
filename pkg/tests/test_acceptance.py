"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run on its own with ``pytest tests/test_acceptance.py -v``. The flux check
(criterion 3) is moved to the end of the session so that it sees every
configuration stored by the other tests.
"""
import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from higgslab.adiabatic import _Tracker, adiabatic_compare, prepare_adiabatic_state
from higgslab.cli import main
from higgslab.clifford import identity_suite
from higgslab.dynamics import energy_report, evolve, kinetic_energy
from higgslab.grid import TorusGrid
from higgslab.moduli import metric_at, scattering_angle
from higgslab.sw import KahlerTorusGrid, dirac_refinement, localization_scan
from higgslab.vortex import ModuliPoint, locate_zeros, solve_vortex

from conftest import HEADON_TAU_END, HEADON_VELOCITY, HEADON_ZEROS, check_flux


def verdict(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def random_moduli(rng, d, grid, min_sep=1.5):
    while True:
        zs = [complex(rng.uniform(0, grid.lx), rng.uniform(0, grid.ly)) for _ in range(d)]
        if all(grid.distance(a, b) > min_sep for i, a in enumerate(zs) for b in zs[i + 1:]):
            return ModuliPoint(tuple(zs))


def round_trip_error(found, target, grid):
    cost = np.array([[grid.distance(a, b) for b in target.zeros] for a in found.zeros])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())


def test_criterion_01_vortex_solver(capsys, grid128):
    rng = np.random.default_rng(101)
    worst_res, worst_trip = 0.0, 0.0
    for k in range(10):
        m = random_moduli(rng, 1 + k % 3, grid128)
        sol = solve_vortex(m, grid128)
        check_flux(sol.pair, grid128)
        worst_res = max(worst_res, sol.bogomolny_residual)
        worst_trip = max(worst_trip, round_trip_error(locate_zeros(sol.pair, grid128), m, grid128))
    ok = worst_res < 1e-8 and worst_trip < grid128.h
    verdict(capsys, 1, ok, f"max residual {worst_res:.2e} (< 1e-8), max round trip {worst_trip:.2e} "
                           f"(< h = {grid128.h:.3g})")


def test_criterion_02_energy_additivity(capsys, grid128, radial_vortex):
    zeros = {1: (5 + 5j,), 2: (2.5 + 5j, 7.5 + 5j), 3: (2.5 + 2.5j, 7.5 + 2.5j, 5 + 7.5j)}
    U = {}
    for d, zs in zeros.items():
        sol = solve_vortex(ModuliPoint(zs), grid128)
        check_flux(sol.pair, grid128)
        U[d] = sol.energy
    add = max(abs(U[d] - d * U[1]) / (d * U[1]) for d in (2, 3))
    oracle = radial_vortex.energy()
    single = abs(U[1] - oracle) / oracle
    ok = add < 5e-3 and single < 1e-3
    verdict(capsys, 2, ok, f"additivity {add:.2e} (< 5e-3), U(1) vs radial oracle {single:.2e} (< 1e-3)")


@pytest.mark.run_last
def test_criterion_03_flux_quantization(capsys, flux_log, grid64):
    # configurations of our own, in case this file runs alone
    st = prepare_adiabatic_state(ModuliPoint(HEADON_ZEROS), HEADON_VELOCITY, 0.2, grid64)
    evolve(st, grid64.h / 4, 64, grid64, callback=lambda k, s: check_flux(s.pair, grid64) if k % 16 == 0 else None)
    worst = max(flux_log)
    ok = worst < 1e-10
    verdict(capsys, 3, ok, f"{len(flux_log)} stored configurations, max |flux - d| {worst:.2e} (< 1e-10)")


def test_criterion_04_dynamics_conservation(capsys, grid128):
    st = prepare_adiabatic_state(ModuliPoint(HEADON_ZEROS), HEADON_VELOCITY, 0.2, grid128)
    t_end = 4.0
    drifts, slopes = [], []
    for dt in (grid128.h / 4, grid128.h / 8):
        E0 = energy_report(st, grid128).total
        gauss = []

        def cb(k, s):
            gauss.append((s.t, energy_report(s, grid128).gauss_residual))

        final = evolve(st, dt, int(round(t_end / dt)), grid128, callback=cb)
        check_flux(final.pair, grid128)
        drifts.append(abs(energy_report(final, grid128).total - E0) / E0 / t_end)
        g = np.array(gauss)
        slopes.append(abs(np.polyfit(g[:, 0], g[:, 1], 1)[0]))
    ratio = drifts[0] / drifts[1]
    ok = drifts[0] < 1e-6 and ratio >= 3.5 and max(slopes) < 1e-8
    verdict(capsys, 4, ok, f"drift {drifts[0]:.2e}/unit time at h/4 (< 1e-6), halving ratio {ratio:.2f} "
                           f"(>= 3.5), Gauss slope {max(slopes):.2e} (< 1e-8)")


def test_criterion_05_metric(capsys, grid64):
    rng = np.random.default_rng(505)
    min_eig = np.inf
    for k in range(20):
        m = random_moduli(rng, 1 + k % 3, grid64)
        min_eig = min(min_eig, float(np.linalg.eigvalsh(metric_at(m, grid64).g).min()))
    g1 = [metric_at(ModuliPoint((z,)), grid64).g for z in (1 + 1j, 5 + 5j, 2.3 + 8.1j, 9.4 + 3.7j)]
    ref = g1[0][0, 0]
    spread = max(np.abs(g - ref * np.eye(2)).max() for g in g1) / ref
    kin = 0.0
    for d in (1, 2, 3):
        m = random_moduli(rng, d, grid64)
        v = rng.normal(size=2 * d)
        g = metric_at(m, grid64).g
        T = kinetic_energy(prepare_adiabatic_state(m, v, 1.0, grid64), grid64)
        kin = max(kin, abs(0.5 * v @ g @ v - T) / T)
    ok = min_eig > 0 and spread < 0.01 and kin < 1e-6
    verdict(capsys, 5, ok, f"min eigenvalue over 20 points {min_eig:.3g} (> 0), d=1 spread {spread:.2e} "
                           f"(< 1e-2), kinetic consistency {kin:.2e} (< 1e-6)")


def test_criterion_06_geodesic_scattering(capsys, headon_path, grid256):
    geo = scattering_angle(headon_path)
    eps = 0.05
    st = prepare_adiabatic_state(ModuliPoint(HEADON_ZEROS), HEADON_VELOCITY, eps, grid256)
    m0 = ModuliPoint(HEADON_ZEROS)
    tracker = _Tracker(grid256, m0)
    tracker.add(0.0, m0)
    dt = grid256.h / 4
    steps = int(round(HEADON_TAU_END / eps / dt))

    def cb(k, s):
        if k % 256 == 0 or k == steps:
            tracker.add(s.t, locate_zeros(s.pair, grid256))
            check_flux(s.pair, grid256)

    evolve(st, dt, steps, grid256, callback=cb)
    pde = scattering_angle(np.array([p.moduli.zeros for p in tracker.points]))
    ok = abs(geo - 90) <= 2 and abs(pde - 90) <= 5
    verdict(capsys, 6, ok, f"geodesic {geo:.2f} deg (90 +- 2), field run at eps=0.05 on 256^2 {pde:.2f} deg "
                           f"(90 +- 5)")


def test_criterion_07_adiabatic(capsys, headon_path, grid64):
    rep = adiabatic_compare(ModuliPoint(HEADON_ZEROS), np.array(HEADON_VELOCITY), [0.2, 0.1, 0.05],
                            HEADON_TAU_END, grid64, path=headon_path)
    ok = not rep.failures and rep.monotone and all(r >= 1.5 for r in rep.ratios)
    dev = ", ".join(f"{d:.3g}" for d in rep.deviations)
    rat = ", ".join(f"{r:.2f}" for r in rep.ratios)
    verdict(capsys, 7, ok, f"deviations [{dev}], ratios [{rat}] (>= 1.5){' ' + str(rep.failures) if rep.failures else ''}")


def test_criterion_08_clifford(capsys):
    worst, count = 0.0, 0
    for m in (1, 2, 3):
        errs = identity_suite(m, np.random.default_rng(800 + m), samples=20)
        worst = max(worst, max(errs.values()))
        count += len(errs)
    ok = worst < 1e-12
    verdict(capsys, 8, ok, f"{count} identity checks for m <= 3, max error {worst:.2e} (< 1e-12)")


def test_criterion_09_dirac_equivalence(capsys):
    out = dirac_refinement([16, 32, 64], np.random.default_rng(909))
    e = out["errors"]
    ratios = [a / b for a, b in zip(e, e[1:])]
    ok = all(r >= 3.5 for r in ratios)
    verdict(capsys, 9, ok, "discrepancies " + ", ".join(f"{x:.2e}" for x in e)
            + ", ratios " + ", ".join(f"{r:.2f}" for r in ratios) + " (>= 3.5)")


def test_criterion_10_sw_scan(capsys):
    kg = KahlerTorusGrid.square(16, 1.0, 256, 3.0)
    rep = localization_scan(ModuliPoint((1.5 + 1.5j,)), [4.0, 8.0, 16.0, 32.0], kg)
    r1 = max(e.residual.r1 for e in rep.entries)
    r3 = max(e.residual.r3 for e in rep.entries)
    lr2 = rep.lam_r2
    band = float(np.abs(lr2 / lr2.mean() - 1).max())
    shrink = rep.shrink_ratios
    shrink_ok = bool(np.all(np.abs(shrink / np.sqrt(2) - 1) <= 0.15))
    ok = r3 == 0.0 and r1 < 1e-6 and band <= 0.25 and shrink_ok
    verdict(capsys, 10, ok, f"r3 {r3:.1e} (== 0), r1 {r1:.2e} (< 1e-6), lambda*r2 "
                            + ", ".join(f"{v:.2e}" for v in lr2) + f" spread {band:.2f} (<= 0.25), "
                            "shrink " + ", ".join(f"{s:.4f}" for s in shrink) + " (sqrt2 +- 15%)")


def test_criterion_11_cli_determinism(capsys, tmp_path):
    runs = [
        ["solve-vortex", "n=48", "zeros=2+3i, 6+7i"],
        ["metric", "n=48", "samples=2", "max_d=2"],
        ["evolve", "n=32", "area=60", "zeros=2+3i", "velocity=1,0", "eps=0.2", "t_end=1", "every=2"],
        ["clifford-check", "m=2", "samples=5"],
        ["dirac-check", "n_list=16,24"],
    ]
    mismatched, compared = [], 0
    for args in runs:
        outs = []
        for rep in ("a", "b"):
            out = tmp_path / f"{args[0]}-{rep}"
            assert main([args[0], "--seed", "11", "--out", str(out), *args[1:]]) == 0
            outs.append(out)
        for csv in sorted(outs[0].rglob("*.csv")):
            compared += 1
            other = outs[1] / csv.relative_to(outs[0])
            if csv.read_bytes() != other.read_bytes():
                mismatched.append(str(csv.relative_to(tmp_path)))
    ok = compared > 0 and not mismatched
    verdict(capsys, 11, ok, f"{compared} CSV pairs compared, {len(mismatched)} differ {mismatched or ''}")
