"""``higgslab <command> [--config FILE] [--out DIR] [--seed N] [key=value ...]``.

The config file is INI-style: a ``[common]`` section plus one section per
command (e.g. ``[solve-vortex]``). Values from the command's section
override ``[common]``; ``key=value`` arguments override both. Lists are
comma separated; complex numbers are written ``x+iy`` or ``x+yj``.

Every run writes ``manifest.json`` (config echo, seed, versions, timings,
outputs, summary) next to its CSV tables and ``.npz`` snapshots.
"""
from __future__ import annotations

import argparse
import configparser
import json
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .errors import ConditioningError, ConvergenceError, DivergenceError, DomainError, FluxError, \
    InfeasibleError, ResolutionError, ShapeError
from .grid import TorusGrid
from .io import export_plot_csv, parse_complex, read_zeros, write_csv, write_snapshot
from .vortex import ModuliPoint

COMMANDS = ("solve-vortex", "evolve", "metric", "geodesic", "adiabatic-compare", "clifford-check",
            "dirac-check", "sw-scan")

# key -> (type, default); types: int, float, str, zeros, floats, ints
_GRID = {"n": ("int", 64), "area": ("float", 100.0), "nx": ("int", 0), "ny": ("int", 0),
         "lx": ("float", 0.0), "ly": ("float", 0.0)}
SCHEMA = {
    "solve-vortex": {**_GRID, "zeros": ("zeros", ""), "zeros_file": ("str", ""), "tol": ("float", 1e-10)},
    "evolve": {**_GRID, "zeros": ("zeros", "3+5j"), "zeros_file": ("str", ""), "velocity": ("floats", ""),
               "eps": ("float", 0.1), "dt": ("float", 0.0), "t_end": ("float", 5.0), "every": ("int", 10),
               "snapshot_every": ("int", 0)},
    "metric": {**_GRID, "zeros": ("zeros", "3+5j"), "zeros_file": ("str", ""), "chart": ("str", "position"),
               "samples": ("int", 0), "max_d": ("int", 3)},
    "geodesic": {**_GRID, "zeros": ("zeros", "3.5+5j, 6.5+5j"), "zeros_file": ("str", ""),
                 "velocity": ("floats", "1, 0, -1, 0"), "tau_end": ("float", 2.0), "dtau": ("float", 0.05)},
    "adiabatic-compare": {**_GRID, "zeros": ("zeros", "3.5+5j, 6.5+5j"), "zeros_file": ("str", ""),
                          "velocity": ("floats", "1, 0, -1, 0"), "eps_list": ("floats", "0.2, 0.1, 0.05"),
                          "tau_end": ("float", 2.0), "dtau": ("float", 0.05)},
    "clifford-check": {"m": ("int", 2), "samples": ("int", 20), "tol": ("float", 1e-12)},
    "dirac-check": {"n_list": ("ints", "16, 32"), "side1": ("float", 2.0),
                    "side2": ("float", 3.0), "degree": ("int", 1), "modes": ("int", 1)},
    "sw-scan": {"zeros": ("zeros", "1.5+1.5j"), "zeros_file": ("str", ""), "lam_list": ("floats", "4, 8, 16, 32"),
                "n1": ("int", 16), "side1": ("float", 1.0), "n2": ("int", 256), "side2": ("float", 3.0),
                "convention": ("str", "exact"), "level": ("float", 0.5)},
}


class ConfigError(ValueError):
    def __init__(self, problems):
        super().__init__("; ".join(problems))
        self.problems = list(problems)


@dataclass
class RunConfig:
    command: str
    values: dict
    out: Path
    seed: int
    raw: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def grid(self) -> TorusGrid:
        v = self.values
        nx, ny = v["nx"] or v["n"], v["ny"] or v["n"]
        if v["lx"] and v["ly"]:
            return TorusGrid(nx, ny, v["lx"], v["ly"])
        side = float(np.sqrt(v["area"]))
        return TorusGrid(nx, ny, side, side)

    def moduli(self) -> ModuliPoint:
        zs = read_zeros(self.values["zeros_file"]) if self.values.get("zeros_file") else self.values["zeros"]
        return ModuliPoint(tuple(zs))

    def echo(self) -> dict:
        out = {}
        for k, v in self.values.items():
            if isinstance(v, (list, tuple)):
                out[k] = [[z.real, z.imag] if isinstance(z, complex) else z for z in v]
            else:
                out[k] = v
        return out


def _convert(kind, text):
    text = str(text).strip()
    if kind == "int":
        return int(text)
    if kind == "float":
        return float(text)
    if kind == "str":
        return text
    items = [t.strip() for t in text.split(",") if t.strip()]
    if kind == "zeros":
        return [parse_complex(t) for t in items]
    if kind == "floats":
        return [float(t) for t in items]
    if kind == "ints":
        return [int(t) for t in items]
    raise ValueError(kind)


def load_config(command: str, config_path=None, overrides=(), out=None, seed=0) -> RunConfig:
    """Merge defaults, ``[common]``, ``[command]`` and overrides; validate everything before compute."""
    if command not in SCHEMA:
        raise ConfigError([f"unknown command {command!r}; choose from {', '.join(COMMANDS)}"])
    schema = SCHEMA[command]
    raw = {k: str(d) if not isinstance(d, str) else d for k, (_, d) in schema.items()}
    problems = []
    if config_path is not None:
        cp = configparser.ConfigParser()
        if not cp.read(config_path):
            raise ConfigError([f"cannot read config file {config_path}"])
        for section in ("common", command):
            if cp.has_section(section):
                for k, v in cp.items(section):
                    if k in schema:
                        raw[k] = v
                    elif section == command:
                        problems.append(f"[{command}] unknown key {k!r}")
    for item in overrides:
        if "=" not in item:
            problems.append(f"override {item!r} is not key=value")
            continue
        k, v = item.split("=", 1)
        k = k.strip()
        if k not in schema:
            problems.append(f"unknown key {k!r} for {command}")
            continue
        raw[k] = v
    values = {}
    for k, (kind, _) in schema.items():
        try:
            values[k] = _convert(kind, raw[k])
        except ValueError as exc:
            problems.append(f"{k}: cannot parse {raw[k]!r} ({exc})")
    if problems:
        raise ConfigError(problems)
    cfg = RunConfig(command, values, Path(out or f"runs/{command}"), int(seed), raw)
    problems = validate(cfg)
    if problems:
        raise ConfigError(problems)
    return cfg


def validate(cfg: RunConfig) -> list[str]:
    """Every violated precondition, phrased as the modules phrase them."""
    v, p = cfg.values, []
    if "n" in v:
        try:
            grid = cfg.grid()
        except (ValueError, ShapeError) as exc:
            p.append(f"grid: {exc}")
            grid = None
        if "zeros" in v:
            try:
                m = cfg.moduli()
            except (OSError, ValueError) as exc:
                p.append(f"zeros: {exc}")
                m = None
            if grid is not None and m is not None and grid.area <= 4 * np.pi * m.d:
                p.append(f"vortex: area {grid.area:.4g} <= 4*pi*d = {4 * np.pi * m.d:.4g} (no solution)")
            if m is not None and "velocity" in v and cfg.command != "evolve" and len(v["velocity"]) != 2 * m.d:
                p.append(f"velocity: need {2 * m.d} components for d={m.d}, got {len(v['velocity'])}")
            if m is not None and cfg.command == "evolve" and v["velocity"] and len(v["velocity"]) != 2 * m.d:
                p.append(f"velocity: need {2 * m.d} components for d={m.d}, got {len(v['velocity'])}")
    if cfg.command == "evolve":
        if v["t_end"] <= 0:
            p.append("evolve: t_end must be positive")
        if v["dt"] < 0:
            p.append("evolve: dt must be positive (0 selects h/4)")
        if v["every"] < 1:
            p.append("evolve: every must be >= 1")
        if v["eps"] < 0:
            p.append("evolve: eps must be nonnegative")
    if cfg.command == "metric" and v["chart"] not in ("position", "coefficient"):
        p.append(f"metric: unknown chart {v['chart']!r}")
    if cfg.command in ("geodesic", "adiabatic-compare"):
        if v["tau_end"] <= 0:
            p.append(f"{cfg.command}: tau_end must be positive")
        if v["dtau"] <= 0:
            p.append(f"{cfg.command}: dtau must be positive")
    if cfg.command == "adiabatic-compare":
        eps = v["eps_list"]
        if not eps:
            p.append("adiabatic-compare: eps_list is empty")
        if any(e <= 0 for e in eps):
            p.append("adiabatic-compare: eps values must be positive")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            p.append("adiabatic-compare: eps_list must be strictly decreasing")
    if cfg.command == "clifford-check":
        if not 1 <= v["m"] <= 6:
            p.append(f"clifford-check: m must be in 1..6, got {v['m']}")
        if v["samples"] < 0:
            p.append("clifford-check: samples must be >= 0")
    if cfg.command == "dirac-check":
        if not v["n_list"] or any(n < 16 for n in v["n_list"]):
            p.append("dirac-check: grids need at least 16 samples per side")
        if any(b <= a for a, b in zip(v["n_list"], v["n_list"][1:])):
            p.append("dirac-check: n_list must be increasing")
        if max(v["n_list"], default=0) ** 4 > 2**24:
            p.append("dirac-check: largest grid exceeds 2**24 points")
    if cfg.command == "sw-scan":
        from .sw import KahlerTorusGrid, _check_resolution
        lams = v["lam_list"]
        if any(b <= a for a, b in zip(lams, lams[1:])):
            p.append("sw-scan: lam_list must be increasing")
        if any(lam < 1 for lam in lams):
            p.append("sw-scan: vortex lifts need lambda >= 1")
        if v["convention"] not in ("exact", "area"):
            p.append(f"sw-scan: unknown convention {v['convention']!r}")
        else:
            try:
                kg = KahlerTorusGrid.square(v["n1"], v["side1"], v["n2"], v["side2"])
                for lam in lams:
                    if lam >= 1:
                        try:
                            _check_resolution(lam, kg, v["convention"])
                        except ResolutionError as exc:
                            p.append(f"sw-scan: {exc}")
            except ValueError as exc:
                p.append(f"sw-scan grid: {exc}")
    return p


# -- commands -----------------------------------------------------------------

def _cmd_solve_vortex(cfg, ctx):
    from .vortex import locate_zeros, solve_vortex
    grid, m = cfg.grid(), cfg.moduli()
    sol = solve_vortex(m, grid, cfg["tol"])
    ctx.add(write_snapshot(cfg.out / "vortex.npz", sol.pair, grid))
    ctx.add(export_plot_csv(cfg.out / "field.csv", sol.pair, grid))
    found = locate_zeros(sol.pair, grid)
    ctx.add(write_csv(cfg.out / "zeros.csv", ["x_in", "y_in", "x_found", "y_found"],
                      [[a.real, a.imag, b.real, b.imag]
                       for a, b in zip(sorted(m.reduced(grid).zeros, key=lambda z: (z.real, z.imag)),
                                       sorted(found.zeros, key=lambda z: (z.real, z.imag)))]))
    ctx.summary.update(d=m.d, energy=sol.energy, residual=sol.bogomolny_residual, iterations=sol.iterations,
                       zeros=[[z.real, z.imag] for z in found.zeros])


def _cmd_evolve(cfg, ctx):
    from .adiabatic import prepare_adiabatic_state, _Tracker
    from .dynamics import TrajectoryLog, energy_report, evolve
    from .vortex import locate_zeros
    grid, m = cfg.grid(), cfg.moduli()
    vel = cfg["velocity"] or [0.0] * (2 * m.d)
    state = prepare_adiabatic_state(m, vel, cfg["eps"], grid)
    dt = cfg["dt"] or grid.h / 4
    steps = int(round(cfg["t_end"] / dt))
    log = TrajectoryLog()
    tracker = _Tracker(grid, m)
    log.record(energy_report(state, grid), tracker.add(0.0, m).moduli.zeros)
    snaps = cfg.out / "snapshots"
    if cfg["snapshot_every"]:
        snaps.mkdir(exist_ok=True)
        ctx.add(write_snapshot(snaps / "step_000000.npz", state, grid))

    def cb(k, s):
        if k % cfg["every"] == 0 or k == steps:
            zs = tracker.add(s.t, locate_zeros(s.pair, grid)).moduli.zeros
            log.record(energy_report(s, grid), zs)
        if cfg["snapshot_every"] and k % cfg["snapshot_every"] == 0:
            ctx.add(write_snapshot(snaps / f"step_{k:06d}.npz", s, grid))

    try:
        last = evolve(state, dt, steps, grid, callback=cb)
    finally:
        log.write_csv(cfg.out / "trajectory.csv", m.d)
        ctx.add(cfg.out / "trajectory.csv")
    ctx.add(write_snapshot(cfg.out / "final.npz", last, grid))
    r0, r1 = log.rows[0], log.rows[-1]
    ctx.summary.update(steps=steps, dt=dt, energy_start=r0[3], energy_end=r1[3],
                       relative_drift=(r1[3] - r0[3]) / r0[3] if r0[3] else 0.0, gauss_residual=r1[4],
                       crossings=sum(p.crossing for p in tracker.points))


def _cmd_metric(cfg, ctx):
    from .moduli import Chart, metric_at
    grid = cfg.grid()
    rows, eig_rows = [], []
    points = [cfg.moduli()]
    if cfg["samples"]:
        rng = np.random.default_rng(cfg.seed)
        points = []
        for _ in range(cfg["samples"]):
            d = int(rng.integers(1, cfg["max_d"] + 1))
            points.append(_random_moduli(rng, d, grid))
    for k, m in enumerate(points):
        chart = Chart(cfg["chart"], complex(np.mean(m.zeros)) if cfg["chart"] == "coefficient" else 0j)
        s = metric_at(m, grid, chart=chart)
        for i in range(s.g.shape[0]):
            for j in range(s.g.shape[1]):
                rows.append([k, i, j, float(s.g[i, j])])
        eig_rows.append([k, m.d, *[float(e) for e in s.eigenvalues]])
    ctx.add(write_csv(cfg.out / "metric.csv", ["sample", "i", "j", "g_ij"], rows))
    width = max(len(r) for r in eig_rows) - 2
    ctx.add(write_csv(cfg.out / "eigenvalues.csv", ["sample", "d"] + [f"lambda{i}" for i in range(width)],
                      [r + [""] * (width + 2 - len(r)) for r in eig_rows]))
    ctx.summary.update(samples=len(points), min_eigenvalue=min(min(r[2:]) for r in eig_rows))


def _random_moduli(rng, d, grid, min_sep=3.0):
    while True:
        zs = [complex(rng.uniform(0, grid.lx), rng.uniform(0, grid.ly)) for _ in range(d)]
        if all(grid.distance(a, b) > min_sep for i, a in enumerate(zs) for b in zs[i + 1:]):
            return ModuliPoint(tuple(zs))


def _geodesic_rows(path):
    rows = []
    for p in path:
        zdot = p.chart.velocity_to_positions(p.moduli, p.coord_velocity)
        row = [p.tau, p.chart.kind]
        for z in p.moduli.zeros:
            row += [z.real, z.imag]
        row += [float(v) for v in zdot]
        row.append(p.speed2)
        rows.append(row)
    return rows


def _cmd_geodesic(cfg, ctx):
    from .moduli import geodesic, scattering_angle
    grid, m = cfg.grid(), cfg.moduli()
    try:
        path = geodesic(m, cfg["velocity"], cfg["tau_end"], grid, dtau=cfg["dtau"])
    except ConditioningError as exc:
        path = getattr(exc, "partial", None)
        if path is not None:
            _write_geodesic(cfg, ctx, path, m.d)
        raise
    _write_geodesic(cfg, ctx, path, m.d)
    sp = np.array([p.speed2 for p in path])
    ctx.summary.update(points=len(path), speed2_spread=float((sp.max() - sp.min()) / sp[0]) if sp[0] else 0.0,
                       error=path.error)
    if m.d == 2 and len(path) > 1:
        ctx.summary["scattering_angle_deg"] = scattering_angle(path)


def _write_geodesic(cfg, ctx, path, d):
    head = ["tau", "chart"] + [f"{c}{k + 1}" for k in range(d) for c in "xy"] + \
        [f"v{c}{k + 1}" for k in range(d) for c in "xy"] + ["speed2"]
    ctx.add(write_csv(cfg.out / "geodesic.csv", head, _geodesic_rows(path)))


def _cmd_adiabatic(cfg, ctx):
    from .adiabatic import adiabatic_compare
    grid, m = cfg.grid(), cfg.moduli()
    rep = adiabatic_compare(m, cfg["velocity"], cfg["eps_list"], cfg["tau_end"], grid, dtau=cfg["dtau"])
    ratios = rep.ratios + [float("nan")]
    ctx.add(write_csv(cfg.out / "adiabatic.csv", ["eps", "deviation", "ratio", "window_deviation",
                                                   "energy_partition"],
                      [[e, d, r, w, q] for e, d, r, w, q in zip(rep.eps, rep.deviations, ratios,
                                                                rep.window_deviations, rep.energy_partition)]))
    if rep.geodesic is not None:
        _write_geodesic(cfg, ctx, rep.geodesic, m.d)
    for eps, traj in rep.trajectories.items():
        rows = [[p.t] + [c for z in p.moduli.zeros for c in (z.real, z.imag)] + [int(p.crossing)] for p in traj]
        head = ["tau"] + [f"{c}{k + 1}" for k in range(m.d) for c in "xy"] + ["crossing"]
        ctx.add(write_csv(cfg.out / f"trajectory_eps{eps:g}.csv", head, rows))
    ctx.summary.update(deviations=rep.deviations, ratios=rep.ratios, collision_tau=rep.collision_tau,
                       monotone=rep.monotone, failures={str(k): v for k, v in rep.failures.items()})
    if rep.failures:
        ctx.status = "partial"


def _cmd_clifford(cfg, ctx):
    from .clifford import identity_suite
    rng = np.random.default_rng(cfg.seed)
    res = identity_suite(cfg["m"], rng, cfg["samples"])
    ok = {k: bool(v <= cfg["tol"]) for k, v in res.items()}
    ctx.add(write_csv(cfg.out / "clifford.csv", ["identity", "max_error", "pass"],
                      [[k, float(v), int(ok[k])] for k, v in res.items()]))
    ctx.summary.update(m=cfg["m"], all_pass=all(ok.values()))
    if not all(ok.values()):
        ctx.status = "fail"


def _cmd_dirac(cfg, ctx):
    from .sw import dirac_refinement
    rng = np.random.default_rng(cfg.seed)
    res = dirac_refinement(cfg["n_list"], rng, side1=cfg["side1"], side2=cfg["side2"],
                           degree=cfg["degree"], modes=cfg["modes"])
    ratios = [float("nan")] + [a / b for a, b in zip(res["errors"], res["errors"][1:])]
    ctx.add(write_csv(cfg.out / "dirac.csv", ["n", "h", "discrepancy", "ratio"],
                      [[n, h, e, r] for n, h, e, r in zip(res["n"], res["h"], res["errors"], ratios)]))
    ctx.summary.update(ratios=ratios[1:], adjointness=res["adjointness"][0])


def _cmd_sw_scan(cfg, ctx):
    from .fields import GaugePair
    from .sw import KahlerTorusGrid, localization_scan, solve_lift_vortex, vortex_lift
    kg = KahlerTorusGrid.square(cfg["n1"], cfg["side1"], cfg["n2"], cfg["side2"])
    m = cfg.moduli()
    rep = localization_scan(m, cfg["lam_list"], kg, convention=cfg["convention"], level=cfg["level"])
    rows = [[e.lam, e.residual.r1, e.residual.r2, e.residual.r3, e.contour_radius, e.sup_beta,
             e.alpha_deviation_outside] for e in rep.entries]
    ctx.add(write_csv(cfg.out / "sw_scan.csv", ["lam", "r1", "r2", "r3", "contour_radius", "sup_beta",
                                                "alpha_dev_outside"], rows))
    # fixed-z slice of the last lift, stored as a factor-2 field snapshot
    lam = cfg["lam_list"][-1]
    f = vortex_lift(solve_lift_vortex(m, lam, kg, convention=cfg["convention"]), lam, kg,
                    convention=cfg["convention"])
    sl = GaugePair(f.b[2][0, 0], f.b[3][0, 0], f.alpha[0, 0], f.degree)
    ctx.add(write_snapshot(cfg.out / f"alpha_slice_lam{lam:g}.npz", sl, kg.f2))
    ctx.summary.update(lam=list(map(float, rep.lams)), shrink_ratios=[float(r) for r in rep.shrink_ratios],
                       lam_r2=[float(v) for v in rep.lam_r2], monotone=rep.monotone,
                       vacuum_alpha=rep.vacuum_alpha, convention=rep.convention)


HANDLERS = {"solve-vortex": _cmd_solve_vortex, "evolve": _cmd_evolve, "metric": _cmd_metric,
            "geodesic": _cmd_geodesic, "adiabatic-compare": _cmd_adiabatic, "clifford-check": _cmd_clifford,
            "dirac-check": _cmd_dirac, "sw-scan": _cmd_sw_scan}


class _Context:
    def __init__(self, out: Path):
        self.out = out
        self.outputs: list[str] = []
        self.summary: dict = {}
        self.status = "ok"

    def add(self, path):
        self.outputs.append(str(Path(path).relative_to(self.out)))
        return path


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return float(x) if np.isfinite(x) else str(float(x))
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def run(cfg: RunConfig) -> int:
    """Execute a validated config; returns the exit status (0 ok, 1 compute error or failed check)."""
    cfg.out.mkdir(parents=True, exist_ok=True)
    ctx = _Context(cfg.out)
    t0 = time.perf_counter()
    error = None
    try:
        HANDLERS[cfg.command](cfg, ctx)
    except (ConvergenceError, DivergenceError, ConditioningError, DomainError, FluxError, InfeasibleError,
            ResolutionError, ShapeError) as exc:
        error = f"{type(exc).__name__}: {exc}"
        ctx.status = "error"
    manifest = {
        "command": cfg.command,
        "status": ctx.status,
        "error": error,
        "seed": cfg.seed,
        "config": cfg.echo(),
        "versions": {"higgslab": __version__, "python": platform.python_version(), "numpy": np.__version__,
                     "scipy": scipy.__version__},
        "timings": {"wall_seconds": time.perf_counter() - t0},
        "outputs": ctx.outputs,
        "summary": ctx.summary,
    }
    (cfg.out / "manifest.json").write_text(json.dumps(_jsonable(manifest), indent=2) + "\n")
    if error:
        print(f"higgslab {cfg.command}: {error}", file=sys.stderr)
    return 0 if ctx.status in ("ok",) else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="higgslab", description="Abelian Higgs vortex lab")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="INI file with [common] and per-command sections")
    ap.add_argument("--out", help="output directory (default runs/<command>)")
    ap.add_argument("--seed", type=int, default=0, help="seed for all random test data")
    ap.add_argument("overrides", nargs="*", metavar="key=value")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_intermixed_args(argv)
    try:
        cfg = load_config(args.command, args.config, args.overrides, args.out, args.seed)
    except ConfigError as exc:
        for msg in exc.problems:
            print(f"config error: {msg}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
