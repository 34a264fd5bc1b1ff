import numpy as np
import pytest
from scipy.integrate import simpson, solve_ivp
from scipy.optimize import brentq

from higgslab.fields import GaugePair, flux_number
from higgslab.grid import TorusGrid
from higgslab.moduli import geodesic
from higgslab.vortex import ModuliPoint

HEADON_ZEROS = (3.5 + 5j, 6.5 + 5j)
HEADON_VELOCITY = (1.0, 0.0, -1.0, 0.0)
HEADON_TAU_END = 2.0
HEADON_DTAU = 0.05

# every field configuration handed to `check_flux` during the session
_FLUX_LOG: list = []


def check_flux(pair: GaugePair, grid: TorusGrid, tol: float = 1e-10) -> float:
    """Record and assert that the flux of ``pair`` is its degree."""
    n = flux_number(pair, grid)
    _FLUX_LOG.append(abs(n - pair.degree))
    assert abs(n - pair.degree) < tol, (n, pair.degree)
    return n


def pytest_collection_modifyitems(config, items):
    """Tests marked ``run_last`` go to the end of the session, in their original order."""
    last = [it for it in items if it.get_closest_marker("run_last")]
    items[:] = [it for it in items if not it.get_closest_marker("run_last")] + last


@pytest.fixture(scope="session")
def flux_log():
    return _FLUX_LOG


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def grid64():
    return TorusGrid.square(64, 100.0)


@pytest.fixture(scope="session")
def grid128():
    return TorusGrid.square(128, 100.0)


@pytest.fixture(scope="session")
def grid256():
    return TorusGrid.square(256, 100.0)


@pytest.fixture(scope="session")
def headon_path(grid64):
    """Head-on d = 2 geodesic on the 64^2 area-100 torus (computed once, a few minutes)."""
    return geodesic(ModuliPoint(HEADON_ZEROS), np.array(HEADON_VELOCITY), HEADON_TAU_END, grid64,
                    dtau=HEADON_DTAU)


def smooth_periodic(grid: TorusGrid, rng, modes: int = 3, amplitude: float = 1.0) -> np.ndarray:
    """Real trigonometric polynomial on ``grid`` with random low modes."""
    out = np.zeros(grid.shape)
    X, Y = grid.X, grid.Y
    for kx in range(-modes, modes + 1):
        for ky in range(-modes, modes + 1):
            ph = 2 * np.pi * (kx * X / grid.lx + ky * Y / grid.ly)
            c = rng.normal(size=2) / (1 + kx * kx + ky * ky)
            out += c[0] * np.cos(ph) + c[1] * np.sin(ph)
    return amplitude * out


class RadialVortex:
    """Unit vortex on the plane from shooting on the radial Bogomolny system.

    With ``phi = f(r) e^{i theta}`` and ``a_theta = a(r)`` the first-order
    equations read ``f' = f (1 - a) / r`` and ``a' = r (1 - f^2) / 2``.
    """

    def __init__(self, r_max: float = 14.0):
        self.r_max = r_max
        self.c = brentq(self._miss, 0.3, 1.0, xtol=1e-15, rtol=1e-15)
        self.sol = solve_ivp(self._rhs, (self.R0, self.r_max), self._start(self.c), rtol=1e-12, atol=1e-14,
                             dense_output=True)

    R0 = 1e-6

    def _start(self, c):
        return [c * self.R0, self.R0**2 / 4]

    @staticmethod
    def _rhs(r, y):
        f, a = y
        return [f * (1 - a) / r, r * (1 - f * f) / 2]

    def _miss(self, c):
        """Positive if ``f`` reaches 1 first (slope too large), negative if ``a`` does."""
        def f_hits(r, y):
            return y[0] - 1.0

        def a_hits(r, y):
            return y[1] - 1.0

        f_hits.terminal = a_hits.terminal = True
        sol = solve_ivp(self._rhs, (self.R0, 60.0), self._start(c), rtol=1e-12, atol=1e-14,
                        events=(f_hits, a_hits))
        f, a = sol.y[:, -1]
        if sol.t_events[0].size:
            return 1.0 - a
        return f - 1.0

    def f(self, r):
        r = np.asarray(r, float)
        return self.sol.sol(np.clip(r, self.R0, self.r_max))[0]

    def energy(self, n: int = 20001) -> float:
        """``2 pi int [ b^2/2 + (f'^2 + f^2 (1-a)^2 / r^2)/2 + (1 - f^2)^2 / 8 ] r dr``."""
        r = np.linspace(self.R0, self.r_max, n)
        f, a = self.sol.sol(r)
        fp = f * (1 - a) / r
        b = (1 - f * f) / 2
        dens = 0.5 * b**2 + 0.5 * (fp**2 + (f * (1 - a) / r) ** 2) + 0.125 * (1 - f * f) ** 2
        return float(2 * np.pi * simpson(dens * r, x=r))


@pytest.fixture(scope="session")
def radial_vortex():
    return RadialVortex()
