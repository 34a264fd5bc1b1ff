"""Preconditioned conjugate gradients on real grid arrays."""
from __future__ import annotations

import numpy as np

from .errors import ConvergenceError


def pcg(apply_a, b, apply_m, *, x0=None, rtol=1e-13, atol=0.0, maxiter=500):
    """Solve ``A x = b`` for symmetric positive (semi)definite ``A``.

    ``apply_a`` and ``apply_m`` act on arrays shaped like ``b``; the inner
    product is the plain sum, which matches the grid pairing up to the
    constant cell volume.
    """
    x = np.zeros_like(b) if x0 is None else x0.copy()
    r = b - apply_a(x) if x0 is not None else b.copy()
    bnorm = np.sqrt(np.vdot(b, b).real)
    target = max(rtol * bnorm, atol)
    rnorm = np.sqrt(np.vdot(r, r).real)
    if rnorm <= target:
        return x
    z = apply_m(r)
    p = z.copy()
    rz = np.vdot(r, z).real
    history = [rnorm]
    for _ in range(maxiter):
        ap = apply_a(p)
        pap = np.vdot(p, ap).real
        if pap <= 0:
            break
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        rnorm = np.sqrt(np.vdot(r, r).real)
        history.append(rnorm)
        if rnorm <= target:
            return x
        z = apply_m(r)
        rz_new = np.vdot(r, z).real
        p = z + (rz_new / rz) * p
        rz = rz_new
    if rnorm <= max(1e3 * target, 1e-11 * max(bnorm, 1.0)):
        return x
    raise ConvergenceError(f"CG stalled at residual {rnorm:.3e} (target {target:.3e})", history)
