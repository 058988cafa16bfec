"""RK4 time stepping with a compiled core and a numpy fallback.

The compiled kernel is used when it imports; set ODEBLOWUP_PURE=1 to force
the pure-Python path.  ``BACKEND`` names the active implementation.
"""

from __future__ import annotations

import os

import numpy as np

LINEAR, CUBIC, POWER = 0, 1, 2


def remainder(x, kind: int, p: float, c: float) -> np.ndarray:
    """N(x) = |c+x|^(p-1)(c+x) - c^p - p c^(p-1) x, written to avoid cancellation."""
    x = np.asarray(x, dtype=float)
    if kind == CUBIC:
        return x * x * (x + 3.0 * c)
    y = x / c
    out = np.empty_like(x)
    pos = 1.0 + y > 0.0
    with np.errstate(invalid="ignore", divide="ignore"):
        out[pos] = c ** p * (np.expm1(p * np.log1p(y[pos])) - p * y[pos])
    s = c + x[~pos]
    out[~pos] = np.abs(s) ** (p - 1.0) * s - c ** p - p * c ** (p - 1.0) * x[~pos]
    return out


def rk4_march_py(A, u, dt, nsteps, n_first, p=0.0, c=1.0, kind=LINEAR, left=None, right=None):
    """Reference implementation of the compiled kernel (same signature, in place)."""
    A = np.asarray(A)
    m = u.shape[0]
    if A.shape != (m, m):
        raise ValueError("matrix and state sizes differ")
    if left is not None and (len(left) != m or len(right) != m):
        raise ValueError("filter vectors have the wrong size")

    def rhs(y):
        out = A @ y
        if kind:
            out[n_first:2 * n_first] += remainder(y[:n_first], kind, p, c)
        return out

    y = u.copy()
    for _ in range(int(nsteps)):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * dt * k1)
        k3 = rhs(y + 0.5 * dt * k2)
        k4 = rhs(y + dt * k3)
        y += dt / 6.0 * (k1 + 2.0 * (k2 + k3) + k4)
        if left is not None:
            y -= right * (left @ y)
    u[:] = y


def _select():
    if os.environ.get("ODEBLOWUP_PURE", "").strip() not in ("", "0"):
        return rk4_march_py, "python"
    try:
        from ._kernels import rk4_march
    except ImportError:
        return rk4_march_py, "python"
    return rk4_march, "compiled"


rk4_march, BACKEND = _select()
