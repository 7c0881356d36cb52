"""Numpy fallback for the hot path-recursion kernels.

Every arithmetic expression here mirrors the compiled kernel token for
token, and the extension is built with fp-contraction disabled, so the two
backends produce bit-identical trajectories. Tests assert that equality;
keep the evaluation order in sync when editing either file.
"""

import numpy as np

BACKEND = "python"


def fte_terminal(v0, k, theta, xi, dt, dw):
    """Terminal tilde-v of the fully truncated Euler recursion.

    Args:
        v0, k, theta, xi, dt: scalars.
        dw: (n_paths, n_steps) float64 Brownian increments.

    Returns:
        (n_paths,) float64 terminal values (may be negative).
    """
    dw = np.asarray(dw, dtype=np.float64)
    n_paths, n_steps = dw.shape
    v = np.full(n_paths, float(v0))
    for j in range(n_steps):
        vp = np.maximum(v, 0.0)
        v = v + k * (theta - vp) * dt + xi * np.sqrt(vp) * dw[:, j]
    return v


def fte_trajectory(v0, k, theta, xi, dt, dw):
    """Full tilde-v grid of the fully truncated Euler recursion.

    Returns:
        (n_paths, n_steps + 1) float64, column 0 equal to v0.
    """
    dw = np.asarray(dw, dtype=np.float64)
    n_paths, n_steps = dw.shape
    out = np.empty((n_paths, n_steps + 1), dtype=np.float64)
    out[:, 0] = float(v0)
    v = np.full(n_paths, float(v0))
    for j in range(n_steps):
        vp = np.maximum(v, 0.0)
        v = v + k * (theta - vp) * dt + xi * np.sqrt(vp) * dw[:, j]
        out[:, j + 1] = v
    return out
