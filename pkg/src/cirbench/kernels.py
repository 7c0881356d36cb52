"""Kernel backend selection.

The compiled extension is preferred when it built; otherwise the numpy
fallback takes over with identical semantics. `backends()` exposes whatever
is importable so tests and the benchmark can compare them directly.
"""

from __future__ import annotations

import numpy as np

from . import _fte_py

try:
    from . import _fte_cy as _active
except ImportError:
    _active = _fte_py


def backend_name() -> str:
    return _active.BACKEND


def backends() -> dict:
    """Importable kernel modules by name."""
    found = {"python": _fte_py}
    if _active is not _fte_py:
        found[_active.BACKEND] = _active
    return found


def _as_increment_matrix(dw) -> np.ndarray:
    dw = np.ascontiguousarray(dw, dtype=np.float64)
    if dw.ndim != 2:
        raise ValueError(f"increments must be 2-d (n_paths, n_steps), got ndim={dw.ndim}")
    return dw


def fte_terminal(v0: float, k: float, theta: float, xi: float, dt: float, dw) -> np.ndarray:
    """Terminal tilde-v for a matrix of paths; dispatches to the active backend."""
    return _active.fte_terminal(float(v0), float(k), float(theta), float(xi), float(dt), _as_increment_matrix(dw))


def fte_trajectory(v0: float, k: float, theta: float, xi: float, dt: float, dw) -> np.ndarray:
    """Full tilde-v grid for a matrix of paths; dispatches to the active backend."""
    return _active.fte_trajectory(float(v0), float(k), float(theta), float(xi), float(dt), _as_increment_matrix(dw))
