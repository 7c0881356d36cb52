"""Model parameters, time grid, and closed-form conditional moments."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

_FIELDS = ("v0", "k", "theta", "xi", "T")


class BoundaryClass(Enum):
    """Behaviour of the process at the origin."""

    INACCESSIBLE = "inaccessible"
    ACCESSIBLE = "accessible"


@dataclass(frozen=True)
class CirParams:
    """Parameters of dv = k*(theta - v) dt + xi*sqrt(v) dW on [0, T].

    Attributes:
        v0: initial value, > 0.
        k: mean-reversion speed, > 0.
        theta: long-run level, > 0.
        xi: volatility of volatility, > 0.
        T: time horizon, > 0.

    Construction does not validate; call :func:`validate` where bad input
    is possible (CLI, config files).
    """

    v0: float
    k: float
    theta: float
    xi: float
    T: float


def validate(params: CirParams) -> CirParams:
    """Check all five parameters are finite and strictly positive.

    Returns the params unchanged so it can be used inline. Raises
    ValueError naming the offending field.
    """
    for name in _FIELDS:
        value = getattr(params, name)
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ValueError(f"{name} must be a real number, got {value!r}")
        if not math.isfinite(value) or value <= 0.0:
            raise ValueError(f"{name} must be finite and strictly positive, got {value!r}")
    return params


def feller_ratio(params: CirParams) -> float:
    """2*k*theta / xi**2. The origin is unreachable iff this is >= 1."""
    return 2.0 * params.k * params.theta / (params.xi * params.xi)


def boundary_class(params: CirParams) -> BoundaryClass:
    if feller_ratio(params) >= 1.0:
        return BoundaryClass.INACCESSIBLE
    return BoundaryClass.ACCESSIBLE


@dataclass(frozen=True, eq=False)
class Grid:
    """Equidistant grid 0 = t_0 < t_1 < ... < t_N = T with t_n = n*(T/N)."""

    N: int
    dt: float
    nodes: np.ndarray


def make_grid(T: float, N: int) -> Grid:
    if isinstance(N, bool) or not isinstance(N, (int, np.integer)):
        raise ValueError(f"step count must be an integer, got {N!r}")
    if N < 1:
        raise ValueError(f"step count must be >= 1, got {N}")
    if not (isinstance(T, (int, float)) and math.isfinite(T) and T > 0.0):
        raise ValueError(f"horizon must be finite and strictly positive, got {T!r}")
    dt = float(T) / int(N)
    # n*dt, not cumulative addition: node values must not drift with N
    nodes = np.arange(int(N) + 1, dtype=np.float64) * dt
    return Grid(N=int(N), dt=dt, nodes=nodes)


def conditional_moments(params: CirParams, v: float, delta: float) -> tuple[float, float]:
    """Mean and variance of v_{t+delta} given v_t = v, in closed form.

    mean = theta + (v - theta)*exp(-k*delta)
    var  = v*(xi^2/k)*e*(1 - e) + theta*(xi^2/(2k))*(1 - e)^2, e = exp(-k*delta)

    Serves as an oracle for the exact transition sampler; never used inside
    a scheme step.
    """
    if not (v >= 0.0 and math.isfinite(v)):
        raise ValueError(f"state must be finite and non-negative, got {v!r}")
    if not (delta > 0.0 and math.isfinite(delta)):
        raise ValueError(f"delta must be finite and strictly positive, got {delta!r}")
    k, theta, xi = params.k, params.theta, params.xi
    e = math.exp(-k * delta)
    mean = theta + (v - theta) * e
    var = v * (xi * xi / k) * e * (1.0 - e) + theta * (xi * xi / (2.0 * k)) * (1.0 - e) ** 2
    return mean, var
