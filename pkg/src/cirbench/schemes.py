"""Discretization schemes and path generation.

The workhorse is the fully truncated Euler recursion

    tilde_v(n+1) = tilde_v(n) + k*(theta - tilde_v(n)^+)*dt
                   + xi*sqrt(tilde_v(n)^+)*dW(n)

whose iterate may go negative; the value process reads it through the
positive part. Two classic fixes (partial truncation, reflection) are kept
as baselines, and the exact transition sampler provides a reference law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

import numpy as np

from . import kernels
from .model import CirParams, Grid, feller_ratio
from .rng import BROWNIAN, EXACT_TRANSITION, Stream, StreamKey


class SchemeKind(Enum):
    FULL_TRUNCATION = "fte"
    PARTIAL_TRUNCATION = "partial"
    REFLECTION = "reflection"
    EXACT = "exact"


def fte_step(tilde_v: float, dw: float, dt: float, params: CirParams) -> float:
    """One step of the fully truncated recursion (may return a negative value).

    Evaluation order matches the compiled kernel so scalar and kernel paths
    agree bitwise.
    """
    vp = tilde_v if tilde_v > 0.0 else 0.0
    return tilde_v + params.k * (params.theta - vp) * dt + params.xi * math.sqrt(vp) * dw


def interpolate_fte(tilde_v_node: float, w_increment: float, tau: float, params: CirParams) -> float:
    """Continuous extension between nodes.

    Given the iterate at the left node, the Brownian displacement
    W(t) - W(t_n) and tau = t - t_n in [0, dt], returns tilde_v(t). At
    tau = dt and w_increment = dW(n) this reproduces fte_step exactly.
    """
    if tau < 0.0:
        raise ValueError(f"tau must be non-negative, got {tau!r}")
    vp = tilde_v_node if tilde_v_node > 0.0 else 0.0
    return tilde_v_node + params.k * (params.theta - vp) * tau + params.xi * math.sqrt(vp) * w_increment


def baseline_step(kind: SchemeKind, tilde_v: float, dw: float, dt: float, params: CirParams) -> float:
    """One step of a baseline fix (partial truncation or reflection)."""
    if kind is SchemeKind.PARTIAL_TRUNCATION:
        # drift keeps the raw iterate, only the diffusion is truncated
        vp = tilde_v if tilde_v > 0.0 else 0.0
        return tilde_v + params.k * (params.theta - tilde_v) * dt + params.xi * math.sqrt(vp) * dw
    if kind is SchemeKind.REFLECTION:
        a = abs(tilde_v)
        return a + params.k * (params.theta - a) * dt + params.xi * math.sqrt(a) * dw
    raise ValueError(f"baseline_step handles baseline kinds only, got {kind!r}")


def exact_step(v, delta: float, params: CirParams, stream: Stream, size=None):
    """Sample v(t+delta) | v(t) = v from the exact transition law.

    Scaled noncentral chi-square: with c = 2k / (xi^2*(1 - e^{-k*delta})),
    d = 4*k*theta/xi^2 and lam = 2*c*v*e^{-k*delta},

        v(t+delta) = chi'^2(d, lam) / (2*c).

    `v` may be a scalar or an array (one draw per element); draws come from
    `stream`, which should sit on the EXACT_TRANSITION substream.
    """
    if not (delta > 0.0 and math.isfinite(delta)):
        raise ValueError(f"delta must be finite and strictly positive, got {delta!r}")
    arr = np.asarray(v, dtype=np.float64)
    if np.any(arr < 0.0):
        raise ValueError("state must be non-negative")
    k, xi = params.k, params.xi
    e = math.exp(-k * delta)
    c = 2.0 * k / (xi * xi * (1.0 - e))
    d = 2.0 * feller_ratio(params)
    lam = 2.0 * c * arr * e
    y = stream.noncentral_chi2(d, lam, size=size)
    out = y / (2.0 * c)
    if np.isscalar(v) and size is None:
        return float(out)
    return out


@dataclass(frozen=True)
class PathState:
    """Snapshot at one grid node: raw iterate and the value read from it."""

    node_index: int
    t: float
    tilde_v: float
    bar_v: float


@dataclass(frozen=True, eq=False)
class PathResult:
    """One simulated path on a grid.

    Attributes:
        kind: scheme that produced it.
        nodes: grid times, shape (N+1,).
        tilde: raw iterates, shape (N+1,).
        bar: value process at the nodes (non-negative), shape (N+1,).
        negative: bool mask, True where tilde <= 0.
    """

    kind: SchemeKind
    nodes: np.ndarray
    tilde: np.ndarray
    bar: np.ndarray
    negative: np.ndarray

    def state(self, n: int) -> PathState:
        return PathState(node_index=n, t=float(self.nodes[n]), tilde_v=float(self.tilde[n]), bar_v=float(self.bar[n]))

    def states(self) -> list[PathState]:
        return [self.state(n) for n in range(len(self.nodes))]


def _bar_from_tilde(kind: SchemeKind, tilde: np.ndarray) -> np.ndarray:
    if kind is SchemeKind.REFLECTION:
        # the reflected scheme stores the signed iterate; reads reflect it
        return np.abs(tilde)
    if kind is SchemeKind.EXACT:
        return tilde.copy()
    return np.maximum(tilde, 0.0)


def simulate_path(kind: SchemeKind, params: CirParams, grid: Grid, key: StreamKey, increments=None) -> PathResult:
    """Simulate one path of `kind` on `grid`.

    Randomness is fully determined by (key.seed, key.path_index): Euler-type
    schemes read Brownian increments from that path's BROWNIAN substream,
    the exact scheme reads from its EXACT_TRANSITION substream. The
    substream field of `key` itself is ignored.

    `increments` stubs the Brownian increments of an Euler-type scheme
    (length-N array); useful for forcing deterministic paths in tests.
    """
    n = grid.N
    tilde = np.empty(n + 1, dtype=np.float64)
    tilde[0] = params.v0
    if kind is SchemeKind.EXACT:
        if increments is not None:
            raise ValueError("the exact scheme does not consume Brownian increments")
        stream = Stream(replace(key, substream=EXACT_TRANSITION))
        v = params.v0
        for i in range(n):
            v = exact_step(v, grid.dt, params, stream)
            tilde[i + 1] = v
    else:
        if increments is None:
            stream = Stream(replace(key, substream=BROWNIAN))
            dw = stream.normals(n) * math.sqrt(grid.dt)
        else:
            dw = np.asarray(increments, dtype=np.float64)
            if dw.shape != (n,):
                raise ValueError(f"increments must have shape ({n},), got {dw.shape}")
        v = params.v0
        if kind is SchemeKind.FULL_TRUNCATION:
            for i in range(n):
                v = fte_step(v, float(dw[i]), grid.dt, params)
                tilde[i + 1] = v
        else:
            for i in range(n):
                v = baseline_step(kind, v, float(dw[i]), grid.dt, params)
                tilde[i + 1] = v
    bar = _bar_from_tilde(kind, tilde)
    negative = tilde <= 0.0
    return PathResult(kind=kind, nodes=grid.nodes.copy(), tilde=tilde, bar=bar, negative=negative)


@dataclass(frozen=True)
class CoupledPaths:
    """Terminal values of truncated-Euler paths driven by one Brownian path.

    coarse_terminal is bar_v(T) on an N-step grid, fine_terminal on the
    2N-step grid; reference_terminal is the bar value on the finest grid
    when the refinement factor exceeds 2, else None.
    """

    coarse_terminal: float
    fine_terminal: float
    reference_terminal: Optional[float]


def pairwise_coarsen(w: np.ndarray) -> np.ndarray:
    """Merge adjacent increments: out[:, n] = w[:, 2n] + w[:, 2n+1].

    This is the only way coarse increments are ever formed, so the coarse
    Brownian path is the fine one summed in a fixed order, exactly.
    """
    if w.ndim != 2 or w.shape[1] % 2 != 0:
        raise ValueError(f"need a 2-d matrix with an even number of columns, got shape {w.shape}")
    return w[:, 0::2] + w[:, 1::2]


def _is_power_of_two(m: int) -> bool:
    return m >= 1 and (m & (m - 1)) == 0


def coupled_terminals_from_increments(params: CirParams, n_coarse: int, refine: int, w_finest: np.ndarray):
    """Bar terminals on the N, 2N and (when refine > 2) refine*N grids.

    Args:
        n_coarse: coarse step count N.
        refine: power-of-two refinement factor >= 2.
        w_finest: (n_paths, N*refine) Brownian increments on the finest grid.

    Returns:
        (coarse, fine, reference) float64 arrays; reference is None when
        refine == 2. All three are positive parts of the terminal iterate.
    """
    if not _is_power_of_two(refine) or refine < 2:
        raise ValueError(f"refinement factor must be a power of two >= 2, got {refine!r}")
    w = np.ascontiguousarray(w_finest, dtype=np.float64)
    n_finest = n_coarse * refine
    if w.ndim != 2 or w.shape[1] != n_finest:
        raise ValueError(f"increment matrix must have {n_finest} columns, got shape {w.shape}")
    v0, k, theta, xi = params.v0, params.k, params.theta, params.xi
    reference = None
    n = n_finest
    coarse = fine = None
    while True:
        dt = params.T / n
        if n == n_finest and refine > 2:
            reference = kernels.fte_terminal(v0, k, theta, xi, dt, w)
        if n == 2 * n_coarse:
            fine = kernels.fte_terminal(v0, k, theta, xi, dt, w)
        if n == n_coarse:
            coarse = kernels.fte_terminal(v0, k, theta, xi, dt, w)
            break
        w = pairwise_coarsen(w)
        n //= 2
    coarse = np.maximum(coarse, 0.0)
    fine = np.maximum(fine, 0.0)
    if reference is not None:
        reference = np.maximum(reference, 0.0)
    return coarse, fine, reference


def simulate_coupled(params: CirParams, grid_coarse: Grid, refine: int, key: StreamKey) -> CoupledPaths:
    """Coupled terminals for one path; see coupled_terminals_from_increments.

    The finest-grid increments are drawn from the path's BROWNIAN substream
    and coarser grids aggregate them pairwise, so all levels share one
    Brownian path by construction.
    """
    n_finest = grid_coarse.N * refine
    z = Stream(replace(key, substream=BROWNIAN)).normals(n_finest)
    w = (z * math.sqrt(params.T / n_finest)).reshape(1, n_finest)
    coarse, fine, reference = coupled_terminals_from_increments(params, grid_coarse.N, refine, w)
    ref = float(reference[0]) if reference is not None else None
    return CoupledPaths(coarse_terminal=float(coarse[0]), fine_terminal=float(fine[0]), reference_terminal=ref)
