"""Monte Carlo harness: coupled-grid strong-error estimates, rate fits,
negativity sweeps, and moment sweeps.

Determinism contract: paths are processed in fixed blocks of 4096, each
path draws from its own keyed stream, per-block partials use compensated
summation, and partials are reduced in block order. Results are therefore
bit-identical for any thread count; threads only change wall time.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import stats as _scipy_stats

from . import kernels, theory
from .model import CirParams, feller_ratio, validate
from .rng import BROWNIAN, EXACT_TRANSITION, Stream, StreamKey
from .schemes import coupled_terminals_from_increments, exact_step

BLOCK = 4096

# one-sided 95% quantile for the Wilson score upper bound
_WILSON_Z = 1.6448536269514722


@dataclass(frozen=True)
class ErrorEstimate:
    """E[|delta|^p]^{1/p} estimate at one step count.

    std_err is the delta-method standard error of the p-th root, propagated
    from the Monte Carlo standard error of the pre-root mean.
    """

    N: int
    p: float
    value: float
    std_err: float
    n_paths: int

    def __post_init__(self) -> None:
        if not self.value >= 0.0:
            raise ValueError(f"value must be >= 0, got {self.value!r}")
        if not self.std_err >= 0.0:
            raise ValueError(f"std_err must be >= 0, got {self.std_err!r}")
        if self.n_paths < 2:
            raise ValueError(f"n_paths must be >= 2, got {self.n_paths!r}")


@dataclass(frozen=True)
class RateFit:
    """OLS fit of log2(value) against log2(N); slope is minus the empirical order."""

    slope: float
    intercept: float
    slope_std_err: float
    r_squared: float
    points: tuple


@dataclass(frozen=True)
class NegativityPoint:
    """Negativity frequencies at one step count.

    max_node_freq is the largest per-node empirical frequency of the event
    {iterate <= 0}; ever_neg_freq counts paths with at least one such node.
    Upper bounds are one-sided 95% Wilson score intervals. bound_value and
    bound_raw carry the theoretical polynomial bound when applicable
    (nu > 2 and N > k*T), else None.
    """

    N: int
    max_node_freq: float
    max_node_upper95: float
    ever_neg_freq: float
    ever_neg_upper95: float
    n_paths: int
    bound_value: Optional[float]
    bound_raw: Optional[float]


@dataclass(frozen=True)
class NegativityReport:
    params: CirParams
    points: tuple


@dataclass(frozen=True)
class MomentPoint:
    """One moment estimate: E[v_T^p] for Exact, max over grid nodes of
    E[|iterate|^p] for the truncated Euler scheme (argmax_node records
    where the max sits)."""

    scheme: str
    p: float
    N: int
    value: float
    std_err: float
    n_paths: int
    argmax_node: Optional[int]


@dataclass(frozen=True)
class MomentReport:
    params: CirParams
    points: tuple


def _check_paths(n_paths: int, minimum: int) -> int:
    if isinstance(n_paths, bool) or not isinstance(n_paths, (int, np.integer)):
        raise ValueError(f"n_paths must be an integer, got {n_paths!r}")
    if n_paths < minimum:
        raise ValueError(f"n_paths must be >= {minimum}, got {n_paths}")
    return int(n_paths)


def _check_threads(threads: int) -> int:
    if isinstance(threads, bool) or not isinstance(threads, (int, np.integer)) or threads < 1:
        raise ValueError(f"threads must be a positive integer, got {threads!r}")
    return int(threads)


def _block_ranges(n_paths: int) -> list[tuple[int, int]]:
    return [(lo, min(lo + BLOCK, n_paths)) for lo in range(0, n_paths, BLOCK)]


def _map_blocks(fn, n_paths: int, threads: int) -> list:
    """Apply fn(lo, hi) to every block; results returned in block order."""
    ranges = _block_ranges(n_paths)
    if threads <= 1 or len(ranges) == 1:
        return [fn(lo, hi) for lo, hi in ranges]
    results = [None] * len(ranges)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(fn, lo, hi) for lo, hi in ranges]
        for i, fut in enumerate(futures):
            results[i] = fut.result()
    return results


def _brownian_block(seed: int, lo: int, hi: int, n_steps: int, dt: float) -> np.ndarray:
    """(hi-lo, n_steps) increments; row i comes from path (lo+i)'s own stream."""
    z = np.empty((hi - lo, n_steps), dtype=np.float64)
    for i in range(hi - lo):
        Stream(StreamKey(seed, lo + i, BROWNIAN)).normals(n_steps, out=z[i])
    z *= math.sqrt(dt)
    return z


def _compensated_colsums(x: np.ndarray) -> np.ndarray:
    """Column sums over the path axis, fixed order, compensated.

    Rows are reduced pairwise in fixed chunks, then chunk partials are
    combined with Kahan compensation; the summation tree depends only on
    the array shape, never on thread count.
    """
    chunk = 128
    n = x.shape[0]
    total = np.zeros(x.shape[1], dtype=np.float64)
    comp = np.zeros(x.shape[1], dtype=np.float64)
    for start in range(0, n, chunk):
        part = np.sum(x[start : start + chunk], axis=0)
        y = part - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total


def _mean_se_from_block_sums(sums: Sequence[float], sqsums: Sequence[float], n: int) -> tuple[float, float]:
    s1 = math.fsum(sums)
    s2 = math.fsum(sqsums)
    mean = s1 / n
    var = max((s2 - n * mean * mean) / (n - 1), 0.0)
    return mean, math.sqrt(var / n)


def _estimate_from_mean(N: int, p: float, mean: float, se_mean: float, n_paths: int) -> ErrorEstimate:
    if mean <= 0.0:
        return ErrorEstimate(N=N, p=p, value=0.0, std_err=0.0, n_paths=n_paths)
    value = mean ** (1.0 / p)
    # d(m^{1/p})/dm = value/(p*m)
    std_err = se_mean if p == 1.0 else se_mean * value / (p * mean)
    return ErrorEstimate(N=N, p=p, value=value, std_err=std_err, n_paths=n_paths)


def _check_p(p: float) -> float:
    if not (isinstance(p, (int, float, np.floating)) and math.isfinite(p) and p >= 1.0):
        raise ValueError(f"p must be a finite real >= 1, got {p!r}")
    return float(p)


def estimate_from_abs_diffs(abs_diffs: np.ndarray, N: int, p: float) -> ErrorEstimate:
    """Reduce a vector of |delta| samples to an ErrorEstimate.

    Shared reduction core: same blocked, fixed-order summation as the full
    estimators, exposed so coupling identities (eg the degenerate N-vs-N
    comparison) can be checked through the public pipeline.
    """
    p = _check_p(p)
    d = np.asarray(abs_diffs, dtype=np.float64)
    if d.ndim != 1 or d.shape[0] < 2:
        raise ValueError(f"need a 1-d sample of length >= 2, got shape {d.shape}")
    if np.any(d < 0.0):
        raise ValueError("absolute differences must be non-negative")
    n = d.shape[0]
    sums, sqsums = [], []
    for lo, hi in _block_ranges(n):
        x = d[lo:hi] if p == 1.0 else d[lo:hi] ** p
        sums.append(math.fsum(x))
        sqsums.append(math.fsum(x * x))
    mean, se = _mean_se_from_block_sums(sums, sqsums, n)
    return _estimate_from_mean(int(N), p, mean, se, n)


def _coupled_block_stats(params, N, p_list, refine, seed, lo, hi, against_reference):
    n_finest = N * refine
    w = _brownian_block(seed, lo, hi, n_finest, params.T / n_finest)
    coarse, fine, reference = coupled_terminals_from_increments(params, N, refine, w)
    other = reference if against_reference else fine
    d = np.abs(coarse - other)
    out = []
    for p in p_list:
        x = d if p == 1.0 else d**p
        out.append((math.fsum(x), math.fsum(x * x)))
    return out


def coupled_error_table(
    params: CirParams,
    n_list: Sequence[int],
    p_list: Sequence[float],
    n_paths: int,
    seed: int,
    threads: int = 1,
    ref_multiplier: Optional[int] = None,
) -> list[ErrorEstimate]:
    """ErrorEstimates for every (N, p) pair, one coupled pass per N.

    With ref_multiplier None the comparison is the N-vs-2N proxy; otherwise
    the coarse path is compared against the N*ref_multiplier-step terminal
    on the same Brownian path. The |delta| samples at one N are shared
    across all p, so norm-ordering comparisons carry zero resampling noise.
    """
    validate(params)
    n_paths = _check_paths(n_paths, 100)
    threads = _check_threads(threads)
    p_list = [_check_p(p) for p in p_list]
    if not p_list:
        raise ValueError("p_list must not be empty")
    if ref_multiplier is None:
        refine, against_reference = 2, False
    else:
        if isinstance(ref_multiplier, bool) or not isinstance(ref_multiplier, (int, np.integer)):
            raise ValueError(f"ref_multiplier must be an integer, got {ref_multiplier!r}")
        if ref_multiplier < 8 or ref_multiplier & (ref_multiplier - 1):
            raise ValueError(f"ref_multiplier must be a power of two >= 8, got {ref_multiplier}")
        refine, against_reference = int(ref_multiplier), True
    results: list[ErrorEstimate] = []
    for N in n_list:
        if isinstance(N, bool) or not isinstance(N, (int, np.integer)) or N < 1:
            raise ValueError(f"step counts must be positive integers, got {N!r}")
        N = int(N)
        blocks = _map_blocks(
            lambda lo, hi, N=N: _coupled_block_stats(params, N, p_list, refine, seed, lo, hi, against_reference),
            n_paths,
            threads,
        )
        for j, p in enumerate(p_list):
            mean, se = _mean_se_from_block_sums([b[j][0] for b in blocks], [b[j][1] for b in blocks], n_paths)
            results.append(_estimate_from_mean(N, p, mean, se, n_paths))
    return results


def strong_error_proxy(params: CirParams, N: int, p: float, n_paths: int, seed: int, threads: int = 1) -> ErrorEstimate:
    """E[|bar_v(T; N) - bar_v(T; 2N)|^p]^{1/p} over coupled pairs."""
    return coupled_error_table(params, [N], [p], n_paths, seed, threads=threads)[0]


def strong_error_vs_reference(
    params: CirParams, N: int, ref_multiplier: int, p: float, n_paths: int, seed: int, threads: int = 1
) -> ErrorEstimate:
    """As strong_error_proxy but against the N*ref_multiplier-step terminal."""
    return coupled_error_table(params, [N], [p], n_paths, seed, threads=threads, ref_multiplier=ref_multiplier)[0]


def fit_rate(estimates: Sequence[ErrorEstimate]) -> RateFit:
    """OLS fit of log2(value) on log2(N).

    Requires at least 3 estimates with distinct N, a single common p, and
    strictly positive values (zero error has no logarithm).
    """
    if len({e.p for e in estimates}) > 1:
        raise ValueError("estimates mix different p; fit one norm at a time")
    pts = sorted((e.N, e.value) for e in estimates)
    if len({n for n, _ in pts}) < 3:
        raise ValueError("need at least 3 estimates with distinct N")
    if any(v <= 0.0 for _, v in pts):
        raise ValueError("all values must be strictly positive to take logs")
    x = np.log2([n for n, _ in pts])
    y = np.log2([v for _, v in pts])
    res = _scipy_stats.linregress(x, y)
    return RateFit(
        slope=float(res.slope),
        intercept=float(res.intercept),
        slope_std_err=float(res.stderr),
        r_squared=float(res.rvalue) ** 2,
        points=tuple(zip(x.tolist(), y.tolist())),
    )


def wilson_upper(count: int, n: int, z: float = _WILSON_Z) -> float:
    """One-sided Wilson score upper confidence bound for a binomial frequency."""
    if n < 1 or count < 0 or count > n:
        raise ValueError(f"invalid binomial data count={count!r}, n={n!r}")
    phat = count / n
    denom = 1.0 + z * z / n
    center = phat + z * z / (2.0 * n)
    radius = z * math.sqrt(phat * (1.0 - phat) / n + z * z / (4.0 * n * n))
    return min(1.0, (center + radius) / denom)


def _negativity_block(params, N, seed, lo, hi):
    w = _brownian_block(seed, lo, hi, N, params.T / N)
    traj = kernels.fte_trajectory(params.v0, params.k, params.theta, params.xi, params.T / N, w)
    neg = traj <= 0.0
    node_counts = neg.sum(axis=0, dtype=np.int64)
    ever = int(np.count_nonzero(neg.any(axis=1)))
    return node_counts, ever


def negativity_sweep(params: CirParams, n_list: Sequence[int], n_paths: int, seed: int, threads: int = 1) -> NegativityReport:
    """Per-N max-over-nodes and ever-negative frequencies for the truncated
    Euler scheme, with Wilson 95% upper bounds; attaches the theoretical
    polynomial bound where it applies (nu > 2, N > k*T)."""
    validate(params)
    n_paths = _check_paths(n_paths, 10**4)
    threads = _check_threads(threads)
    nu = feller_ratio(params)
    points = []
    for N in n_list:
        if isinstance(N, bool) or not isinstance(N, (int, np.integer)) or N < 1:
            raise ValueError(f"step counts must be positive integers, got {N!r}")
        N = int(N)
        blocks = _map_blocks(lambda lo, hi, N=N: _negativity_block(params, N, seed, lo, hi), n_paths, threads)
        node_counts = np.zeros(N + 1, dtype=np.int64)
        ever = 0
        for counts, e in blocks:
            node_counts += counts
            ever += e
        max_count = int(node_counts.max())
        bound_value = bound_raw = None
        if nu > 2.0 and N > params.k * params.T:
            b = theory.negativity_bound(params, N)
            bound_value, bound_raw = b.value, b.raw
        points.append(
            NegativityPoint(
                N=N,
                max_node_freq=max_count / n_paths,
                max_node_upper95=wilson_upper(max_count, n_paths),
                ever_neg_freq=ever / n_paths,
                ever_neg_upper95=wilson_upper(ever, n_paths),
                n_paths=n_paths,
                bound_value=bound_value,
                bound_raw=bound_raw,
            )
        )
    return NegativityReport(params=params, points=tuple(points))


def _moment_block_fte(params, N, p_list, seed, lo, hi):
    w = _brownian_block(seed, lo, hi, N, params.T / N)
    traj = np.abs(kernels.fte_trajectory(params.v0, params.k, params.theta, params.xi, params.T / N, w))
    out = []
    for p in p_list:
        x = traj if p == 1.0 else traj**p
        out.append((_compensated_colsums(x), _compensated_colsums(x * x)))
    return out


def _moment_block_exact(params, N, p_list, seed, lo, hi):
    # block-keyed stream: vectorized transitions for the whole block; the
    # block partition is fixed, so this stays deterministic under threading
    stream = Stream(StreamKey(seed, lo, EXACT_TRANSITION))
    dt = params.T / N
    v = np.full(hi - lo, params.v0, dtype=np.float64)
    for _ in range(N):
        v = exact_step(v, dt, params, stream)
    out = []
    for p in p_list:
        x = v if p == 1.0 else v**p
        out.append((math.fsum(x), math.fsum(x * x)))
    return out


def moment_sweep(
    params: CirParams,
    p_list: Sequence[float],
    n_list: Sequence[int],
    n_paths: int,
    seed: int,
    scheme,
    threads: int = 1,
) -> MomentReport:
    """Moment stability sweep.

    Exact scheme: E[v_T^p], any p > -nu (the moment blows up at p <= -nu).
    Truncated Euler: max over grid nodes of E[|iterate|^p], p >= 1.
    """
    from .schemes import SchemeKind

    validate(params)
    n_paths = _check_paths(n_paths, 100)
    threads = _check_threads(threads)
    if scheme not in (SchemeKind.FULL_TRUNCATION, SchemeKind.EXACT):
        raise ValueError(f"moment sweeps cover FULL_TRUNCATION and EXACT, got {scheme!r}")
    nu = feller_ratio(params)
    p_list = [float(p) for p in p_list]
    for p in p_list:
        if not math.isfinite(p):
            raise ValueError(f"p must be finite, got {p!r}")
        if scheme is SchemeKind.EXACT and p <= -nu:
            raise ValueError(f"p must exceed -nu = {-nu!r} for the exact scheme, got {p}")
        if scheme is SchemeKind.FULL_TRUNCATION and p < 1.0:
            raise ValueError(f"p must be >= 1 for the truncated Euler sweep, got {p}")
    points = []
    for N in n_list:
        if isinstance(N, bool) or not isinstance(N, (int, np.integer)) or N < 1:
            raise ValueError(f"step counts must be positive integers, got {N!r}")
        N = int(N)
        if scheme is SchemeKind.EXACT:
            blocks = _map_blocks(lambda lo, hi, N=N: _moment_block_exact(params, N, p_list, seed, lo, hi), n_paths, threads)
            for j, p in enumerate(p_list):
                mean, se = _mean_se_from_block_sums([b[j][0] for b in blocks], [b[j][1] for b in blocks], n_paths)
                points.append(MomentPoint(scheme="exact", p=p, N=N, value=mean, std_err=se, n_paths=n_paths, argmax_node=None))
        else:
            blocks = _map_blocks(lambda lo, hi, N=N: _moment_block_fte(params, N, p_list, seed, lo, hi), n_paths, threads)
            for j, p in enumerate(p_list):
                s1 = np.zeros(N + 1)
                s2 = np.zeros(N + 1)
                c1 = np.zeros(N + 1)
                c2 = np.zeros(N + 1)
                for b in blocks:  # Kahan across blocks, block order fixed
                    y = b[j][0] - c1
                    t = s1 + y
                    c1 = (t - s1) - y
                    s1 = t
                    y = b[j][1] - c2
                    t = s2 + y
                    c2 = (t - s2) - y
                    s2 = t
                means = s1 / n_paths
                node = int(np.argmax(means))
                var = max((float(s2[node]) - n_paths * float(means[node]) ** 2) / (n_paths - 1), 0.0)
                points.append(
                    MomentPoint(
                        scheme="fte",
                        p=p,
                        N=N,
                        value=float(means[node]),
                        std_err=math.sqrt(var / n_paths),
                        n_paths=n_paths,
                        argmax_node=node,
                    )
                )
    return MomentReport(params=params, points=tuple(points))
