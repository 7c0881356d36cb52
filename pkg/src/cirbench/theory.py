"""Closed-form constants, sequences, and bounds for the truncated scheme.

Everything here is deterministic arithmetic: the threshold constant nu_bar
and its derived quantities, the alpha/c/a sequences controlling the
step-size analysis, a Hurwitz-zeta tail bound, the polynomial bound on the
probability of the iterate going negative, and the feasibility interval for
the auxiliary exponent beta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# fixed slack constant used by the negativity bound; read-only by convention
EPSILON = 0.002

_BISECT_TOL = 1e-10
_MATERIALIZE_LIMIT = 10**5
_LENGTH_CAP = 10**7


def _g(x: float, nu: float) -> float:
    return max(4.0 * x, nu) * (nu - x) / (nu * x * (nu - x - 1.0))


def _threshold(nu: float) -> float:
    try:
        e = math.exp(0.5 * nu)
    except OverflowError:
        return math.inf
    return 1.99 * math.sqrt(nu * math.pi) * e - 1.0


def nu_bar(nu: float) -> float:
    """Smallest x > 0 at which g(x) = max(4x, nu)*(nu-x)/(nu*x*(nu-x-1))
    drops below the threshold 1.99*sqrt(nu*pi)*exp(nu/2) - 1.

    Located by bisection to absolute tolerance 1e-10. The bracketing
    property g(root - 1e-8) >= threshold >= g(root + 1e-8) is verified
    explicitly rather than assumed: g is not monotone on all of (0, nu-1)
    (it blows up again at the pole x = nu-1), so the initial upper end is
    walked down until it sits inside the region where g is below threshold.
    """
    if isinstance(nu, bool) or not isinstance(nu, (int, float, np.floating)):
        raise ValueError(f"nu must be a real number, got {nu!r}")
    if not (math.isfinite(nu) and nu > 2.0):
        raise ValueError(f"nu must be finite and > 2, got {nu!r}")
    r = _threshold(nu)
    if not math.isfinite(r):
        raise ArithmeticError(f"threshold overflows float64 at nu={nu!r}; root is below resolvable range")
    lo = 1e-12
    hi = min(nu - 1.0 - 1e-9, 0.9)
    while _g(hi, nu) >= r:
        hi *= 0.5
        if hi <= lo:
            raise ArithmeticError(f"failed to bracket the threshold crossing for nu={nu!r}")
    if not _g(lo, nu) >= r:
        raise ArithmeticError(f"no crossing: g({lo}) is already below threshold for nu={nu!r}")
    while hi - lo > _BISECT_TOL:
        mid = 0.5 * (lo + hi)
        if _g(mid, nu) < r:
            hi = mid
        else:
            lo = mid
    root = 0.5 * (lo + hi)
    left = max(root - 1e-8, lo * 0.5)
    if not (_g(left, nu) >= r >= _g(root + 1e-8, nu)):
        raise ArithmeticError(f"bracketing certificate failed at the root for nu={nu!r}")
    return root


@dataclass(frozen=True)
class FellerDerived:
    """nu with its threshold constant and the derived pair (phi, eta).

    phi_nu = 1 - nu_bar/nu, eta_nu = (nu - nu_bar)*max(4*nu_bar, nu)/(nu*nu_bar).
    Always phi_nu/eta_nu = nu_bar/max(4*nu_bar, nu) <= 1/4.
    """

    nu: float
    nu_bar: float
    phi_nu: float
    eta_nu: float
    epsilon: float = EPSILON


def derived_constants(nu: float) -> FellerDerived:
    nb = nu_bar(nu)
    phi = 1.0 - nb / nu
    eta = (nu - nb) * max(4.0 * nb, nu) / (nu * nb)
    return FellerDerived(nu=float(nu), nu_bar=nb, phi_nu=phi, eta_nu=eta)


def alpha_n(k: float, T: float, N: int) -> float:
    """(1 - k*T/N)/2; requires N > k*T so the result is positive."""
    if not (k > 0.0 and math.isfinite(k)):
        raise ValueError(f"k must be finite and strictly positive, got {k!r}")
    if not (T > 0.0 and math.isfinite(T)):
        raise ValueError(f"T must be finite and strictly positive, got {T!r}")
    if isinstance(N, bool) or not isinstance(N, (int, np.integer)):
        raise ValueError(f"N must be an integer, got {N!r}")
    if N <= k * T:
        raise ValueError(f"need N > k*T (= {k * T!r}), got N={N}")
    return 0.5 * (1.0 - k * T / N)


def _check_alpha(alpha: float) -> None:
    if not (isinstance(alpha, (int, float, np.floating)) and 0.0 < alpha < 0.5):
        raise ValueError(f"alpha must lie in (0, 0.5), got {alpha!r}")


def _check_length(N: int) -> None:
    if isinstance(N, bool) or not isinstance(N, (int, np.integer)):
        raise ValueError(f"N must be an integer, got {N!r}")
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    if N > _LENGTH_CAP:
        raise ValueError(f"N is capped at {_LENGTH_CAP} elements, got {N}; iterate via iter_c for longer scans")


def iter_c(alpha: float):
    """Yield c_0, c_1, c_2, ... lazily.

    c_0 = alpha, c_1 = alpha - alpha^2, then c_{j+1} = c_j^2 + alpha - alpha^2.
    c_0 is set directly: alpha is a fixed point of the map, so iterating
    from it would never produce c_1.
    """
    _check_alpha(alpha)
    base = alpha - alpha * alpha
    yield alpha
    c = base
    while True:
        yield c
        c = c * c + base


def c_sequence(alpha: float, N: int) -> np.ndarray:
    """Materialized c_0..c_N (N+1 values). For N beyond the cap use iter_c."""
    _check_length(N)
    it = iter_c(alpha)
    out = np.empty(N + 1, dtype=np.float64)
    for j in range(N + 1):
        out[j] = next(it)
    return out


@dataclass(frozen=True, eq=False)
class ASequences:
    """a_0..a_N computed two ways that must agree.

    recursion: a_0 = 0, a_1 = 2*alpha^2/(xi^2*dt),
               a_{j+1} = 2*alpha*a_j - (1/2)*a_j^2*xi^2*dt.
    transform: a_j = 2*(alpha - c_j)/(xi^2*dt).
    """

    recursion: np.ndarray
    transform: np.ndarray


def a_sequence(alpha: float, xi: float, dt: float, N: int) -> ASequences:
    _check_alpha(alpha)
    if not (xi > 0.0 and math.isfinite(xi)):
        raise ValueError(f"xi must be finite and strictly positive, got {xi!r}")
    if not (dt > 0.0 and math.isfinite(dt)):
        raise ValueError(f"dt must be finite and strictly positive, got {dt!r}")
    _check_length(N)
    denom = xi * xi * dt
    rec = np.empty(N + 1, dtype=np.float64)
    rec[0] = 0.0
    if N >= 1:
        a = 2.0 * alpha * alpha / denom
        rec[1] = a
        for j in range(1, N):
            a = 2.0 * alpha * a - 0.5 * a * a * denom
            rec[j + 1] = a
    xform = 2.0 * (alpha - c_sequence(alpha, N)) / denom
    return ASequences(recursion=rec, transform=xform)


@dataclass(frozen=True)
class CBoundReport:
    """Result of sweeping c_j against 1 - alpha - phi/(j - 1 + eta)."""

    ok: bool
    n_checked: int
    first_violation: int | None
    alpha: float
    nu: float


def c_bound_check(nu: float, alpha: float, N: int) -> CBoundReport:
    """Verify c_j in (0, alpha) and c_j <= 1 - alpha - phi_nu/(j-1+eta_nu)
    for 1 <= j <= N; streams, so N may exceed the materialization limit
    (still capped for runtime sanity).
    """
    _check_alpha(alpha)
    _check_length(N)
    fd = derived_constants(nu)
    it = iter_c(alpha)
    next(it)  # skip c_0 = alpha; the bound applies from j = 1
    for j in range(1, N + 1):
        c = next(it)
        bound = 1.0 - alpha - fd.phi_nu / (j - 1.0 + fd.eta_nu)
        if not (0.0 < c < alpha and c <= bound):
            return CBoundReport(ok=False, n_checked=j, first_violation=j, alpha=alpha, nu=float(nu))
    return CBoundReport(ok=True, n_checked=N, first_violation=None, alpha=alpha, nu=float(nu))


@dataclass(frozen=True)
class ZetaBound:
    """Closed-form tail bound for the Hurwitz zeta value, with a
    truncated-sum estimate for comparison (estimate <= bound)."""

    bound: float
    truncated_sum: float
    terms: int


def hurwitz_zeta_upper(s: float, q: float, terms: int = 10**6) -> ZetaBound:
    """Upper bound q^{-s} + q^{1-s}/(s-1) for sum_{n>=0} (q+n)^{-s}, s > 1."""
    if not s > 1.0:
        raise ValueError(f"s must be > 1, got {s!r}")
    if not q > 0.0:
        raise ValueError(f"q must be > 0, got {q!r}")
    if terms < 1:
        raise ValueError(f"terms must be >= 1, got {terms!r}")
    bound = q**-s + q ** (1.0 - s) / (s - 1.0)
    # chunked so the default M = 1e6 does not allocate one huge array
    total = 0.0
    chunk = 262144
    for start in range(0, terms + 1, chunk):
        n = np.arange(start, min(start + chunk, terms + 1), dtype=np.float64)
        total += float(np.sum((q + n) ** -s))
    return ZetaBound(bound=bound, truncated_sum=total, terms=terms)


@dataclass(frozen=True)
class NegativityBound:
    """Polynomial bound on sup_n P(iterate at node n <= 0).

    raw is the constant times N^exponent and may exceed 1 (or overflow to
    inf) for short horizons or extreme parameters; value is raw clamped to
    [0, 1] and is the usable probability bound.
    """

    value: float
    raw: float
    exponent: float
    constant: float


def negativity_bound(params, N: int) -> NegativityBound:
    """((1+eps)e^{-nu/2}/(2 sqrt(nu pi))) (k theta T eta/v0)^{nu phi}
    exp{nu(v0/theta + kT - phi)} N^{-nu+nu_bar+1}, eps = 0.002.

    Requires nu > 2 (the bound is vacuous otherwise) and N > k*T.
    """
    from .model import feller_ratio, validate

    validate(params)
    nu = feller_ratio(params)
    if not nu > 2.0:
        raise ValueError(f"negativity bound needs nu > 2, got nu={nu!r}")
    if isinstance(N, bool) or not isinstance(N, (int, np.integer)):
        raise ValueError(f"N must be an integer, got {N!r}")
    if N <= params.k * params.T:
        raise ValueError(f"need N > k*T (= {params.k * params.T!r}), got N={N}")
    fd = derived_constants(nu)
    exponent = -nu + fd.nu_bar + 1.0
    prefactor = (1.0 + EPSILON) * math.exp(-0.5 * nu) / (2.0 * math.sqrt(nu * math.pi))
    base = params.k * params.theta * params.T * fd.eta_nu / params.v0
    constant = prefactor * base ** (nu * fd.phi_nu) * math.exp(nu * (params.v0 / params.theta + params.k * params.T - fd.phi_nu))
    raw = constant * float(N) ** exponent
    value = min(max(raw, 0.0), 1.0)
    return NegativityBound(value=value, raw=raw, exponent=exponent, constant=constant)


@dataclass(frozen=True)
class BetaInterval:
    """Open interval (lo, hi) of admissible beta values."""

    lo: float
    hi: float

    def contains(self, beta: float) -> bool:
        return self.lo < beta < self.hi


def beta_feasible_interval(nu: float, q: float) -> BetaInterval:
    """Feasible beta > 0 satisfying both
        nu > 2*beta + 1 > nu + 2q - sqrt((nu+2q-1)^2 - 4q(q-1))
    and
        2*(nu - nu_bar - 1)*(nu - beta - 1) > nu*q,
    for 2 <= q < nu - 1. Nonempty for every admissible (nu, q).
    """
    if not (isinstance(q, (int, float, np.floating)) and math.isfinite(q)):
        raise ValueError(f"q must be a finite real, got {q!r}")
    if not (isinstance(nu, (int, float, np.floating)) and math.isfinite(nu)):
        raise ValueError(f"nu must be a finite real, got {nu!r}")
    if not (2.0 <= q < nu - 1.0):
        raise ValueError(f"need 2 <= q < nu - 1, got q={q!r} at nu={nu!r}")
    nb = nu_bar(nu)
    s = math.sqrt((nu + 2.0 * q - 1.0) ** 2 - 4.0 * q * (q - 1.0))
    lo = max(0.0, 0.5 * (nu + 2.0 * q - s - 1.0))
    hi = min(0.5 * (nu - 1.0), nu - 1.0 - nu * q / (2.0 * (nu - nb - 1.0)))
    if not lo < hi:
        raise ArithmeticError(f"feasible interval came out empty for nu={nu!r}, q={q!r}: ({lo}, {hi})")
    return BetaInterval(lo=lo, hi=hi)
