"""Equilibrium occupation laws: grand-canonical, count, and canonical.

The single-site grand-canonical law at fugacity alpha puts mass
alpha^k / (Z(alpha) c(k)!) on occupation k, with c(k)! = c(1)...c(k).
``solve_alpha`` inverts the strictly increasing map alpha -> mean occupation
to hit a prescribed density rho.  For c(k) = k this is the Poisson family
(alpha = rho, sigma^2 = rho).

The law of the total count in a box of v independent sites is the v-fold
convolution of the single-site law (``count_distribution``); all
convolutions are exact log-space logsumexp sums, so tails stay meaningful
down to exp(-700) and beyond.

The canonical partition function Z_v^N = sum over occupations summing to N
of prod 1/c(eta_x)! is tabulated by the volume recursion
Z_v^N = sum_k Z_1^k Z_{v-1}^{N-k} in log space (``canonical_table``).  The
count law and the table are linked by the identity
p_v^rho(n) = alpha^n Z_v^n / Z(alpha)^v, which the test-suite pins; it is
why conditioned count distributions do not depend on the density used to
build them.

``canonical_site_marginal`` gives the occupation law of one site under the
conditioned (canonical) measure, and ``verify_Z_ratio`` checks the exact
identity Z_v^{N-1} / Z_v^N = E_canonical[c(eta_x)].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigError, NonConvergenceError, TailMassError
from .rates import RateFunction

_TERM_EPS_LOG = np.log(1e-17)  # series truncation: next term below 1e-17 of the sum


@dataclass
class GrandCanonical:
    """Single-site grand-canonical law solved to a target density."""

    rate: RateFunction
    rho: float
    alpha: float
    logZ: float
    sigma2: float
    trunc_K: int
    tail_tol: float

    def log_pmf(self, kmax: int) -> np.ndarray:
        """log mass of occupations 0..kmax (exact, not renormalized)."""
        F = self.rate.log_factorials(kmax)
        ks = np.arange(kmax + 1)
        if self.alpha == 0.0:
            out = np.full(kmax + 1, -np.inf)
            out[0] = 0.0
            return out
        return ks * np.log(self.alpha) - F - self.logZ


@dataclass
class CountDistribution:
    """Law of a particle count; either a box-count law or a conditioned one."""

    kind: str  # "grand_canonical_count" | "canonical_split"
    volume: int
    logp: np.ndarray
    rho: float | None = None
    N: int | None = None

    @property
    def p(self) -> np.ndarray:
        return np.exp(self.logp)

    @property
    def cap(self) -> int:
        return len(self.logp) - 1

    def mean(self) -> float:
        return float(np.sum(np.arange(self.cap + 1) * self.p))

    def normalization_residual(self) -> float:
        return abs(float(logsumexp(self.logp)))


@dataclass
class CanonicalTable:
    """log Z_v^n for sub-volumes v = 1..volume and counts n = 0..N_max."""

    rate: RateFunction
    volume: int
    N_max: int
    logZ: np.ndarray = field(repr=False)  # shape (volume+1, N_max+1); row 0 is the base case

    def to_json_dict(self) -> dict:
        return {
            "volume": self.volume,
            "N_max": self.N_max,
            "logZ": [[float(x) for x in row] for row in self.logZ[1:]],
        }


def _site_series(rate: RateFunction, alpha: float, min_terms: int = 8):
    """Stream the series Z(alpha) = sum_k alpha^k / c(k)! and its moments.

    Returns (logZ, mean, m2, K).  Terms are unimodal in k (log-increment
    log(alpha) - log c(k+1) is decreasing), so we stop once past the mode
    and the next term falls below 1e-17 of the running sum.
    """
    if alpha < 0:
        raise ConfigError("fugacity must be nonnegative")
    if alpha == 0.0:
        return 0.0, 0.0, 0.0, 0
    log_alpha = np.log(alpha)
    logs = [0.0]
    logS = 0.0
    k = 0
    while True:
        k += 1
        lk = k * log_alpha - rate.log_c_factorial(k)
        logs.append(lk)
        logS = np.logaddexp(logS, lk)
        past_mode = lk < logs[-2]
        if k >= min_terms and past_mode and lk < logS + _TERM_EPS_LOG:
            break
        if k > 10_000_000:
            raise NonConvergenceError("single-site series did not truncate")
    larr = np.array(logs)
    logZ = float(logsumexp(larr))
    w = np.exp(larr - logZ)
    ks = np.arange(len(larr))
    mean = float(np.sum(ks * w))
    m2 = float(np.sum(ks * ks * w))
    return logZ, mean, m2, k


def solve_alpha(
    rate: RateFunction,
    rho: float,
    tol: float = 1e-12,
    max_iter: int = 200,
) -> GrandCanonical:
    """Find the fugacity whose single-site mean equals rho (relative tol).

    The mean is strictly increasing in alpha, so bisection on a bracket
    found by geometric expansion always converges.  For linear rates
    c(k) = lambda k the solution is alpha = lambda rho with sigma^2 = rho.
    """
    if rho < 0:
        raise ConfigError("density must be nonnegative")
    if rho == 0.0:
        return GrandCanonical(rate, 0.0, 0.0, 0.0, 0.0, 0, 0.0)
    A0 = rate.A0 if rate.A0 is not None else 2.0
    lo, hi = 0.0, max(A0 * rho * 1.5, 1e-3)
    for _ in range(200):
        _, mean_hi, _, _ = _site_series(rate, hi)
        if mean_hi >= rho:
            break
        hi *= 2.0
    else:
        raise NonConvergenceError("could not bracket the fugacity")
    # Bisect past the documented tolerance down to the float64 floor; the
    # extra digits keep downstream sup-norm comparisons at the 1e-13 level.
    best_alpha, best_resid = hi, abs(mean_hi - rho)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        _, mean_mid, _, _ = _site_series(rate, mid)
        resid = abs(mean_mid - rho)
        if resid < best_resid:
            best_alpha, best_resid = mid, resid
        if resid <= 1e-15 * rho or (hi - lo) <= 4e-16 * mid:
            break
        if mean_mid < rho:
            lo = mid
        else:
            hi = mid
    alpha = best_alpha
    if best_resid > tol * rho:
        raise NonConvergenceError(
            f"fugacity bisection stalled at |mean - rho| = {best_resid:.3e} (target {tol:g} rho)"
        )
    logZ, mean, m2, K = _site_series(rate, alpha)
    sigma2 = m2 - mean * mean
    return GrandCanonical(rate, rho, float(alpha), logZ, float(sigma2), K, 1e-17)


def alpha_derivative(rate: RateFunction, rho: float) -> float:
    """d alpha / d rho = alpha(rho) / sigma^2(rho)."""
    gc = solve_alpha(rate, rho)
    return gc.alpha / gc.sigma2


def _log_conv(a: np.ndarray, b: np.ndarray, cap: int) -> np.ndarray:
    """Log-space convolution out[s] = logsumexp_k a[k] + b[s-k], s <= cap."""
    out = np.empty(cap + 1)
    la, lb = len(a), len(b)
    for s in range(cap + 1):
        k0 = max(0, s - lb + 1)
        k1 = min(s, la - 1)
        if k0 > k1:
            out[s] = -np.inf
            continue
        out[s] = logsumexp(a[k0 : k1 + 1] + b[s - k0 : s - k1 - 1 if s - k1 > 0 else None : -1])
    return out


def _log_self_conv_pow(base: np.ndarray, v: int, cap: int) -> np.ndarray:
    """v-fold log-space convolution of ``base`` by binary doubling."""
    result = None
    power = base
    k = v
    while k > 0:
        if k & 1:
            result = power.copy() if result is None else _log_conv(result, power, cap)
        k >>= 1
        if k:
            power = _log_conv(power, power, cap)
    return result[: cap + 1]


def default_count_cap(rho: float, sigma2: float, volume: int) -> int:
    mean = rho * volume
    sd = np.sqrt(max(sigma2 * volume, 0.0))
    return int(np.ceil(mean + 16.0 * sd + 40.0))


def count_distribution(
    rate: RateFunction,
    rho: float,
    volume: int,
    cap: int | None = None,
    tail_tol: float = 1e-14,
    linear: bool = False,
) -> CountDistribution:
    """Law of the total count in ``volume`` independent sites at density rho.

    The support is 0..cap; cap defaults to mean + 16 sd + 40.  An explicit
    cap is honored as given: if the v-fold convolution leaves more than
    ``tail_tol`` of mass beyond it, a TailMassError is raised.  The result
    is renormalized exactly in log space.

    ``linear=True`` switches to a linear-space np.convolve pipeline (meant
    for absolute-error sup-norm sweeps where speed matters and sub-1e-300
    tails do not).
    """
    volume = int(volume)
    if volume < 1:
        raise ConfigError("volume must be at least 1")
    gc = solve_alpha(rate, rho)
    if cap is None:
        cap = default_count_cap(rho, gc.sigma2, volume)
    cap = int(cap)
    site = gc.log_pmf(cap)
    if linear:
        p1 = np.exp(site)
        out = p1
        for _ in range(volume - 1):
            out = np.convolve(out, p1)[: cap + 1]
        total = float(out.sum())
        if 1.0 - total > tail_tol:
            raise TailMassError(f"count cap {cap} leaves tail mass {1.0 - total:.3e}")
        with np.errstate(divide="ignore"):
            logp = np.where(out > 0.0, np.log(np.maximum(out, 1e-320)), -np.inf)
        logp = logp - logsumexp(logp)
    else:
        logp = _log_self_conv_pow(site, volume, cap)
        total = float(logsumexp(logp))
        missing = -np.expm1(min(total, 0.0))
        if total < 0 and missing > tail_tol:
            raise TailMassError(f"count cap {cap} leaves tail mass {missing:.3e}")
        logp = logp - total
    return CountDistribution("grand_canonical_count", volume, logp, rho=rho, N=None)


def canonical_table(rate: RateFunction, volume: int, N_max: int) -> CanonicalTable:
    """Tabulate log Z_v^n for v <= volume, n <= N_max by the volume recursion."""
    volume, N_max = int(volume), int(N_max)
    if volume < 1 or N_max < 0:
        raise ConfigError("canonical table needs volume >= 1 and N_max >= 0")
    F = rate.log_factorials(N_max)
    logZ = np.full((volume + 1, N_max + 1), -np.inf)
    logZ[0, 0] = 0.0
    logZ[1, :] = -F
    neg_F = -F
    for v in range(2, volume + 1):
        prev = logZ[v - 1]
        for n in range(N_max + 1):
            logZ[v, n] = logsumexp(neg_F[: n + 1] + prev[n::-1])
    return CanonicalTable(rate, volume, N_max, logZ)


def canonical_site_marginal(table: CanonicalTable, N: int) -> CountDistribution:
    """Occupation law of one site under the canonical measure at count N.

    P[eta_x = k] = Z_{v-1}^{N-k} / (c(k)! Z_v^N); for v = 1 this is the
    point mass at N, and for c(k) = k it is Binomial(N, 1/v).
    """
    N = int(N)
    if N > table.N_max:
        raise ConfigError(f"canonical table only covers counts up to {table.N_max}")
    v = table.volume
    F = table.rate.log_factorials(N)
    ks = np.arange(N + 1)
    logp = -F[ks] + table.logZ[v - 1, N - ks] - table.logZ[v, N]
    resid = abs(float(logsumexp(logp)))
    if resid > 1e-10:
        raise TailMassError(f"canonical site marginal off by {resid:.3e} in normalization")
    logp = logp - logsumexp(logp)
    return CountDistribution("canonical_split", v, logp, rho=None, N=N)


def verify_Z_ratio(table: CanonicalTable, N: int) -> float:
    """Relative residual of Z_v^{N-1}/Z_v^N = E_canonical[c(eta_x)]."""
    N = int(N)
    if N < 1:
        raise ConfigError("count must be positive for the partition ratio")
    lhs = float(np.exp(table.logZ[table.volume, N - 1] - table.logZ[table.volume, N]))
    marg = canonical_site_marginal(table, N)
    c_vals = table.rate.values(N)
    rhs = float(np.sum(marg.p * c_vals[: N + 1]))
    return abs(lhs - rhs) / abs(lhs)


def count_logpmf_from_table(gc: GrandCanonical, table: CanonicalTable, volume: int | None = None) -> np.ndarray:
    """Count log-law via the fugacity identity log p(n) = n log alpha - v log Z + log Z_v^n."""
    v = table.volume if volume is None else int(volume)
    ns = np.arange(table.N_max + 1)
    return ns * np.log(gc.alpha) - v * gc.logZ + table.logZ[v, :]
