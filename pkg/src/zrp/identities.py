"""Exact identities and fitted inequalities on enumerated split systems.

A split system is a 1D box of 2L sites cut into two adjacent blocks of L
sites each, carrying the canonical measure of N particles.  Conditioned on
the block-1 count n, the measure factorizes into a product of two
canonical blocks; the count itself follows the split-count law gamma(n).

Everything here is verified by exhaustive enumeration:

* a reversibility identity moving one particle between sites, relating
  conditional expectations on adjacent count shells;
* two equivalent representations of the discrete gradient
  nu[f|n] - nu[f|n-1] as (transport + covariance) terms with the
  occupancy weight h(k) = (k+1)/c(k+1), together with the A/B split
  (A = transport part, B = covariance part, branch chosen by n vs N/2);
* a bound on the transport part A(n) by conditional Dirichlet forms of
  sqrt(f) — the forms keep every nearest-neighbor edge of the full box by
  default (restricting to within-block edges admits no finite constant:
  f = block-count + 1 has A(n) = 1 exactly while all within-block
  increments of sqrt(f) vanish);
* the entropy chain rule over the count sigma-field and the product-space
  entropy tensorization inequality;
* a covariance-by-entropy inequality with moment generating function
  bounds for the single-site functions c(eta_x) and h(eta_x), and fitted
  constants for the covariances with sum c and sum h;
* the Rothaus recentering inequality and the one-step count-ratio
  envelope constant.

Fitted constants always report the binding configuration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigError, NonConvergenceError
from .gamma import GammaDistribution, ratio_diagnostics
from .measures import canonical_site_marginal, canonical_table
from .rates import RateFunction
from .spectral import StateSpace, entropy, enumerate_states

_TINY = 1e-300


@dataclass
class SplitSystem:
    """Two adjacent 1D blocks of ``block_size`` sites with N particles."""

    rate: RateFunction
    block_size: int
    N: int
    space: StateSpace = field(repr=False)
    log_pi: np.ndarray = field(repr=False)
    n1: np.ndarray = field(repr=False)  # block-1 count per state
    loggamma: np.ndarray = field(repr=False)
    shells: list = field(repr=False)  # state indices per count
    shell_weights: list = field(repr=False)  # conditional weights per count
    logw1: np.ndarray = field(repr=False)  # block-1 canonical log-weights
    logw2: np.ndarray = field(repr=False)
    _index: dict = field(repr=False, default_factory=dict)
    _moves: dict = field(repr=False, default_factory=dict)

    @property
    def gamma(self) -> GammaDistribution:
        return GammaDistribution(
            rate=self.rate,
            v1=self.block_size,
            v2=self.block_size,
            N=self.N,
            logg=self.loggamma.copy(),
            route="enumeration",
        )

    def cond_mean(self, values: np.ndarray, n: int) -> float:
        """nu[values | block-1 count = n]."""
        idx = self.shells[n]
        return float(np.dot(self.shell_weights[n], np.asarray(values)[idx]))

    def cond_cov(self, f: np.ndarray, g: np.ndarray, n: int) -> float:
        idx = self.shells[n]
        w = self.shell_weights[n]
        fg = np.asarray(f)[idx]
        gg = np.asarray(g)[idx]
        return float(np.dot(w, fg * (gg - np.dot(w, gg))))

    def move_map(self, src: int, dst: int) -> np.ndarray:
        """Index of eta - delta_src + delta_dst per state; -1 where empty."""
        key = (src, dst)
        if key not in self._moves:
            out = np.full(self.space.size, -1, dtype=np.int64)
            mask = self.space.states[:, src] > 0
            moved = self.space.states[mask].copy()
            moved[:, src] -= 1
            moved[:, dst] += 1
            targets = [self._index[row.tobytes()] for row in moved]
            out[np.nonzero(mask)[0]] = targets
            self._moves[key] = out
        return self._moves[key]

    def product_factorization_residual(self) -> float:
        """max |log pi - log (gamma x block-product)| over all states."""
        table = canonical_table(self.rate, self.block_size, self.N)
        logZ = table.logZ[self.block_size]
        recomposed = (
            self.loggamma[self.n1]
            + self.logw1
            - logZ[self.n1]
            + self.logw2
            - logZ[self.N - self.n1]
        )
        return float(np.max(np.abs(self.log_pi - recomposed)))


def split_system(rate: RateFunction, block_size: int, N: int) -> SplitSystem:
    L = int(block_size)
    N = int(N)
    if L < 1 or N < 0:
        raise ConfigError("need block_size >= 1 and N >= 0")
    space = enumerate_states(2 * L, 1, N)
    F = rate.log_factorials(N)
    logw1 = -np.sum(F[space.states[:, :L]], axis=1)
    logw2 = -np.sum(F[space.states[:, L:]], axis=1)
    logw = logw1 + logw2
    log_pi = logw - logsumexp(logw)
    n1 = space.states[:, :L].sum(axis=1)
    shells, weights, loggamma = [], [], np.empty(N + 1)
    for n in range(N + 1):
        idx = np.nonzero(n1 == n)[0]
        shells.append(idx)
        loggamma[n] = logsumexp(log_pi[idx])
        weights.append(np.exp(log_pi[idx] - loggamma[n]))
    index = {space.states[i].tobytes(): i for i in range(space.size)}
    return SplitSystem(
        rate, L, N, space, log_pi, n1, loggamma, shells, weights, logw1, logw2, index
    )


@dataclass
class TestFunctionSet:
    """Seeded strictly positive test functions, entries in [e^-3, e^3]."""

    size: int
    count: int
    seed: int
    values: np.ndarray = field(repr=False)


def test_function_set(size: int, count: int = 50, seed: int = 0) -> TestFunctionSet:
    rng = np.random.default_rng(seed)
    values = np.exp(rng.uniform(-3.0, 3.0, size=(int(count), int(size))))
    return TestFunctionSet(int(size), int(count), int(seed), values)


def _scale(sys: SplitSystem, f: np.ndarray) -> float:
    return float(np.dot(np.exp(sys.log_pi), np.abs(f)))


def _residual(lhs: float, rhs: float, scale: float) -> float:
    return abs(lhs - rhs) / max(abs(lhs), abs(rhs), scale, _TINY)


@dataclass
class ReversibilityReport:
    lhs: float
    rhs: float
    residual: float


def verify_reversibility(
    sys: SplitSystem, f: np.ndarray, x: int, y: int, n: int
) -> ReversibilityReport:
    """One-particle transfer identity between count shells.

    nu[f 1(eta_x > 0) | n] equals the (c(eta_y)/c(eta_x + 1))-weighted
    expectation of f after moving one particle from y to x, taken on shell
    n-1 with the gamma(n-1)/gamma(n) prefactor when x is in block 1, and on
    shell n without prefactor when x is in block 2 (y in block 2 always).
    """
    L, N = sys.block_size, sys.N
    if not (1 <= n <= N):
        raise ConfigError("need 1 <= n <= N")
    if not (L <= y < 2 * L) or x == y or not (0 <= x < 2 * L):
        raise ConfigError("need y in block 2 and x != y in the box")
    f = np.asarray(f, dtype=float)
    states = sys.space.states
    lhs = sys.cond_mean(f * (states[:, x] > 0), n)
    cv = sys.rate.values(N + 1)
    move = sys.move_map(y, x)
    safe = np.where(move >= 0, move, np.arange(sys.space.size))
    integrand = cv[states[:, y]] / cv[states[:, x] + 1] * f[safe]
    if x < L:
        rhs = math.exp(sys.loggamma[n - 1] - sys.loggamma[n]) * sys.cond_mean(
            integrand, n - 1
        )
    else:
        rhs = sys.cond_mean(integrand, n)
    return ReversibilityReport(lhs, rhs, _residual(lhs, rhs, _scale(sys, f)))


def _pair_sums(sys: SplitSystem):
    """Per-state block sums of c and h over each block (cached)."""
    if not hasattr(sys, "_pair_sums_cache"):
        L, N = sys.block_size, sys.N
        cv = sys.rate.values(N)
        hv = sys.rate.h_values(N)
        s = sys.space.states
        sys._pair_sums_cache = (
            cv[s[:, :L]].sum(axis=1),  # C1
            cv[s[:, L:]].sum(axis=1),  # C2
            hv[s[:, :L]].sum(axis=1),  # H1
            hv[s[:, L:]].sum(axis=1),  # H2
        )
    return sys._pair_sums_cache


def _transport_forward(sys: SplitSystem, f: np.ndarray, n: int) -> float:
    """nu[sum_{x in B1, y in B2} h(eta_x) c(eta_y) (f(eta - d_y + d_x) - f) | n-1]."""
    L, N = sys.block_size, sys.N
    cv = sys.rate.values(N)
    hv = sys.rate.h_values(N)
    states = sys.space.states
    idx = sys.shells[n - 1]
    w = sys.shell_weights[n - 1]
    total = 0.0
    for x in range(L):
        hx = hv[states[idx, x]]
        for y in range(L, 2 * L):
            move = sys.move_map(y, x)[idx]
            safe = np.where(move >= 0, move, idx)
            total += float(np.dot(w, hx * cv[states[idx, y]] * (f[safe] - f[idx])))
    return total


def _transport_mirrored(sys: SplitSystem, f: np.ndarray, n: int) -> float:
    """nu[sum_{x in B1, y in B2} h(eta_y) c(eta_x) (f(eta - d_x + d_y) - f) | n]."""
    L, N = sys.block_size, sys.N
    cv = sys.rate.values(N)
    hv = sys.rate.h_values(N)
    states = sys.space.states
    idx = sys.shells[n]
    w = sys.shell_weights[n]
    total = 0.0
    for x in range(L):
        cx = cv[states[idx, x]]
        for y in range(L, 2 * L):
            move = sys.move_map(x, y)[idx]
            safe = np.where(move >= 0, move, idx)
            total += float(np.dot(w, hv[states[idx, y]] * cx * (f[safe] - f[idx])))
    return total


@dataclass
class GradientReport:
    lhs: float
    rhs_forward: float
    rhs_mirrored: float
    residual_forward: float
    residual_mirrored: float

    @property
    def residual(self) -> float:
        return max(self.residual_forward, self.residual_mirrored)


def verify_gradient_representation(sys: SplitSystem, f: np.ndarray, n: int) -> GradientReport:
    """Both transport+covariance representations of nu[f|n] - nu[f|n-1].

    The forward form conditions on shell n-1 with prefactor
    gamma(n-1)/(gamma(n) n L); the mirrored form (blocks exchanged, valid
    for equal blocks by the symmetry of gamma) conditions on shell n with
    prefactor -gamma(N-n)/(gamma(N-n+1) (N-n+1) L).
    """
    L, N = sys.block_size, sys.N
    if not (1 <= n <= N):
        raise ConfigError("need 1 <= n <= N")
    f = np.asarray(f, dtype=float)
    _, C2, H1, H2 = _pair_sums(sys)
    lhs = sys.cond_mean(f, n) - sys.cond_mean(f, n - 1)
    pref_f = math.exp(sys.loggamma[n - 1] - sys.loggamma[n]) / (n * L)
    rhs_forward = pref_f * (
        _transport_forward(sys, f, n) + sys.cond_cov(f, H1 * C2, n - 1)
    )
    C1 = _pair_sums(sys)[0]
    pref_m = math.exp(sys.loggamma[N - n] - sys.loggamma[N - n + 1]) / ((N - n + 1) * L)
    rhs_mirrored = -pref_m * (
        _transport_mirrored(sys, f, n) + sys.cond_cov(f, H2 * C1, n)
    )
    scale = _scale(sys, f)
    return GradientReport(
        lhs,
        rhs_forward,
        rhs_mirrored,
        _residual(lhs, rhs_forward, scale),
        _residual(lhs, rhs_mirrored, scale),
    )


@dataclass
class ABReport:
    A: float
    B: float
    branch: str  # "upper" for n >= N/2, "lower" below
    residual: float


def _A_term(sys: SplitSystem, f: np.ndarray, n: int) -> tuple[float, str]:
    L, N = sys.block_size, sys.N
    if 2 * n >= N:
        pref = math.exp(sys.loggamma[n - 1] - sys.loggamma[n]) / (n * L)
        return pref * _transport_forward(sys, f, n), "upper"
    pref = math.exp(sys.loggamma[N - n] - sys.loggamma[N - n + 1]) / ((N - n + 1) * L)
    return -pref * _transport_mirrored(sys, f, n), "lower"


def decompose_AB(sys: SplitSystem, f: np.ndarray, n: int) -> ABReport:
    """Split the discrete gradient into transport (A) and covariance (B).

    The branch at n >= N/2 (ties included) uses the forward representation,
    the branch below uses the mirrored one; A + B equals the gradient.
    """
    L, N = sys.block_size, sys.N
    if not (1 <= n <= N):
        raise ConfigError("need 1 <= n <= N")
    f = np.asarray(f, dtype=float)
    C1, C2, H1, H2 = _pair_sums(sys)
    A, branch = _A_term(sys, f, n)
    if branch == "upper":
        pref = math.exp(sys.loggamma[n - 1] - sys.loggamma[n]) / (n * L)
        B = pref * sys.cond_cov(f, H1 * C2, n - 1)
    else:
        pref = math.exp(sys.loggamma[N - n] - sys.loggamma[N - n + 1]) / ((N - n + 1) * L)
        B = -pref * sys.cond_cov(f, H2 * C1, n)
    lhs = sys.cond_mean(f, n) - sys.cond_mean(f, n - 1)
    return ABReport(A, B, branch, _residual(lhs, A + B, _scale(sys, f)))


def _edge_pairs(sys: SplitSystem, edges: str):
    L = sys.block_size
    if edges == "all":
        return sys.space.neighbor_pairs
    if edges == "within":
        return [
            (x, y)
            for (x, y) in sys.space.neighbor_pairs
            if (x < L and y < L) or (x >= L and y >= L)
        ]
    raise ConfigError("edges must be 'all' or 'within'")


def _dirichlet_integrand(sys: SplitSystem, f: np.ndarray, edges: str) -> np.ndarray:
    """Per-state carre du champ (1/2) sum_edges c(eta_x) (grad f)^2."""
    cv = sys.rate.values(sys.N)
    states = sys.space.states
    arange = np.arange(sys.space.size)
    total = np.zeros(sys.space.size)
    for (x, y) in _edge_pairs(sys, edges):
        move = sys.move_map(x, y)
        safe = np.where(move >= 0, move, arange)
        total += cv[states[:, x]] * (f[safe] - f) ** 2
    return 0.5 * total


def conditional_dirichlet(sys: SplitSystem, f: np.ndarray, n: int, edges: str = "all") -> float:
    """Conditional expectation on shell n of the carre du champ of f.

    Averaging over the count law recovers the full-volume Dirichlet form
    when all edges are kept (tower property, test-pinned).
    """
    return sys.cond_mean(_dirichlet_integrand(sys, np.asarray(f, dtype=float), edges), n)


@dataclass
class ABoundFit:
    C_fit: float
    binding_n: int | None
    binding_f: int | None
    edges: str


def verify_A_bound(sys: SplitSystem, fs, edges: str = "all") -> ABoundFit:
    """Smallest C closing, for every f in the set and every n,

      A(n)^2 <= (C L^2 / N) (nu[f|n] v nu[f|n-1])
                x [ (gamma(n-1)/gamma(n)) E_{n-1}(sqrt f) + E_n(sqrt f) ],

    where E_m is the conditional Dirichlet form on shell m.  With
    ``edges="within"`` the cross-block edge is dropped, which loses the
    bound entirely on count-measurable functions (reported as inf).
    """
    L, N = sys.block_size, sys.N
    best, bind_n, bind_f = 0.0, None, None
    for j, f in enumerate(fs):
        f = np.asarray(f, dtype=float)
        if np.any(f <= 0):
            raise ConfigError("the transport bound needs strictly positive f")
        scale = _scale(sys, f)
        integrand = _dirichlet_integrand(sys, np.sqrt(f), edges)
        forms = [0.5 * 0.0 + sys.cond_mean(integrand, m) for m in range(N + 1)]
        for n in range(1, N + 1):
            A, _ = _A_term(sys, f, n)
            ub = max(sys.cond_mean(f, n), sys.cond_mean(f, n - 1))
            ratio = math.exp(sys.loggamma[n - 1] - sys.loggamma[n])
            denom = (L * L / N) * ub * (ratio * forms[n - 1] + forms[n])
            if denom <= 0.0:
                cand = 0.0 if A * A <= (1e-13 * scale) ** 2 else math.inf
            else:
                cand = A * A / denom
            if cand > best:
                best, bind_n, bind_f = cand, n, j
    return ABoundFit(best, bind_n, bind_f, edges)


@dataclass
class TensorizationReport:
    identity_residual: float
    inequality_gap: float
    conditional_term: float
    count_term: float


def _block_groups(sys: SplitSystem):
    """States grouped by the frozen complementary block configuration."""
    if not hasattr(sys, "_groups_cache"):
        L = sys.block_size

        def group_by(cols):
            seen = {}
            for i, row in enumerate(sys.space.states[:, cols]):
                seen.setdefault(row.tobytes(), []).append(i)
            return [np.asarray(v) for v in seen.values()]

        sys._groups_cache = (group_by(slice(L, None)), group_by(slice(None, L)))
    return sys._groups_cache


def entropy_tensorization(sys: SplitSystem, f: np.ndarray) -> TensorizationReport:
    """Entropy chain rule over the count sigma-field, and the product-space
    tensorization bound for the conditional term.

    identity: Ent(f) = sum_n gamma(n) Ent_n(f) + Ent_gamma(nu[f|.])
    inequality: sum_n gamma(n) Ent_n(f) <= nu[Ent_{block1}(f) + Ent_{block2}(f)]
    """
    f = np.asarray(f, dtype=float)
    if np.any(f < 0):
        raise ConfigError("entropy terms need nonnegative f")
    ent_full = entropy(sys.log_pi, f)
    cond = sum(
        math.exp(sys.loggamma[n]) * entropy(sys.log_pi[sys.shells[n]], f[sys.shells[n]])
        for n in range(sys.N + 1)
    )
    means = np.array([sys.cond_mean(f, n) for n in range(sys.N + 1)])
    count_term = entropy(sys.loggamma, means)
    scale = max(ent_full, cond + count_term, _scale(sys, f), _TINY)
    identity_residual = abs(ent_full - cond - count_term) / scale
    rhs = 0.0
    groups1, groups2 = _block_groups(sys)
    for idx in groups1:  # block-2 configuration frozen: block-1 entropy
        mass = math.exp(logsumexp(sys.log_pi[idx]))
        rhs += mass * entropy(sys.logw1[idx], f[idx])
    for idx in groups2:
        mass = math.exp(logsumexp(sys.log_pi[idx]))
        rhs += mass * entropy(sys.logw2[idx], f[idx])
    return TensorizationReport(identity_residual, rhs - cond, cond, count_term)


@dataclass
class EntropyInequalityReport:
    slack: float
    t: float
    lhs: float
    rhs: float
    t_star: float
    rhs_min: float


def entropy_inequality(
    weights: np.ndarray,
    f: np.ndarray,
    g: np.ndarray,
    t: float = 1.0,
    t_grid: np.ndarray | None = None,
) -> EntropyInequalityReport:
    """Covariance-by-entropy bound on a finite probability space:

      |cov(f, g)| <= (mean f / t) log( mgf(t) v mgf(-t) ) + Ent(f)/t,

    with mgf(t) the moment generating function of g - mean g.  Returns the
    slack at the given t and the minimizer t* of the right side over a
    log-spaced grid.
    """
    if t <= 0:
        raise ConfigError("need t > 0")
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    f = np.asarray(f, dtype=float)
    if np.any(f < 0):
        raise ConfigError("need f >= 0")
    g = np.asarray(g, dtype=float)
    logw = np.log(np.maximum(w, _TINY))
    mean_f = float(np.dot(w, f))
    mean_g = float(np.dot(w, g))
    ent = entropy(logw, f)
    lhs = abs(float(np.dot(w, f * (g - mean_g))))

    def rhs_at(tt: float) -> float:
        log_mgf = max(
            float(logsumexp(logw + tt * (g - mean_g))),
            float(logsumexp(logw - tt * (g - mean_g))),
        )
        return (mean_f * log_mgf + ent) / tt

    if t_grid is None:
        t_grid = np.exp(np.linspace(math.log(1e-3), math.log(1e3), 121))
    rhs = rhs_at(float(t))
    rhs_all = [rhs_at(float(tt)) for tt in t_grid]
    i = int(np.argmin(rhs_all))
    return EntropyInequalityReport(
        rhs - lhs, float(t), lhs, rhs, float(t_grid[i]), float(rhs_all[i])
    )


@dataclass
class MgfFit:
    A_c: float
    A_h: float
    t_grid: np.ndarray = field(repr=False)
    binding_c: tuple | None = None
    binding_h: tuple | None = None


def mgf_bounds(
    rate: RateFunction,
    volume: int,
    N_range,
    t_grid: np.ndarray | None = None,
) -> MgfFit:
    """Fitted constants for single-site moment generating function bounds.

    On each canonical system the site marginal is exchangeable, so the
    expectations reduce to sums against the single-site marginal.  Two
    displays are fitted over t in [-1, 1]:

      mgf of c(eta_x):      <= exp(A_c N t^2)        (A_c by direct max)
      mgf of N h(eta_x):    <= A_h exp(A_h (N t^2 + sqrt(N) |t|))
                                                     (A_h by bisection)
    """
    if t_grid is None:
        pos = np.logspace(-3, 0, 25)
        t_grid = np.concatenate([-pos[::-1], [0.0], pos])
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(np.abs(t_grid) > 1.0):
        raise ConfigError("the displays are fitted on t in [-1, 1]")
    per_N = []
    for N in N_range:
        N = int(N)
        marg = canonical_site_marginal(canonical_table(rate, volume, N), N)
        cv = rate.values(N)
        hv = rate.h_values(N)
        mean_c = float(np.dot(marg.p, cv))
        mean_h = float(np.dot(marg.p, hv))
        per_N.append((N, marg.logp, cv - mean_c, hv - mean_h))
    A_c, bind_c = 0.0, None
    for N, logp, dc, _ in per_N:
        for t in t_grid:
            if t == 0.0:
                continue
            val = float(logsumexp(logp + t * dc)) / (N * t * t)
            if val > A_c:
                A_c, bind_c = val, (N, float(t))

    def h_slack(A: float):
        worst, where = math.inf, None
        logA = math.log(A)
        for N, logp, _, dh in per_N:
            for t in t_grid:
                lhs = float(logsumexp(logp + t * N * dh))
                s = logA + A * (N * t * t + math.sqrt(N) * abs(t)) - lhs
                if s < worst:
                    worst, where = s, (N, float(t))
        return worst, where

    lo, hi = 1e-8, 1.0
    while h_slack(hi)[0] < 0.0:
        hi *= 2.0
        if hi > 1e15:
            raise NonConvergenceError("no finite mixed-exponent constant found")
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if h_slack(mid)[0] >= 0.0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-12 * hi:
            break
    _, bind_h = h_slack(hi)
    return MgfFit(A_c, hi, t_grid, bind_c, bind_h)


@dataclass
class CovarianceFit:
    C_rate: float
    C_h: float
    max_rate_cov: float
    binding_rate: tuple | None = None
    binding_h: tuple | None = None


def covariance_bounds(
    rate: RateFunction,
    volume: int,
    N_range,
    f_count: int = 40,
    seed: int = 0,
) -> CovarianceFit:
    """Fitted constants for the two covariance displays on a single block:

      cov(f, sum c)^2 <= C_rate  N     mean(f) Ent(f)
      cov(f, sum h)^2 <= C_h    (1/N)  mean(f) (mean(f) + Ent(f))

    Covariances are exact enumerations; f sets are seeded log-uniform.
    For c(k) = lambda k the first left side vanishes identically
    (sum c = lambda N almost surely); ``max_rate_cov`` reports the largest
    absolute covariance seen so the degeneracy is observable.
    """
    rng = np.random.default_rng(seed)
    C_rate, C_h, max_cov = 0.0, 0.0, 0.0
    bind_rate, bind_h = None, None
    for N in N_range:
        N = int(N)
        space = enumerate_states(volume, 1, N)
        F = rate.log_factorials(N)
        logw = -np.sum(F[space.states], axis=1)
        log_pi = logw - logsumexp(logw)
        pi = np.exp(log_pi)
        S_c = rate.values(N)[space.states].sum(axis=1)
        S_h = rate.h_values(N)[space.states].sum(axis=1)
        dc = S_c - float(np.dot(pi, S_c))
        dh = S_h - float(np.dot(pi, S_h))
        for j in range(f_count):
            f = np.exp(rng.uniform(-3.0, 3.0, size=space.size))
            mean_f = float(np.dot(pi, f))
            ent = entropy(log_pi, f)
            cov_c = float(np.dot(pi, f * dc))
            cov_h = float(np.dot(pi, f * dh))
            max_cov = max(max_cov, abs(cov_c))
            if ent > 0.0:
                cand = cov_c * cov_c / (N * mean_f * ent)
                if cand > C_rate:
                    C_rate, bind_rate = cand, (N, j)
            cand = cov_h * cov_h * N / (mean_f * (mean_f + ent))
            if cand > C_h:
                C_h, bind_h = cand, (N, j)
    return CovarianceFit(C_rate, C_h, max_cov, bind_rate, bind_h)


def rothaus_check(weights: np.ndarray, f: np.ndarray) -> float:
    """Slack of Ent(f) <= Ent((sqrt f - mean sqrt f)^2) + 2 Var(sqrt f)."""
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    f = np.asarray(f, dtype=float)
    if np.any(f < 0):
        raise ConfigError("need f >= 0")
    logw = np.log(np.maximum(w, _TINY))
    sf = np.sqrt(f)
    mean_sf = float(np.dot(w, sf))
    fbar = (sf - mean_sf) ** 2
    var = float(np.dot(w, fbar))
    return entropy(logw, fbar) + 2.0 * var - entropy(logw, f)


def count_ratio_constant(g: GammaDistribution) -> float:
    """Smallest C with n/(C (N-n+1)) <= gamma(n-1)/gamma(n) <= C n/(N-n+1)."""
    return ratio_diagnostics(g).A0_inverse


_SUITE_ALIASES = {
    "all": (
        "reversibility",
        "gradient",
        "decomposition",
        "abound",
        "tensorization",
        "entropy_inequality",
        "rothaus",
        "mgf",
        "covariance",
        "ratio",
    ),
    "entropy": ("tensorization", "entropy_inequality", "rothaus"),
}


def run_identity_suite(
    rate: RateFunction,
    L: int,
    N: int,
    f_count: int = 50,
    seed: int = 0,
    suites=("all",),
) -> list:
    """Run the selected checks on one split system; JSON-ready reports.

    Identity-type checks report ``max_residual`` (relative, vs the scale of
    f); inequality-type checks report the violation magnitude as
    ``max_residual`` or a ``fitted_constant`` with its binding case.
    """
    wanted: list = []
    for s in suites:
        for name in _SUITE_ALIASES.get(s, (s,)):
            if name not in wanted:
                wanted.append(name)
    sys_ = split_system(rate, L, N)
    fs = test_function_set(sys_.space.size, count=f_count, seed=seed).values
    reports = []

    if "reversibility" in wanted:
        worst, case, count = 0.0, None, 0
        for j, f in enumerate(fs):
            for n in range(1, N + 1):
                for x in range(2 * L):
                    for y in range(L, 2 * L):
                        if x == y:
                            continue
                        rep = verify_reversibility(sys_, f, x, y, n)
                        count += 1
                        if rep.residual > worst:
                            worst, case = rep.residual, {"f": j, "n": n, "x": x, "y": y}
        reports.append(
            {"check": "reversibility", "instances": count, "max_residual": worst, "binding_case": case}
        )

    if "gradient" in wanted:
        worst, case, count = 0.0, None, 0
        for j, f in enumerate(fs):
            for n in range(1, N + 1):
                rep = verify_gradient_representation(sys_, f, n)
                count += 1
                if rep.residual > worst:
                    worst, case = rep.residual, {"f": j, "n": n}
        reports.append(
            {"check": "gradient", "instances": count, "max_residual": worst, "binding_case": case}
        )

    if "decomposition" in wanted:
        worst, case, count = 0.0, None, 0
        for j, f in enumerate(fs):
            for n in range(1, N + 1):
                rep = decompose_AB(sys_, f, n)
                count += 1
                if rep.residual > worst:
                    worst, case = rep.residual, {"f": j, "n": n, "branch": rep.branch}
        reports.append(
            {"check": "decomposition", "instances": count, "max_residual": worst, "binding_case": case}
        )

    if "abound" in wanted:
        fit = verify_A_bound(sys_, fs)
        reports.append(
            {
                "check": "abound",
                "instances": len(fs) * N,
                "fitted_constant": fit.C_fit,
                "binding_case": {"f": fit.binding_f, "n": fit.binding_n, "edges": fit.edges},
            }
        )

    if "tensorization" in wanted:
        worst, min_gap, case, count = 0.0, math.inf, None, 0
        for j, f in enumerate(fs):
            rep = entropy_tensorization(sys_, f)
            count += 1
            viol = max(rep.identity_residual, max(0.0, -rep.inequality_gap))
            min_gap = min(min_gap, rep.inequality_gap)
            if viol > worst:
                worst, case = viol, {"f": j}
        reports.append(
            {
                "check": "tensorization",
                "instances": count,
                "max_residual": worst,
                "min_gap": min_gap,
                "binding_case": case,
            }
        )

    if "entropy_inequality" in wanted:
        rng = np.random.default_rng(seed + 1)
        w = np.exp(sys_.log_pi)
        worst, case, count = 0.0, None, 0
        for j, f in enumerate(fs[: max(5, len(fs) // 4)]):
            g = rng.uniform(-2.0, 2.0, size=sys_.space.size)
            for t in (0.25, 1.0, 4.0):
                rep = entropy_inequality(w, f, g, t=t)
                count += 1
                if -rep.slack > worst:
                    worst, case = -rep.slack, {"f": j, "t": t}
        reports.append(
            {
                "check": "entropy_inequality",
                "instances": count,
                "max_residual": max(0.0, worst),
                "binding_case": case,
            }
        )

    if "rothaus" in wanted:
        w = np.exp(sys_.log_pi)
        worst, case, count = 0.0, None, 0
        for j, f in enumerate(fs):
            slack = rothaus_check(w, f)
            count += 1
            if -slack > worst:
                worst, case = -slack, {"f": j}
        reports.append(
            {
                "check": "rothaus",
                "instances": count,
                "max_residual": max(0.0, worst),
                "binding_case": case,
            }
        )

    if "mgf" in wanted:
        fit = mgf_bounds(rate, max(L, 1), range(1, N + 1))
        reports.append(
            {
                "check": "mgf",
                "instances": len(fit.t_grid) * N,
                "fitted_constant": max(fit.A_c, fit.A_h),
                "A_c": fit.A_c,
                "A_h": fit.A_h,
                "binding_case": {"c": fit.binding_c, "h": fit.binding_h},
            }
        )

    if "covariance" in wanted:
        fit = covariance_bounds(rate, max(L, 1), range(1, N + 1), f_count=f_count, seed=seed)
        reports.append(
            {
                "check": "covariance",
                "instances": f_count * N,
                "fitted_constant": max(fit.C_rate, fit.C_h),
                "C_rate": fit.C_rate,
                "C_h": fit.C_h,
                "binding_case": {"rate": fit.binding_rate, "h": fit.binding_h},
            }
        )

    if "ratio" in wanted:
        C = count_ratio_constant(sys_.gamma)
        reports.append(
            {
                "check": "ratio",
                "instances": N,
                "fitted_constant": C,
                "binding_case": {"N": N},
            }
        )

    return reports
