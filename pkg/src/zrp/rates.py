"""Jump-rate functions for zero-range dynamics.

A rate function c maps occupation numbers to jump rates: c(0) = 0 and
c(k) > 0 for k >= 1.  Two structural conditions make the analysis of the
N-particle dynamics uniform in N:

* bounded increments: a1 = sup_k |c(k+1) - c(k)| < infinity;
* uniform increase at distance k0: c(k) - c(j) >= a2 > 0 whenever
  k >= j + k0.

Together these squeeze c between linear envelopes,
A0^{-1} k <= c(k) <= A0 k, which is the only quantitative input the rest of
the package needs.  The pure-exclusion rate c(k) = 1{k > 0} satisfies the
first condition but not the second and is rejected by ``build_family``.

Downstream code consumes c almost exclusively through the log prefix sums
F(k) = log c(1) + ... + log c(k) (``log_c_factorial``), which keep the
products c(1)...c(k) representable for arbitrary k, and through
h(n) = (n+1)/c(n+1), which is bounded by A0.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

FAMILIES = ("linear", "scaled_linear", "parity_perturbed", "user_table")

_USER_TABLE_K0_MAX = 32


@dataclass
class ConditionReport:
    """Measured structural constants of a rate function on a finite scan."""

    lg_holds: bool
    measured_a1: float
    m_holds: bool
    k0: int
    measured_a2: float
    measured_A0: float
    scan_cap: int


class RateFunction:
    """A jump-rate function with cached values and log prefix sums.

    The value cache and the prefix-sum cache grow on demand and stay in
    sync; extension is serialized by a lock so concurrent sweep workers can
    share one instance.
    """

    def __init__(self, name, params, rule=None, table=None):
        if rule is None and table is None:
            raise ConfigError("rate function needs a rule or a table")
        self.name = name
        self.params = tuple(float(p) for p in params)
        self._rule = rule
        self._table_cap = None
        self._lock = threading.Lock()
        if table is not None:
            vals = np.asarray(table, dtype=float)
            if vals[0] != 0.0:
                raise ConfigError("rate table must have c(0) = 0")
            if np.any(vals[1:] <= 0.0):
                bad = int(np.argmin(vals[1:] > 0.0)) + 1
                raise ConfigError(f"rate table entry c({bad}) is not positive")
            self._table_cap = len(vals) - 1
            self._c = vals
        else:
            self._c = np.array([0.0], dtype=float)
        self._F = np.zeros(len(self._c), dtype=float)
        if len(self._c) > 1:
            self._F[1:] = np.cumsum(np.log(self._c[1:]))
        # Filled in by build_family / check_conditions.
        self.a1 = None
        self.k0 = None
        self.a2 = None
        self.A0 = None

    @property
    def cached_cap(self) -> int:
        return len(self._c) - 1

    def ensure(self, kmax: int) -> None:
        """Extend the value and prefix-sum caches up to c(kmax), F(kmax)."""
        if kmax <= self.cached_cap:
            return
        with self._lock:
            cur = self.cached_cap
            if kmax <= cur:
                return
            if self._rule is None:
                raise ConfigError(
                    f"user table ends at c({self._table_cap}); cannot extend to c({kmax})"
                )
            grow_to = max(kmax, 2 * cur, 64)
            ks = np.arange(cur + 1, grow_to + 1)
            new_vals = np.asarray(self._rule(ks), dtype=float)
            if np.any(new_vals <= 0.0):
                raise ConfigError(f"{self.name}: rate rule produced a nonpositive value")
            c = np.concatenate([self._c, new_vals])
            F = np.concatenate([self._F, self._F[-1] + np.cumsum(np.log(new_vals))])
            # Swap both caches at once so readers never see them out of sync.
            self._c = c
            self._F = F

    def c(self, k: int) -> float:
        self.ensure(int(k))
        return float(self._c[int(k)])

    def values(self, kmax: int) -> np.ndarray:
        """c(0..kmax) as an array (a copy-safe view)."""
        self.ensure(int(kmax))
        return self._c[: int(kmax) + 1]

    def log_c_factorial(self, k: int) -> float:
        """F(k) = sum_{j<=k} log c(j), with F(0) = 0."""
        self.ensure(int(k))
        return float(self._F[int(k)])

    def log_factorials(self, kmax: int) -> np.ndarray:
        """F(0..kmax) as an array."""
        self.ensure(int(kmax))
        return self._F[: int(kmax) + 1]

    def h(self, n: int) -> float:
        """h(n) = (n+1)/c(n+1), bounded by A0."""
        return (int(n) + 1) / self.c(int(n) + 1)

    def h_values(self, nmax: int) -> np.ndarray:
        self.ensure(int(nmax) + 1)
        ns = np.arange(int(nmax) + 1)
        return (ns + 1) / self._c[1 : int(nmax) + 2]

    def __repr__(self):
        return f"RateFunction({self.name}, params={self.params})"


def check_conditions(rate: RateFunction, scan_cap: int = 10_000, k0: int | None = None) -> ConditionReport:
    """Measure the structural constants of ``rate`` on k <= scan_cap.

    a1 is the exact max of |c(k+1) - c(k)| over the scan.  a2 is the exact
    min of c(k) - c(j) over pairs with k >= j + k0, computed with prefix
    maxima in O(scan_cap).  A0 is the smallest constant with
    A0^{-1} k <= c(k) <= A0 k on the scan.  For rate functions without a
    declared k0 (user tables), the smallest k0 in 1..32 with a positive gap
    is searched.
    """
    scan_cap = int(scan_cap)
    if rate._rule is None:
        scan_cap = min(scan_cap, rate._table_cap)
    c = np.asarray(rate.values(scan_cap), dtype=float)
    a1 = float(np.max(np.abs(np.diff(c)))) if scan_cap >= 1 else 0.0
    ks = np.arange(1, scan_cap + 1)
    ratios = c[1:] / ks
    A0 = float(max(np.max(ratios), np.max(1.0 / ratios)))

    prefix_max = np.maximum.accumulate(c)

    def gap_for(k0_: int) -> float:
        # min over k >= j + k0 of c(k) - c(j) = min_k [c(k) - max_{j<=k-k0} c(j)]
        if scan_cap < k0_:
            return np.inf
        return float(np.min(c[k0_:] - prefix_max[:-k0_]))

    if k0 is not None:
        use_k0 = int(k0)
        a2 = gap_for(use_k0)
    elif rate.k0 is not None:
        use_k0 = int(rate.k0)
        a2 = gap_for(use_k0)
    else:
        use_k0, a2 = None, -np.inf
        for cand in range(1, _USER_TABLE_K0_MAX + 1):
            g = gap_for(cand)
            if np.isfinite(g) and g > 0.0:
                use_k0, a2 = cand, g
                break
        if use_k0 is None:
            use_k0, a2 = _USER_TABLE_K0_MAX, gap_for(_USER_TABLE_K0_MAX)
            if not np.isfinite(a2):
                a2 = 0.0
    m_holds = bool(np.isfinite(a2) and a2 > 0.0)
    return ConditionReport(
        lg_holds=bool(np.isfinite(a1)),
        measured_a1=a1,
        m_holds=m_holds,
        k0=use_k0,
        measured_a2=float(a2) if np.isfinite(a2) else 0.0,
        measured_A0=A0,
        scan_cap=scan_cap,
    )


def build_family(name: str, params=(), scan_cap: int = 10_000) -> RateFunction:
    """Construct a named rate family and verify its structural conditions.

    Families: ``linear`` c(k) = lambda k (default lambda = 1),
    ``scaled_linear`` c(k) = lambda k (lambda required),
    ``parity_perturbed`` c(k) = k + b (k mod 2) with 0 <= b < 1,
    ``user_table`` with params = (c(1), c(2), ...).

    Raises ConfigError if the family parameters are invalid or the uniform
    increase condition fails on the scan (e.g. any pure-exclusion table).
    """
    params = tuple(float(p) for p in params)
    if name in ("linear", "scaled_linear"):
        if name == "linear":
            lam = params[0] if params else 1.0
        else:
            if not params:
                raise ConfigError("scaled_linear requires a rate slope parameter")
            lam = params[0]
        if lam <= 0:
            raise ConfigError("linear rate slope must be positive")
        rate = RateFunction(name, (lam,), rule=lambda ks: lam * ks)
        rate.k0 = 1
    elif name == "parity_perturbed":
        b = params[0] if params else 0.5
        if not (0.0 <= b < 1.0):
            raise ConfigError("parity perturbation must satisfy 0 <= b < 1")
        rate = RateFunction(name, (b,), rule=lambda ks: ks + b * (ks % 2))
        rate.k0 = 2
    elif name == "user_table":
        if not params:
            raise ConfigError("user_table requires the table entries c(1), c(2), ...")
        rate = RateFunction(name, params, table=(0.0,) + params)
    else:
        raise ConfigError(f"unknown rate family {name!r}; choose from {FAMILIES}")

    report = check_conditions(rate, scan_cap=scan_cap)
    if not report.m_holds:
        raise ConfigError(
            f"rate family {name!r} fails the uniform increase condition on k <= {report.scan_cap}"
        )
    rate.a1 = report.measured_a1
    rate.k0 = report.k0
    rate.a2 = report.measured_a2
    rate.A0 = report.measured_A0
    return rate


def load_user_table(path) -> RateFunction:
    """Read a one-column text file of c(1), c(2), ... into a rate function."""
    vals = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            vals.append(float(line))
    if not vals:
        raise ConfigError(f"rate table file {path} contains no entries")
    return build_family("user_table", tuple(vals))
