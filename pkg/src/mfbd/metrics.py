"""Exact Wasserstein distances on the nonnegative integers.

For measures on Z+ with the |x-y| ground cost, W1 equals the L1 gap of
the cumulative functions, and Wp is the Lp gap of the quantile functions;
both identities are specific to one dimension.  ``w1_lp_oracle`` solves
the transport problem independently by greedy monotone matching of sorted
mass, which attains the optimum for every convex cost, and is the test
oracle for the cumulative/quantile formulas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import SizeMismatch, SupportTooLarge
from .measures import Distribution, common_cap

ORACLE_MAX_SUPPORT = 64


def w1(mu: Distribution, nu: Distribution) -> float:
    """W1 distance: sum over i of |F_mu(i) - F_nu(i)|."""
    mu, nu = common_cap(mu, nu)
    gaps = np.abs(np.cumsum(mu.mass - nu.mass))
    # both CDFs are 1 at the top state, so the last gap is pure roundoff;
    # compensated summation since W1 accumulates many small CDF gaps
    return math.fsum(gaps[:-1])


def wp(mu: Distribution, nu: Distribution, p: float) -> float:
    """Wp distance via the quantile (comonotone) coupling.

    Merges the two cumulative staircases; between consecutive merged
    levels both quantile functions are constant, so the integral of
    |F_mu^{-1}(u) - F_nu^{-1}(u)|^p du is a finite exact sum.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    mu, nu = common_cap(mu, nu)
    cdf_a = np.cumsum(mu.mass)
    cdf_b = np.cumsum(nu.mass)
    levels = np.unique(np.concatenate([[0.0], cdf_a, cdf_b, [1.0]]))
    levels = levels[(levels >= 0.0) & (levels <= 1.0)]
    widths = np.diff(levels)
    mids = 0.5 * (levels[:-1] + levels[1:])
    qa = np.searchsorted(cdf_a, mids, side="left")
    qb = np.searchsorted(cdf_b, mids, side="left")
    cost = math.fsum(widths * np.abs(qa - qb) ** float(p))
    return cost ** (1.0 / p)


def w1_lp_oracle(mu: Distribution, nu: Distribution) -> float:
    return wp_lp_oracle(mu, nu, 1.0)


def wp_lp_oracle(mu: Distribution, nu: Distribution, p: float) -> float:
    """Exact optimal transport cost by greedy north-west (monotone) matching.

    Walks both sorted mass vectors with two pointers, always pairing the
    lowest unmatched mass of each side; for the convex cost |x-y|^p on the
    line this greedy plan is an optimal coupling (equivalently, the LP
    optimum).  Restricted to small supports: it is a test oracle.
    """
    mu, nu = common_cap(mu, nu)
    if mu.mass.size > ORACLE_MAX_SUPPORT:
        raise SupportTooLarge(
            f"combined support {mu.mass.size} exceeds {ORACLE_MAX_SUPPORT}")
    ia, ib = 0, 0
    rem_a = mu.mass.copy()
    rem_b = nu.mass.copy()
    terms = []
    while ia < rem_a.size and ib < rem_b.size:
        if rem_a[ia] <= 1e-18:
            ia += 1
            continue
        if rem_b[ib] <= 1e-18:
            ib += 1
            continue
        move = min(rem_a[ia], rem_b[ib])
        terms.append(move * abs(ia - ib) ** float(p))
        rem_a[ia] -= move
        rem_b[ib] -= move
    return math.fsum(terms) ** (1.0 / p)


def truncation_error_bar(mu: Distribution, nu: Distribution) -> float:
    """Worst-case distance contribution of mass suppressed beyond the caps.

    Distances ignore the truncation tails; this companion quantity,
    (tail_mass of both) * common cap, bounds what the suppressed mass
    could have contributed and is reported alongside flow distances.
    """
    cap = max(mu.cap, nu.cap)
    return (mu.tail_mass + nu.tail_mass) * cap


def product_w1_upper(samples_a: np.ndarray, samples_b: np.ndarray) -> float:
    """Average identity-pairing cost between two sets of N-vectors.

    Each row is one sample in Z_+^N with the additive ground metric
    rho_N(x, y) = sum_l |x_l - y_l|.  Pairing row k with row k gives a
    coupling of the two empirical laws, hence an upper bound on their W1.
    """
    samples_a = np.asarray(samples_a)
    samples_b = np.asarray(samples_b)
    if samples_a.shape != samples_b.shape:
        raise SizeMismatch(f"shapes differ: {samples_a.shape} vs {samples_b.shape}")
    if samples_a.ndim != 2:
        raise SizeMismatch("expected 2-D arrays of shape (samples, N)")
    return float(np.mean(np.sum(np.abs(samples_a - samples_b), axis=1)))


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Sorted multiset of integer samples with a Distribution view."""

    samples: np.ndarray

    def __post_init__(self):
        s = np.sort(np.asarray(self.samples, dtype=np.int64))
        if s.size == 0:
            raise ValueError("need at least one sample")
        if np.any(s < 0):
            raise ValueError("samples must be nonnegative integers")
        object.__setattr__(self, "samples", s)

    @property
    def size(self) -> int:
        return self.samples.size

    def distribution(self, cap: int | None = None) -> Distribution:
        cap = int(self.samples[-1]) if cap is None else cap
        counts = np.bincount(self.samples, minlength=cap + 1).astype(float)
        return Distribution(counts / self.samples.size)

    def mean(self) -> float:
        return float(self.samples.mean())


def empirical_w1(samples: np.ndarray, target: Distribution) -> float:
    """W1 between the empirical measure of integer samples and a target."""
    emp = EmpiricalMeasure(np.asarray(samples))
    return w1(emp.distribution(), target)


def empirical_w1_scale(target: Distribution, n_samples: int) -> float:
    """Upper bound on E[W1(empirical_n, target)] for i.i.d. samples.

    Per-level Jensen bound: E|F_n(i) - F(i)| <= sqrt(F(i)(1 - F(i)) / n),
    summed over levels.  Used as the Monte-Carlo error scale when an
    empirical law is compared against an exact one.
    """
    cdf = target.cdf()
    return float(np.sum(np.sqrt(np.clip(cdf * (1.0 - cdf), 0.0, None))) / math.sqrt(n_samples))
