"""Finite-support probability distributions on the nonnegative integers.

A :class:`Distribution` stores a probability vector on ``{0, ..., cap}``.
Mass that a solver suppresses beyond the cap is tracked separately in
``tail_mass`` as a truncation diagnostic; it is not part of the measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

MASS_TOL = 1e-12


@dataclass(frozen=True)
class Distribution:
    """Probability vector on {0, ..., cap} with a truncation diagnostic."""

    mass: np.ndarray
    tail_mass: float = 0.0
    _mean: float = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        m = np.asarray(self.mass, dtype=float)
        object.__setattr__(self, "mass", m)
        if m.ndim != 1 or m.size == 0:
            raise ValueError("mass must be a nonempty 1-D vector")
        if np.any(m < -MASS_TOL) or not np.all(np.isfinite(m)):
            raise ValueError("mass entries must be finite and nonnegative")
        total = float(m.sum())
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"mass must sum to 1 within {MASS_TOL}, got {total!r}")
        if self.tail_mass < 0:
            raise ValueError("tail_mass must be nonnegative")

    # -- constructors -------------------------------------------------

    @staticmethod
    def from_masses(values, cap=None, normalize=False) -> "Distribution":
        m = np.array(values, dtype=float)
        if normalize:
            m = np.clip(m, 0.0, None)
            m = m / m.sum()
        if cap is not None and cap + 1 > m.size:
            m = np.concatenate([m, np.zeros(cap + 1 - m.size)])
        return Distribution(m)

    @staticmethod
    def dirac(i: int, cap: int | None = None) -> "Distribution":
        cap = i if cap is None else cap
        if i > cap:
            raise ValueError("dirac point exceeds cap")
        m = np.zeros(cap + 1)
        m[i] = 1.0
        return Distribution(m)

    @staticmethod
    def poisson(lam: float, cap: int) -> "Distribution":
        """Poisson(lam) conditioned on {0..cap} (renormalized truncation)."""
        if lam < 0:
            raise ValueError("lam must be nonnegative")
        if lam == 0:
            return Distribution.dirac(0, cap)
        i = np.arange(cap + 1)
        logs = -lam + i * math.log(lam) - np.array([math.lgamma(k + 1) for k in i])
        m = np.exp(logs - logs.max())
        return Distribution(m / m.sum())

    @staticmethod
    def geometric(p: float, cap: int) -> "Distribution":
        """Geometric on {0,1,...} with success probability p, truncated to {0..cap}."""
        if not 0 < p <= 1:
            raise ValueError("p must lie in (0, 1]")
        m = p * (1 - p) ** np.arange(cap + 1)
        return Distribution(m / m.sum())

    # -- basic queries -------------------------------------------------

    @property
    def cap(self) -> int:
        return self.mass.size - 1

    @property
    def support_cap(self) -> int:
        return self.cap

    def states(self) -> np.ndarray:
        return np.arange(self.mass.size)

    def mean(self) -> float:
        cached = object.__getattribute__(self, "_mean")
        if cached is None:
            cached = float(np.dot(np.arange(self.mass.size), self.mass))
            object.__setattr__(self, "_mean", cached)
        return cached

    def moment(self, p: float) -> float:
        """p-th raw moment, sum_i i^p mass(i) (p > 0)."""
        i = np.arange(self.mass.size, dtype=float)
        return float(np.dot(np.power(i, p), self.mass))

    def norm_p(self, p: float) -> float:
        """The p-norm (moment(p))**(1/p); for p=1 this is the mean."""
        return self.moment(p) ** (1.0 / p)

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.mass)

    def padded(self, cap: int) -> "Distribution":
        if cap < self.cap:
            raise ValueError("cannot shrink support by padding")
        if cap == self.cap:
            return self
        m = np.concatenate([self.mass, np.zeros(cap - self.cap)])
        return Distribution(m, self.tail_mass)

    def with_tail(self, tail_mass: float) -> "Distribution":
        return Distribution(self.mass, tail_mass)

    def sample(self, rng: np.random.Generator, size=None):
        """Draw integer samples; uses the inverse-CDF on the stored vector."""
        u = rng.random(size)
        return np.searchsorted(self.cdf(), u, side="right").clip(0, self.cap)


def common_cap(a: Distribution, b: Distribution) -> tuple[Distribution, Distribution]:
    cap = max(a.cap, b.cap)
    return a.padded(cap), b.padded(cap)


def tv_distance(a: Distribution, b: Distribution) -> float:
    """Total variation distance, half the L1 gap of the padded vectors."""
    a, b = common_cap(a, b)
    return 0.5 * float(math.fsum(np.abs(a.mass - b.mass)))
