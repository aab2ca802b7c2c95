"""Birth-death rate models with distribution-dependent rates.

A rate model maps ``(t, i, mu)`` to a death rate ``a`` and a birth rate
``b``, where ``mu`` is the current law of the process (anything exposing
``mean()``).  Death at state 0 is impossible: ``a(t, 0, mu) == 0`` always.

Models may declare analytic envelope constants when they are known:

* ``k_state`` / ``k_measure`` -- the monotonicity envelope
  ``[b(i,mu)-b(j,nu)+a(j,nu)-a(i,mu)]*sgn(i-j) + (|da|+|db|)*1{i==j}
  <= k_state*|i-j| + k_measure*W1(mu,nu)``.
  Exponential ergodicity holds when ``k_state + k_measure < 0``.
* ``weight`` / ``lyapunov_power`` / ``weight_ratio`` / ``lyapunov_rate`` --
  the growth and Lyapunov envelope of the rates at the point mass at 0.
* ``joint_lipschitz`` -- ``|da| + |db| <= joint_lipschitz*(|i-j| + W1)``.
* ``drift_const`` / ``drift_state`` / ``drift_measure`` -- the p-th moment
  drift envelope ``p[(i+1)^(p-1) b - (i-1)^(p-1) a] <= drift_const
  + drift_state*i^p + drift_measure*mean(mu)^p``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Union

import numpy as np

from .errors import NonFiniteRate
from .measures import Distribution


# ---------------------------------------------------------------------------
# time curves


class TimeCurve:
    """Piecewise-linear curve given by (t, value) pairs; constants allowed.

    Integrals of the tabulated curve are exact (trapezoid on the knots).
    Outside the tabulated range the curve extends by its edge values.
    """

    def __init__(self, ts, values):
        ts = np.asarray(ts, dtype=float)
        values = np.asarray(values, dtype=float)
        if ts.ndim != 1 or ts.shape != values.shape or ts.size == 0:
            raise ValueError("ts and values must be matching nonempty 1-D arrays")
        if np.any(np.diff(ts) <= 0):
            raise ValueError("ts must be strictly increasing")
        self.ts = ts
        self.values = values

    @staticmethod
    def constant(c: float) -> "TimeCurve":
        return TimeCurve([0.0], [float(c)])

    @property
    def is_constant(self) -> bool:
        return self.values.size == 1 or np.all(self.values == self.values[0])

    def __call__(self, t):
        return np.interp(t, self.ts, self.values)

    def sup(self, t0: float, t1: float) -> float:
        """Supremum over [t0, t1] (piecewise-linear, so knots suffice)."""
        vals = [self(t0), self(t1)]
        inside = (self.ts > t0) & (self.ts < t1)
        if np.any(inside):
            vals.append(self.values[inside].max())
        return float(np.max(vals))

    def integral(self, t0: float, t1: float, absolute: bool = False) -> float:
        """Integral over [t0, t1]; with absolute=True integrates |curve|."""
        if t1 < t0:
            return -self.integral(t1, t0, absolute)
        knots = self.ts[(self.ts > t0) & (self.ts < t1)]
        grid = np.concatenate([[t0], knots, [t1]])
        vals = self(grid)
        if absolute:
            # split segments at sign changes so |linear| integrates exactly
            total = 0.0
            for k in range(grid.size - 1):
                va, vb = vals[k], vals[k + 1]
                dt = grid[k + 1] - grid[k]
                if va * vb >= 0:
                    total += 0.5 * (abs(va) + abs(vb)) * dt
                else:
                    tz = dt * abs(va) / (abs(va) + abs(vb))
                    total += 0.5 * (abs(va) * tz + abs(vb) * (dt - tz))
            return total
        return float(np.sum(0.5 * (vals[1:] + vals[:-1]) * np.diff(grid)))

    def scaled(self, factor: "TimeCurve") -> "TimeCurve":
        """Pointwise product with another curve, on the union of knots."""
        ts = np.union1d(self.ts, factor.ts)
        return TimeCurve(ts, self(ts) * factor(ts))


CurveLike = Union[float, TimeCurve]


def as_curve(c: CurveLike) -> TimeCurve:
    return c if isinstance(c, TimeCurve) else TimeCurve.constant(float(c))


# ---------------------------------------------------------------------------
# declared constants


@dataclass(frozen=True)
class DeclaredConstants:
    """Analytic envelope constants a model may carry (all optional)."""

    k_state: Optional[CurveLike] = None
    k_measure: Optional[CurveLike] = None
    lyapunov_rate: Optional[CurveLike] = None
    lyapunov_power: Optional[float] = None
    weight_ratio: Optional[float] = None
    weight: Optional[Callable[[np.ndarray], np.ndarray]] = None
    joint_lipschitz: Optional[CurveLike] = None
    drift_const: Optional[CurveLike] = None
    drift_state: Optional[CurveLike] = None
    drift_measure: Optional[CurveLike] = None

    def has_monotone_pair(self) -> bool:
        return self.k_state is not None and self.k_measure is not None

    def scaled(self, multiplier: TimeCurve) -> "DeclaredConstants":
        """Constants of a model whose rates are scaled by multiplier(t)."""

        def sc(c):
            return None if c is None else as_curve(c).scaled(multiplier)

        return replace(
            self,
            k_state=sc(self.k_state),
            k_measure=sc(self.k_measure),
            lyapunov_rate=sc(self.lyapunov_rate),
            joint_lipschitz=sc(self.joint_lipschitz),
            drift_const=sc(self.drift_const),
            drift_state=sc(self.drift_state),
            drift_measure=sc(self.drift_measure),
        )


def mean_of(mu) -> float:
    """First moment of a measure-like argument (Distribution or view)."""
    return mu.mean()


class PolynomialWeight:
    """Increasing weight (1+i)**power; picklable, unlike a lambda."""

    def __init__(self, power: float):
        self.power = power

    def __call__(self, i):
        return (1.0 + np.asarray(i, dtype=float)) ** self.power


# ---------------------------------------------------------------------------
# rate models


class RateModel:
    """Base class: deterministic, side-effect-free rate evaluation.

    Subclasses implement ``_rates_vector``.  Evaluation must be safe to
    call concurrently; instances are immutable after construction.
    """

    time_homogeneous: bool = True
    constants: DeclaredConstants = DeclaredConstants()
    name: str = "rate-model"

    def _rates_vector(self, t: float, states: np.ndarray, mu) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def rates_vector(self, t, states, mu):
        """(death, birth) rate arrays over ``states``; death forced to 0 at state 0."""
        states = np.asarray(states)
        a, b = self._rates_vector(t, states, mu)
        a = np.where(states == 0, 0.0, a)
        return a, b

    def rates(self, t: float, i: int, mu) -> tuple[float, float]:
        a, b = self.rates_vector(t, np.array([i]), mu)
        return float(a[0]), float(b[0])

    def describe(self) -> str:
        return self.name


def eval_rates(model: RateModel, t: float, i: int, mu) -> tuple[float, float]:
    """Evaluate and validate a single (death, birth) rate pair.

    Raises NonFiniteRate if the model produced NaN/inf or a negative value,
    which signals an ill-posed configuration.
    """
    if t < 0 or i < 0:
        raise ValueError("require t >= 0 and i >= 0")
    a, b = model.rates(t, i, mu)
    if not (math.isfinite(a) and math.isfinite(b)) or a < 0 or b < 0:
        raise NonFiniteRate(f"model {model.describe()!r} returned (a={a!r}, b={b!r}) at t={t}, i={i}")
    return a, b


class AffineMeanField(RateModel):
    """b(i, mu) = beta0 + beta1 * mean(mu),  a(i, mu) = alpha * i.

    Satisfies the monotonicity envelope with k_state = -alpha and
    k_measure = beta1; exponentially ergodic iff beta1 < alpha.
    """

    def __init__(self, beta0: float, beta1: float, alpha: float):
        if beta0 < 0 or beta1 < 0 or alpha <= 0:
            raise ValueError("require beta0 >= 0, beta1 >= 0, alpha > 0")
        self.beta0 = beta0
        self.beta1 = beta1
        self.alpha = alpha
        self.name = f"affine(beta0={beta0:g}, beta1={beta1:g}, alpha={alpha:g})"
        self.constants = DeclaredConstants(
            k_state=-alpha,
            k_measure=beta1,
            lyapunov_power=2.0,
            weight_ratio=4.0,
            weight=PolynomialWeight(2.0),
            joint_lipschitz=max(alpha, beta1),
            # hand expansion of the p=2 moment drift for affine rates
            # (clamping the i^2 coefficient up to 0 keeps a valid envelope)
            drift_const=3.0 * beta0 + 2.0 * beta1 + alpha,
            drift_state=max(beta0 + 2.0 * beta1 - alpha, 0.0),
            drift_measure=beta1,
        )

    def _rates_vector(self, t, states, mu):
        a = self.alpha * states.astype(float)
        b = np.full(states.shape, self.beta0 + self.beta1 * mean_of(mu))
        return a, b


class LogisticMeanField(RateModel):
    """b(i, mu) = lam + kappa * mean(mu),  a(i, mu) = c2/2 * (i^q + i^(q+eps)).

    The death rate carries a strictly superlinear component so the natural
    Lyapunov weight is (1+i)^(q+eps); the split into c2/2 halves keeps the
    growth constant of a+b at the point mass at 0 equal to the decay
    constant of b-a, which the Lyapunov envelope requires.
    Ergodic iff kappa < c2.
    """

    def __init__(self, lam: float, c2: float, q: float = 1.0, eps: float = 0.5, kappa: float = 0.0):
        if lam < 0 or c2 <= 0 or q < 1 or not 0 < eps < 1 or kappa < 0:
            raise ValueError("require lam >= 0, c2 > 0, q >= 1, 0 < eps < 1, kappa >= 0")
        self.lam = lam
        self.c2 = c2
        self.q = q
        self.eps = eps
        self.kappa = kappa
        self.name = f"logistic(lam={lam:g}, c2={c2:g}, q={q:g}, eps={eps:g}, kappa={kappa:g})"
        p = q + eps
        self.constants = DeclaredConstants(
            k_state=-c2,
            k_measure=kappa,
            lyapunov_power=2.0,
            weight_ratio=2.0 ** p,
            weight=PolynomialWeight(p),
        )

    def _rates_vector(self, t, states, mu):
        s = states.astype(float)
        a = 0.5 * self.c2 * (s ** self.q + s ** (self.q + self.eps))
        b = np.full(states.shape, self.lam + self.kappa * mean_of(mu))
        return a, b


class TimeModulated(RateModel):
    """Scales both rates of a base model by a tabulated multiplier m(t) >= 0."""

    def __init__(self, base: RateModel, multiplier: CurveLike):
        self.base = base
        self.multiplier = as_curve(multiplier)
        if np.any(self.multiplier.values < 0):
            raise ValueError("multiplier must be nonnegative")
        self.time_homogeneous = self.multiplier.is_constant and base.time_homogeneous
        self.constants = base.constants.scaled(self.multiplier)
        self.name = f"modulated({base.describe()})"

    def _rates_vector(self, t, states, mu):
        a, b = self.base.rates_vector(t, states, mu)
        m = float(self.multiplier(t))
        return m * a, m * b


class FunctionRateModel(RateModel):
    """Wraps plain callables a(t, i, mu), b(t, i, mu); loops unless vectorized."""

    def __init__(self, death, birth, time_homogeneous=True, constants=None,
                 vectorized=False, name="custom"):
        self.death = death
        self.birth = birth
        self.time_homogeneous = time_homogeneous
        self.constants = constants or DeclaredConstants()
        self.vectorized = vectorized
        self.name = name

    def _rates_vector(self, t, states, mu):
        if self.vectorized:
            s = states.astype(float)
            return (np.broadcast_to(np.asarray(self.death(t, s, mu), dtype=float), states.shape).copy(),
                    np.broadcast_to(np.asarray(self.birth(t, s, mu), dtype=float), states.shape).copy())
        a = np.array([self.death(t, int(i), mu) for i in states], dtype=float)
        b = np.array([self.birth(t, int(i), mu) for i in states], dtype=float)
        return a, b


def rate_model(death, birth, **kwargs) -> FunctionRateModel:
    """Convenience constructor for one-off models in tests and scripts."""
    return FunctionRateModel(death, birth, **kwargs)


def delta0(cap: int = 0) -> Distribution:
    return Distribution.dirac(0, cap)
