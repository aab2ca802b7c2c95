"""Deterministic computation of the nonlinear marginal flow.

Three mutually validating routes produce the flow t -> law(X_t):

* ``picard_fixed_point`` -- iterate the map sending a candidate flow to
  the marginal flow of the linear process whose rates read the candidate
  (a contraction in the discounted sup-W1 metric for large discount);
* ``direct_nonlinear_solve`` -- plug the current marginal into the rates
  and integrate the resulting nonlinear master equation with RK4;
* ``dyadic_approx_solve`` -- freeze the generator on dyadic time cells
  and chain the homogeneous solutions.

All routes integrate the forward (master) equation

    d/dt mu_t(j) = b(j-1) mu_t(j-1) + a(j+1) mu_t(j+1) - (a(j)+b(j)) mu_t(j)

on a truncated range {0..cap} with the top birth rate forced to zero, so
the truncated generator stays conservative.  The suppressed birth flux at
the cap is accrued into a tail diagnostic and triggers adaptive doubling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (CapOverflow, ClippingOverflow, MissingConstants, NoConvergence,
                     StepTooLarge, ZeroDeathRate)
from .measures import Distribution, tv_distance
from .metrics import w1
from .model import RateModel, as_curve
from .reporting import ExperimentReport, ReportPoint

DEFAULT_H = 1.0 / 256.0
BOUNDARY_TRIGGER = 1e-12
STABILITY_LIMIT = 0.5


@dataclass(frozen=True)
class SolverOptions:
    cap: int | None = None          # starting truncation cap (None: sized from mu0)
    max_cap: int = 8192
    tail_budget: float = 1e-8       # CapOverflow once suppressed flux exceeds this
    clip_budget: float = 1e-8       # ClippingOverflow budget for negative-mass clipping


@dataclass(frozen=True)
class PicardConfig:
    lam: float | None = None        # discount of the sup-metric; None: sufficiency rule
    tol: float = 1e-9               # tolerance on the discounted sup-W1 gap
    sup_tol: float = 1e-8           # additional undiscounted sup-W1 gap tolerance
    max_iter: int = 60
    h: float = DEFAULT_H


class _MassView:
    """Measure view over a raw (possibly non-normalized) mass vector."""

    __slots__ = ("mass", "_mean")

    def __init__(self, mass: np.ndarray):
        self.mass = mass
        self._mean = None

    def mean(self) -> float:
        if self._mean is None:
            self._mean = float(np.arange(self.mass.size) @ self.mass)
        return self._mean

    def moment(self, p: float) -> float:
        return float(np.power(np.arange(self.mass.size, dtype=float), p) @ self.mass)


@dataclass
class MeasureFlow:
    """Time grid plus one distribution per node (a discretized measure flow)."""

    times: np.ndarray
    masses: np.ndarray              # shape (len(times), cap+1)
    route: str = "unknown"
    tails: np.ndarray = None        # accrued suppressed flux per node
    clipped: float = 0.0

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.masses = np.asarray(self.masses, dtype=float)
        if self.tails is None:
            self.tails = np.zeros(self.times.size)

    # -- construction ---------------------------------------------------

    @staticmethod
    def constant(dist: Distribution, T: float, h: float = DEFAULT_H) -> "MeasureFlow":
        times = _grid(T, h)
        masses = np.tile(dist.mass, (times.size, 1))
        return MeasureFlow(times, masses, route="constant")

    # -- basic queries ----------------------------------------------------

    @property
    def cap(self) -> int:
        return self.masses.shape[1] - 1

    @property
    def h(self) -> float:
        return float(self.times[1] - self.times[0]) if self.times.size > 1 else 0.0

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def is_constant(self) -> bool:
        return bool(np.all(self.masses == self.masses[0]))

    def at(self, k: int) -> Distribution:
        m = self.masses[k]
        return Distribution(m / m.sum(), float(self.tails[k]))

    def node_index(self, t: float) -> int:
        """Left-node lookup: largest k with times[k] <= t."""
        k = int(np.searchsorted(self.times, t + 1e-12, side="right") - 1)
        return min(max(k, 0), self.times.size - 1)

    def value_at(self, t: float) -> Distribution:
        return self.at(self.node_index(t))

    def means(self) -> np.ndarray:
        return self.masses @ np.arange(self.masses.shape[1])

    def moments(self, p: float) -> np.ndarray:
        return self.masses @ np.power(np.arange(self.masses.shape[1], dtype=float), p)

    def padded(self, cap: int) -> "MeasureFlow":
        if cap <= self.cap:
            return self
        extra = np.zeros((self.masses.shape[0], cap - self.cap))
        return replace(self, masses=np.hstack([self.masses, extra]))

    def downsample(self, stride: int) -> "MeasureFlow":
        return replace(self, times=self.times[::stride], masses=self.masses[::stride],
                       tails=self.tails[::stride])

    def sup_w1(self, other: "MeasureFlow") -> float:
        """Supremum of W1 over shared grid nodes (grids must agree)."""
        if self.times.size != other.times.size or not np.allclose(self.times, other.times):
            raise ValueError("flows live on different grids")
        a, b = self, other
        cap = max(a.cap, b.cap)
        a, b = a.padded(cap), b.padded(cap)
        best = 0.0
        for k in range(a.times.size):
            gaps = np.abs(np.cumsum(a.masses[k] - b.masses[k]))
            best = max(best, math.fsum(gaps[:-1]))
        return best

    def weak_continuity_constant(self) -> float:
        """Max W1 between consecutive nodes divided by the step."""
        if self.times.size < 2:
            return 0.0
        best = 0.0
        for k in range(self.times.size - 1):
            gaps = np.abs(np.cumsum(self.masses[k + 1] - self.masses[k]))
            best = max(best, math.fsum(gaps[:-1]))
        return best / self.h


def _grid(T: float, h: float) -> np.ndarray:
    n = int(round(T / h))
    if n < 1 or abs(n * h - T) > 1e-9 * max(1.0, T):
        raise ValueError(f"horizon {T} is not an integer multiple of step {h}")
    return np.arange(n + 1) * h


def _initial_cap(mu0: Distribution, options: SolverOptions, floor: int = 0) -> int:
    top = int(np.max(np.nonzero(mu0.mass > 1e-15)[0], initial=0))
    cap = max(32, 2 * top + 16, floor)
    if options.cap is not None:
        cap = max(options.cap, top)
    return min(cap, options.max_cap)


def _apply_generator(a: np.ndarray, b: np.ndarray, m: np.ndarray) -> np.ndarray:
    out = -(a + b) * m
    out[1:] += b[:-1] * m[:-1]
    out[:-1] += a[1:] * m[1:]
    return out


class _Stepper:
    """Shared RK4 machinery over a truncated state range with cap doubling."""

    def __init__(self, model: RateModel, options: SolverOptions, cap: int, h: float):
        self.model = model
        self.options = options
        self.h = h
        self.clipped = 0.0
        self.tail = 0.0
        self._set_cap(cap)

    def _set_cap(self, cap: int):
        self.cap = cap
        self.states = np.arange(cap + 1)

    def rates(self, t: float, source: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
        """Rate arrays at time t read from a source mass vector.

        Returns (a, b, top_birth); b is zeroed at the cap so the truncated
        generator is conservative, top_birth is the suppressed true rate.
        """
        a, b = self.model.rates_vector(t, self.states, _MassView(source))
        top = float(b[-1])
        b = b.copy()
        b[-1] = 0.0
        qmax = float(np.max(a + b))
        if self.h * qmax > STABILITY_LIMIT:
            raise StepTooLarge(
                f"h*max(a+b) = {self.h * qmax:.3g} exceeds {STABILITY_LIMIT} "
                f"(h={self.h:g}, cap={self.cap}); reduce the step or the cap")
        return a, b, top

    def maybe_double(self, mu: np.ndarray, extra_rows: list[np.ndarray]) -> tuple[np.ndarray, bool]:
        """Double the cap when boundary mass shows up; returns (mu, grew)."""
        if mu[-1] <= BOUNDARY_TRIGGER:
            return mu, False
        if 2 * self.cap > self.options.max_cap:
            if self.tail > self.options.tail_budget:
                raise CapOverflow(
                    f"suppressed tail {self.tail:.3g} exceeds budget "
                    f"{self.options.tail_budget:.3g} at max cap {self.cap}")
            return mu, False
        old = self.cap
        self._set_cap(2 * self.cap)
        pad = np.zeros(self.cap - old)
        mu = np.concatenate([mu, pad])
        for k, row in enumerate(extra_rows):
            extra_rows[k] = np.concatenate([row, pad])
        return mu, True

    def finalize(self, mu: np.ndarray) -> np.ndarray:
        """Clip RK4 negativity, renormalize, track budgets."""
        neg = mu < 0.0
        if np.any(neg):
            self.clipped += float(-mu[neg].sum())
            if self.clipped > self.options.clip_budget:
                raise ClippingOverflow(
                    f"cumulative negative-mass clipping {self.clipped:.3g} exceeds "
                    f"budget {self.options.clip_budget:.3g}")
            mu = np.where(neg, 0.0, mu)
        return mu / mu.sum()

    def step_inhomogeneous(self, t: float, mu: np.ndarray, gamma: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """One RK4 step of the linear equation with rates read from gamma.

        The within-step values of the rate source are reconstructed by the
        same RK4 stage recursion applied to gamma itself, so a flow that is
        a fixed point of the resulting map is bitwise the output of the
        direct nonlinear route.
        """
        h = self.h
        same = gamma is mu
        a1, b1, top1 = self.rates(t, gamma)
        k1 = _apply_generator(a1, b1, mu)
        mu2 = mu + 0.5 * h * k1
        g2 = mu2 if same else gamma + 0.5 * h * _apply_generator(a1, b1, gamma)
        a2, b2, _ = self.rates(t + 0.5 * h, g2)
        k2 = _apply_generator(a2, b2, mu2)
        mu3 = mu + 0.5 * h * k2
        g3 = mu3 if same else gamma + 0.5 * h * _apply_generator(a2, b2, g2)
        a3, b3, _ = self.rates(t + 0.5 * h, g3)
        k3 = _apply_generator(a3, b3, mu3)
        mu4 = mu + h * k3
        g4 = mu4 if same else gamma + h * _apply_generator(a3, b3, g3)
        a4, b4, _ = self.rates(t + h, g4)
        k4 = _apply_generator(a4, b4, mu4)
        out = mu + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        self.tail += self.h * top1 * float(mu[-1])
        return self.finalize(out), g4

    def step_frozen(self, a: np.ndarray, b: np.ndarray, top: float, mu: np.ndarray) -> np.ndarray:
        """One RK4 step with rate arrays held fixed (dyadic cells)."""
        h = self.h
        k1 = _apply_generator(a, b, mu)
        k2 = _apply_generator(a, b, mu + 0.5 * h * k1)
        k3 = _apply_generator(a, b, mu + 0.5 * h * k2)
        k4 = _apply_generator(a, b, mu + h * k3)
        out = mu + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        self.tail += self.h * top * float(mu[-1])
        return self.finalize(out)


# ---------------------------------------------------------------------------
# routes


def linear_solve(model: RateModel, frozen: MeasureFlow, mu0: Distribution,
                 options: SolverOptions = SolverOptions()) -> MeasureFlow:
    """Marginal flow of the linear process whose rates read ``frozen``.

    Integrates the master equation with rates evaluated along the supplied
    flow; this is one application of the fixed-point map.  The grid is the
    frozen flow's grid.
    """
    times = frozen.times
    if times.size < 2:
        raise ValueError("frozen flow must cover at least one step")
    cap = _initial_cap(mu0, options, floor=frozen.cap)
    stepper = _Stepper(model, options, cap, float(times[1] - times[0]))
    frozen = frozen.padded(cap)
    gamma_rows = list(frozen.masses)
    mu = mu0.padded(cap).mass.copy()
    rows = [mu]
    tails = [0.0]
    for k in range(times.size - 1):
        gamma = gamma_rows[k]
        mu, _ = stepper.step_inhomogeneous(float(times[k]), mu, gamma)
        mu, grew = stepper.maybe_double(mu, gamma_rows)
        if grew:
            rows = [np.concatenate([r, np.zeros(mu.size - r.size)]) for r in rows]
        rows.append(mu)
        tails.append(stepper.tail)
    return MeasureFlow(times.copy(), np.vstack(rows), route="linear",
                       tails=np.asarray(tails), clipped=stepper.clipped)


def direct_nonlinear_solve(model: RateModel, mu0: Distribution, T: float,
                           h: float = DEFAULT_H,
                           options: SolverOptions = SolverOptions()) -> MeasureFlow:
    """One-pass RK4 where stage rates read the stage's own distribution."""
    times = _grid(T, h)
    cap = _initial_cap(mu0, options)
    stepper = _Stepper(model, options, cap, h)
    mu = mu0.padded(cap).mass.copy()
    rows = [mu]
    tails = [0.0]
    for k in range(times.size - 1):
        mu, _ = stepper.step_inhomogeneous(float(times[k]), mu, mu)
        mu, grew = stepper.maybe_double(mu, [])
        if grew:
            rows = [np.concatenate([r, np.zeros(mu.size - r.size)]) for r in rows]
        rows.append(mu)
        tails.append(stepper.tail)
    return MeasureFlow(times, np.vstack(rows), route="direct",
                       tails=np.asarray(tails), clipped=stepper.clipped)


def dyadic_approx_solve(model: RateModel, mu0: Distribution, T: float, level: int,
                        h: float = DEFAULT_H, t0: float = 0.0,
                        options: SolverOptions = SolverOptions()) -> MeasureFlow:
    """Freeze the generator on dyadic cells [k 2^-level, (k+1) 2^-level).

    Rates inside a cell are evaluated once, at the cell's left endpoint
    (absolute time) and at the flow's own value there; cells are chained
    by the semigroup property.  The output grid keeps step ``h``; cells
    and grid must align (both are dyadic).
    """
    if level < 0:
        raise ValueError("level must be >= 0")
    cell = 2.0 ** (-level)
    if h >= cell:
        stride = int(round(h / cell))
        if abs(stride * cell - h) > 1e-12:
            raise ValueError(f"step {h} is not a multiple of the dyadic cell {cell}")
        h_int, steps_per_cell = cell, 1
    else:
        steps_per_cell = int(round(cell / h))
        if abs(steps_per_cell * h - cell) > 1e-12:
            raise ValueError(f"dyadic cell {cell} is not a multiple of step {h}")
        h_int, stride = h, 1
    if abs(t0 / cell - round(t0 / cell)) > 1e-9:
        raise ValueError("start time must sit on a dyadic cell boundary")
    times = t0 + _grid(T, h_int)
    cap = _initial_cap(mu0, options)
    stepper = _Stepper(model, options, cap, h_int)
    mu = mu0.padded(cap).mass.copy()
    rows = [mu]
    tails = [0.0]
    cell_mu, cell_start = mu, t0
    for k in range(times.size - 1):
        if k % steps_per_cell == 0:
            t = float(times[k])
            cell_start = math.floor(t / cell + 0.5e-9) * cell
            cell_mu = mu
            a, b, top = stepper.rates(cell_start, cell_mu)
        mu = stepper.step_frozen(a, b, top, mu)
        holder = [cell_mu]
        mu, grew = stepper.maybe_double(mu, holder)
        if grew:
            cell_mu = holder[0]
            rows = [np.concatenate([r, np.zeros(mu.size - r.size)]) for r in rows]
            a, b, top = stepper.rates(cell_start, cell_mu)
        rows.append(mu)
        tails.append(stepper.tail)
    flow = MeasureFlow(times, np.vstack(rows), route=f"dyadic:{level}",
                       tails=np.asarray(tails), clipped=stepper.clipped)
    if stride > 1:
        flow = flow.downsample(stride)
    return flow


# ---------------------------------------------------------------------------
# the fixed point


def _gap_pair(flow_a: MeasureFlow, flow_b: MeasureFlow, lam: float) -> tuple[float, float]:
    if flow_a.times.size != flow_b.times.size or not np.allclose(flow_a.times, flow_b.times):
        raise ValueError("flows live on different grids")
    cap = max(flow_a.cap, flow_b.cap)
    a, b = flow_a.padded(cap), flow_b.padded(cap)
    disc, plain = 0.0, 0.0
    for k in range(a.times.size):
        gaps = np.abs(np.cumsum(a.masses[k] - b.masses[k]))
        dist = math.fsum(gaps[:-1])
        plain = max(plain, dist)
        disc = max(disc, math.exp(-lam * a.times[k]) * dist)
    return disc, plain


def rho_lambda(flow_a: MeasureFlow, flow_b: MeasureFlow, lam: float) -> float:
    """Discounted sup distance: max over nodes of exp(-lam t) * W1."""
    return _gap_pair(flow_a, flow_b, lam)[0]


def default_lambda(model: RateModel, T: float) -> float:
    """Discount rate meeting the contraction sufficiency rule with margin.

    Sufficiency: the fixed-point map contracts by 1/2 once the discount
    exceeds twice sup(k_measure) * exp(integral of |k_state|); the +1 adds
    margin.  Requires declared monotonicity constants.
    """
    decl = model.constants
    if not decl.has_monotone_pair():
        raise MissingConstants(
            "default discount rule needs declared k_state/k_measure; "
            "pass PicardConfig(lam=...) or declare the constants")
    k_state = as_curve(decl.k_state)
    k_measure = as_curve(decl.k_measure)
    return 2.0 * k_measure.sup(0.0, T) * math.exp(k_state.integral(0.0, T, absolute=True)) + 1.0


@dataclass
class PicardResult:
    flow: MeasureFlow
    iterations: int
    final_gap: float
    gaps: list = field(default_factory=list)
    lam: float = 0.0


def picard_fixed_point(model: RateModel, mu0: Distribution, T: float,
                       cfg: PicardConfig = PicardConfig(),
                       options: SolverOptions = SolverOptions()) -> PicardResult:
    """Iterate the frozen-rate map from the constant flow to its fixed point.

    Starts from the flow constantly equal to mu0, applies the map
    (solve the linear equation with rates read from the previous iterate),
    and stops once the discounted sup-W1 gap between successive iterates
    drops below cfg.tol.  A plain sup-W1 gap below cfg.sup_tol is required
    as well: at large discount * horizon the discounted gap alone says
    little about the distance at the final nodes.
    """
    lam = cfg.lam if cfg.lam is not None else default_lambda(model, T)
    current = MeasureFlow.constant(mu0, T, cfg.h)
    gaps: list[float] = []
    for it in range(1, cfg.max_iter + 1):
        proposed = linear_solve(model, current, mu0, options)
        proposed = replace(proposed, route="picard")
        gap, sup_gap = _gap_pair(proposed, current, lam)
        gaps.append(gap)
        current = proposed
        if gap < cfg.tol and sup_gap < cfg.sup_tol:
            return PicardResult(current, it, gap, gaps, lam)
    raise NoConvergence(
        f"fixed-point iteration did not reach tol={cfg.tol:g} within "
        f"{cfg.max_iter} iterations (last gap {gaps[-1]:.3g}); the discount may be "
        f"too small for this horizon or the monotone condition may fail")


# ---------------------------------------------------------------------------
# stationary distribution


def _detailed_balance(model: RateModel, mu, cap: int) -> np.ndarray:
    """Stationary law of the frozen chain via the birth/death product formula."""
    states = np.arange(cap + 1)
    a, b = model.rates_vector(0.0, states, mu)
    logpi = np.zeros(cap + 1)
    for i in range(cap):
        if b[i] <= 0.0:
            logpi[i + 1:] = -np.inf
            break
        if a[i + 1] <= 0.0:
            raise ZeroDeathRate(
                f"death rate vanishes at state {i + 1} while birth persists below it")
        logpi[i + 1] = logpi[i] + math.log(b[i]) - math.log(a[i + 1])
    pi = np.exp(logpi - logpi[np.isfinite(logpi)].max())
    pi[~np.isfinite(pi)] = 0.0
    return pi / pi.sum()


@dataclass
class StationaryResult:
    distribution: Distribution
    residual_tv: float
    iterations: int
    invariance_drift: float | None = None


def stationary_solve(model: RateModel, damping: float = 0.5, tol: float = 1e-12,
                     max_iter: int = 800, options: SolverOptions = SolverOptions(),
                     verify: bool = False, verify_T: float = 1.0) -> StationaryResult:
    """Self-consistent stationary law: freeze mu, balance, re-freeze.

    Iterates mu <- (1-damping) mu + damping * pi(mu), where pi(mu) is the
    detailed-balance law of the chain with rates frozen at mu; the fixed
    point satisfies pi(mu) = mu up to the total-variation tolerance.
    Expects a time-homogeneous model in the contractive regime.
    """
    if not model.time_homogeneous:
        raise ValueError("stationary distributions need a time-homogeneous model")
    cap = 64 if options.cap is None else options.cap
    mu = Distribution.dirac(0, cap)
    residual = math.inf
    for it in range(1, max_iter + 1):
        pi = _detailed_balance(model, mu, cap)
        # grow the range until the top carries (relatively) no mass
        while pi[-1] > 1e-16 * pi.max() and cap < options.max_cap:
            cap = min(2 * cap, options.max_cap)
            mu = mu.padded(cap)
            pi = _detailed_balance(model, mu, cap)
        balanced = Distribution(pi)
        residual = tv_distance(balanced, mu)
        if residual <= tol:
            mu = balanced
            break
        mu = Distribution((1.0 - damping) * mu.padded(cap).mass + damping * pi)
    else:
        raise NoConvergence(
            f"stationary iteration stalled at TV residual {residual:.3g} "
            f"after {max_iter} iterations (non-contractive regime?)")

    drift = None
    if verify:
        h = stable_step(model, mu)
        frozen = MeasureFlow.constant(mu, verify_T, h)
        flow = linear_solve(model, frozen, mu, options)
        drift = w1(flow.at(flow.times.size - 1), mu)
    return StationaryResult(mu, residual, it, drift)


def stable_step(model: RateModel, mu: Distribution, t: float = 0.0,
                default: float = DEFAULT_H) -> float:
    """Largest dyadic step 2^-k <= default passing the stability guard."""
    states = np.arange(mu.cap + 1)
    a, b = model.rates_vector(t, states, mu)
    qmax = float(np.max(a + b))
    h = default
    while h * qmax > 0.8 * STABILITY_LIMIT:
        h *= 0.5
    return h


# ---------------------------------------------------------------------------
# moment bounds


def _cumulative_integral(values: np.ndarray, times: np.ndarray) -> np.ndarray:
    dt = np.diff(times)
    return np.concatenate([[0.0], np.cumsum(0.5 * (values[1:] + values[:-1]) * dt)])


def moment_check(flow: MeasureFlow, model: RateModel, p: float = 1.0,
                 constants=None, tol: float = 1e-6) -> ExperimentReport:
    """Check the exponential moment bound along a computed flow.

    For p = 1 the bound integrates the monotonicity constants against the
    birth rate at the point mass at 0; for p > 1 it integrates the
    moment-drift envelope.  Report-only: each grid node yields one point.
    """
    decl = constants if constants is not None else model.constants
    times = flow.times
    d0 = Distribution.dirac(0, flow.cap)
    if p == 1.0:
        if decl.k_state is None or decl.k_measure is None:
            raise MissingConstants("first-moment bound needs k_state and k_measure")
        rate = as_curve(decl.k_state)(times) + as_curve(decl.k_measure)(times)
        forcing = np.array([model.rates(float(t), 0, d0)[1] for t in times])
        measured = flow.means()
        start = measured[0]
    else:
        needed = (decl.drift_const, decl.drift_state, decl.drift_measure)
        if any(c is None for c in needed):
            raise MissingConstants("p-th moment bound needs the drift envelope constants")
        rate = as_curve(decl.drift_state)(times) + as_curve(decl.drift_measure)(times)
        forcing = as_curve(decl.drift_const)(times)
        measured = flow.moments(p)
        start = measured[0]
    acc = _cumulative_integral(rate, times)
    growth = np.exp(acc)
    # integral of forcing(s) * exp(acc(t) - acc(s)) ds up to each node
    damped = forcing * np.exp(-acc)
    bound = growth * (start + _cumulative_integral(damped, times))
    points = []
    for k in range(times.size):
        points.append(ReportPoint.one_sided(
            label=f"t={times[k]:.6g}", inputs={"t": float(times[k]), "p": p},
            measured=float(measured[k]), bound=float(bound[k]), tol=tol))
    return ExperimentReport.build(f"moment-p{p:g}", model.describe(), points)
