"""Numeric checkers for the standing rate-model assumptions.

The conditions quantify over all states and measures, so the checkers are
sampling-based: they evaluate the relevant inequality on a deterministic
anchor set plus seeded random tuples, fit the smallest envelope constants
that hold on every sample, and flag two kinds of trouble:

* ``declared_exceeded`` -- the model declares analytic constants and a
  sample breaks the declared bound (raised as DeclaredConstantViolation);
* ``envelope_unstable`` -- the fitted constant keeps growing with the
  scanned state range, i.e. no finite constant fits (reported, and raised
  as UnboundedGrowth by the Lyapunov checker where the contract says so).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DeclaredConstantViolation, UnboundedGrowth
from .measures import Distribution
from .metrics import w1
from .model import RateModel, as_curve

DECLARED_TOL = 1e-9
GROWTH_TOL = 1.25  # envelope considered unstable if the max grows 25% from half to full range


@dataclass(frozen=True)
class SamplePlan:
    """What the checkers scan: time nodes, state range, random tuple count."""

    t_grid: tuple = (0.0,)
    i_max: int = 40
    n_random: int = 200
    measure_cap: int = 40
    seed: int = 0


@dataclass(frozen=True)
class Violation:
    kind: str
    t: float
    i: int
    j: int
    lhs: float
    rhs: float
    detail: str = ""


@dataclass
class MonotoneCheck:
    """Result of check_H1: fitted envelope of the monotone condition."""

    t_grid: np.ndarray
    k_state_fit: np.ndarray
    k_measure_fit: np.ndarray
    violations: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def k_state_sup(self) -> float:
        return float(np.max(self.k_state_fit))

    @property
    def k_measure_sup(self) -> float:
        return float(np.max(self.k_measure_fit))


@dataclass
class LyapunovCheck:
    """Result of check_H2: weight-ratio and Lyapunov-rate envelopes."""

    t_grid: np.ndarray
    ratio_cap_fit: float
    lyapunov_rate_fit: np.ndarray
    violations: list = field(default_factory=list)
    notes: list = field(default_factory=list)


@dataclass
class MomentDriftCheck:
    """Result of check_H3: joint-Lipschitz and moment-drift envelopes."""

    t_grid: np.ndarray
    p: float
    joint_lipschitz_fit: np.ndarray
    drift_const_fit: np.ndarray
    drift_state_fit: np.ndarray
    drift_measure_fit: np.ndarray
    violations: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def joint_lipschitz_sup(self) -> float:
        return float(np.max(self.joint_lipschitz_fit))


# ---------------------------------------------------------------------------
# measure generator


def random_measure(rng: np.random.Generator, cap: int = 40) -> Distribution:
    """Seeded random mixture of point masses and truncated geometric/Poisson laws."""
    n_comp = int(rng.integers(1, 4))
    weights = rng.dirichlet(np.ones(n_comp))
    m = np.zeros(cap + 1)
    for wgt in weights:
        kind = int(rng.integers(0, 3))
        if kind == 0:
            m[int(rng.integers(0, min(cap, 20) + 1))] += wgt
        elif kind == 1:
            m += wgt * Distribution.geometric(float(rng.uniform(0.15, 0.7)), cap).mass
        else:
            m += wgt * Distribution.poisson(float(rng.uniform(0.3, 8.0)), cap).mass
    return Distribution(m / m.sum())


def _anchor_states(i_max: int) -> list[int]:
    fib = [0, 1, 2, 3, 5, 8, 13, 21, 34, 55, 89]
    return sorted({min(k, i_max) for k in fib} | {i_max, i_max // 2})


def _unstable(samples, scale_of, value_of, i_max):
    """True plus witnesses if the max of value grows >25% from half to full scan range."""
    half = [value_of(s) for s in samples if scale_of(s) <= i_max // 2]
    full = [value_of(s) for s in samples]
    if not half or not full:
        return False, []
    m_half, m_full = max(half), max(full)
    floor = max(abs(m_half), 1e-9)
    if m_full > m_half + (GROWTH_TOL - 1.0) * floor:
        witnesses = [s for s in samples
                     if scale_of(s) > i_max // 2 and value_of(s) > m_half + 1e-12]
        return True, witnesses[:5]
    return False, []


# ---------------------------------------------------------------------------
# the monotone condition


def _monotone_lhs(model, t, i, j, mu, nu):
    ai, bi = model.rates(t, i, mu)
    aj, bj = model.rates(t, j, nu)
    lhs = (bi - bj + aj - ai) * float(np.sign(i - j))
    if i == j:
        ai_nu, bi_nu = model.rates(t, i, nu)
        lhs += abs(ai - ai_nu) + abs(bi - bi_nu)
    return lhs


def check_H1(model: RateModel, plan: SamplePlan = SamplePlan()) -> MonotoneCheck:
    """Fit the smallest (k_state, k_measure) envelope of the monotone condition.

    Samples (t, i, j, mu, nu) tuples; on each, evaluates
    ``[b(i,mu)-b(j,nu)+a(j,nu)-a(i,mu)]*sgn(i-j) + (|da|+|db|)*1{i==j}``
    and fits ``lhs <= k_state*|i-j| + k_measure*W1(mu,nu)``.  Deterministic
    anchors (identical-measure state pairs; point-mass measure pairs at
    equal states) pin the fit so declared constants are recovered exactly
    on models where the envelope is tight there.
    """
    rng = np.random.default_rng(plan.seed)
    states = _anchor_states(plan.i_max)
    cap = plan.measure_cap
    d0 = Distribution.dirac(0, cap)
    t_grid = np.asarray(plan.t_grid, dtype=float)

    # samples: (t_idx, i, j, mu, nu, w1(mu, nu))
    samples = []
    for ti in range(t_grid.size):
        for i in states:
            for j in states:
                if i != j:
                    samples.append((ti, i, j, d0, d0, 0.0))
        for i in (0, 3, min(10, plan.i_max)):
            for x in states:
                for y in states:
                    if x != y:
                        mu = Distribution.dirac(x, cap)
                        nu = Distribution.dirac(y, cap)
                        samples.append((ti, i, i, mu, nu, float(abs(x - y))))
    for _ in range(plan.n_random):
        ti = int(rng.integers(0, t_grid.size))
        i = int(rng.integers(0, plan.i_max + 1))
        j = int(rng.integers(0, plan.i_max + 1))
        mu = random_measure(rng, cap)
        nu = random_measure(rng, cap)
        samples.append((ti, i, j, mu, nu, w1(mu, nu)))

    evaluated = []  # (ti, i, j, w, lhs)
    for ti, i, j, mu, nu, dist in samples:
        lhs = _monotone_lhs(model, float(t_grid[ti]), i, j, mu, nu)
        evaluated.append((ti, i, j, dist, lhs))

    k_measure_fit = np.zeros(t_grid.size)
    k_state_fit = np.full(t_grid.size, -np.inf)
    for ti in range(t_grid.size):
        eq = [(w, lhs) for t2, i, j, w, lhs in evaluated if t2 == ti and i == j and w > 0]
        if eq:
            k_measure_fit[ti] = max(0.0, max(lhs / w for w, lhs in eq))
        ne = [(abs(i - j), w, lhs) for t2, i, j, w, lhs in evaluated if t2 == ti and i != j]
        if ne:
            k_state_fit[ti] = max((lhs - k_measure_fit[ti] * w) / d for d, w, lhs in ne)
    k_state_fit[~np.isfinite(k_state_fit)] = 0.0

    result = MonotoneCheck(t_grid, k_state_fit, k_measure_fit)

    unstable, witnesses = _unstable(
        [e for e in evaluated if e[1] != e[2]],
        scale_of=lambda e: max(e[1], e[2]),
        value_of=lambda e: (e[4] - k_measure_fit[e[0]] * e[3]) / abs(e[1] - e[2]),
        i_max=plan.i_max,
    )
    if unstable:
        for ti, i, j, wdist, lhs in witnesses:
            result.violations.append(Violation(
                "envelope_unstable", float(t_grid[ti]), i, j, lhs, 0.0,
                "state-gap envelope keeps growing with the scanned range"))

    decl = model.constants
    if decl.has_monotone_pair():
        ks, km = as_curve(decl.k_state), as_curve(decl.k_measure)
        bad = []
        for ti, i, j, wdist, lhs in evaluated:
            t = float(t_grid[ti])
            rhs = float(ks(t)) * abs(i - j) + float(km(t)) * wdist
            if lhs > rhs + DECLARED_TOL:
                bad.append(Violation("declared_exceeded", t, i, j, lhs, rhs))
        if bad:
            result.violations.extend(bad)
            raise DeclaredConstantViolation(
                f"{len(bad)} sampled tuples exceed the declared monotonicity envelope", bad)

    # continuity is only checked on the scan grid, not between nodes
    if t_grid.size > 1:
        probe = [model.rates(float(t), 2, d0) for t in t_grid]
        jumps = np.abs(np.diff(np.asarray(probe), axis=0)).max()
        result.notes.append(
            f"time-continuity probed on the grid only; max node-to-node rate jump {jumps:.3g}")
    return result


# ---------------------------------------------------------------------------
# the Lyapunov / growth condition


def check_H2(model: RateModel, weight, power: float, horizon: float,
             i_max: int = 60) -> LyapunovCheck:
    """Verify the growth and Lyapunov envelope of the rates at delta_0.

    Checks, on the scanned range, that (i) the increasing weight V has a
    bounded one-step ratio V(i+1) <= c * V(i); (ii) a+b at the point mass
    at 0 is dominated by rate * V(i); (iii) the discrete drift of V**power
    under those rates is dominated by rate * V(i)**power.  Raises
    UnboundedGrowth when a fitted constant keeps growing with the range.
    """
    if power <= 1:
        raise ValueError("power must exceed 1")
    states = np.arange(i_max + 1)
    v = np.asarray(weight(np.arange(i_max + 2)), dtype=float)
    if np.any(v < 1.0) or np.any(np.diff(v) < 0):
        raise ValueError("weight must be increasing with values >= 1")
    vp = v ** power

    ratios = v[1:] / v[:-1]
    ratio_cap = float(ratios.max())
    if ratios[-1] > ratios[: i_max // 2].max() * GROWTH_TOL:
        raise UnboundedGrowth("weight ratio V(i+1)/V(i) keeps growing on the scanned range")

    t_grid = np.array([0.0]) if model.time_homogeneous else np.linspace(0.0, horizon, 9)
    d0 = Distribution.dirac(0, i_max)
    rate_fit = np.zeros(t_grid.size)
    violations: list = []
    for ti, t in enumerate(t_grid):
        a, b = model.rates_vector(float(t), states, d0)
        growth = (a + b) / v[states]
        drift = (b - a) * (vp[states + 1] - vp[states])
        second = vp[states + 1] - 2.0 * vp[states]
        second[1:] += vp[states[1:] - 1]
        # a(0) = 0 annihilates the V**power(i-1) term at the boundary
        drift = drift + a * second
        lyap = drift / vp[states]
        for name, series in (("growth", growth), ("lyapunov", lyap)):
            half = series[: i_max // 2 + 1].max()
            full = series.max()
            if full > half + (GROWTH_TOL - 1.0) * max(abs(half), 1e-9):
                raise UnboundedGrowth(
                    f"{name} envelope keeps growing on the scanned range at t={t:g} "
                    f"(half-range max {half:.3g}, full {full:.3g})")
        rate_fit[ti] = max(0.0, float(growth.max()), float(lyap.max()))

    decl = model.constants
    if decl.lyapunov_rate is not None:
        curve = as_curve(decl.lyapunov_rate)
        for ti, t in enumerate(t_grid):
            if rate_fit[ti] > float(curve(float(t))) + DECLARED_TOL:
                violations.append(Violation(
                    "declared_exceeded", float(t), -1, -1, rate_fit[ti], float(curve(float(t))),
                    "declared Lyapunov rate too small"))
    if decl.weight_ratio is not None and ratio_cap > decl.weight_ratio + DECLARED_TOL:
        violations.append(Violation(
            "declared_exceeded", 0.0, -1, -1, ratio_cap, decl.weight_ratio,
            "declared weight ratio too small"))
    if any(vi.kind == "declared_exceeded" for vi in violations):
        raise DeclaredConstantViolation("declared Lyapunov constants violated", violations)
    return LyapunovCheck(t_grid, ratio_cap, rate_fit, violations)


# ---------------------------------------------------------------------------
# the moment-drift / joint-Lipschitz condition


def _drift_lhs(model, t, i, mu, p):
    a, b = model.rates(t, i, mu)
    a_term = 0.0 if i == 0 else (i - 1.0) ** (p - 1.0) * a
    return p * ((i + 1.0) ** (p - 1.0) * b - a_term)


def _fit_linear_envelope(samples):
    """Smallest (c1, c2, c3) >= 0 with c1 + c2*x + c3*y >= g on every sample.

    ``samples`` is a list of (x, y, g) with x, y >= 0.  Minimizes c1+c2+c3
    by enumerating vertices of the (Pareto-pruned) constraint set; a final
    repair pass lifts c1 so the envelope is valid on *all* samples even if
    pruning dropped a binding constraint.
    """
    pts = np.asarray([s for s in samples if s[2] > 0], dtype=float)
    if pts.size == 0:
        return 0.0, 0.0, 0.0
    x, y, g = pts[:, 0], pts[:, 1], pts[:, 2]
    # a constraint is redundant if another needs at least as much with
    # smaller loads: x' <= x, y' <= y, g' >= g
    keep = np.ones(len(pts), dtype=bool)
    for k in range(len(pts)):
        dom = (x <= x[k]) & (y <= y[k]) & (g >= g[k])
        dom[k] = False
        if np.any(dom & ((x < x[k]) | (y < y[k]) | (g > g[k]))):
            keep[k] = False
    pruned = pts[keep]
    if len(pruned) > 24:
        order = np.argsort(-pruned[:, 2] / (1.0 + pruned[:, 0] + pruned[:, 1]))
        pruned = pruned[order[:24]]

    # vertex planes: one row per kept constraint plus the three c_k = 0 bounds
    rows = [np.array([1.0, px, py, pg]) for px, py, pg in pruned]
    rows += [np.array([1.0, 0.0, 0.0, 0.0]),
             np.array([0.0, 1.0, 0.0, 0.0]),
             np.array([0.0, 0.0, 1.0, 0.0])]
    best = np.array([float(g.max()), 0.0, 0.0])  # always feasible fallback

    def feasible(c):
        return np.all(c >= -1e-12) and np.all(c[0] + c[1] * x + c[2] * y >= g - 1e-9)

    n = len(rows)
    for i1 in range(n):
        for i2 in range(i1 + 1, n):
            for i3 in range(i2 + 1, n):
                mat = np.array([rows[i1][:3], rows[i2][:3], rows[i3][:3]])
                if abs(np.linalg.det(mat)) < 1e-12:
                    continue
                rhs = np.array([rows[i1][3], rows[i2][3], rows[i3][3]])
                c = np.linalg.solve(mat, rhs)
                if feasible(c) and c.sum() < best.sum():
                    best = c
    best = np.clip(best, 0.0, None)
    slack = g - (best[0] + best[1] * x + best[2] * y)
    worst = float(slack.max())
    if worst > 0:
        best[0] += worst
    return float(best[0]), float(best[1]), float(best[2])


def check_H3(model: RateModel, p: float, plan: SamplePlan = SamplePlan()) -> MomentDriftCheck:
    """Fit the moment-drift and joint-Lipschitz envelopes for exponent p.

    Drift:  p[(i+1)^(p-1) b(i,mu) - (i-1)^(p-1) a(i,mu)]
            <= drift_const + drift_state*i^p + drift_measure*mean(mu)^p.
    Joint:  |a(i,mu)-a(j,nu)| + |b(i,mu)-b(j,nu)|
            <= joint_lipschitz * (|i-j| + W1(mu,nu)).
    """
    if p <= 1:
        raise ValueError("p must exceed 1")
    rng = np.random.default_rng(plan.seed + 1)
    cap = plan.measure_cap
    d0 = Distribution.dirac(0, cap)
    t_grid = np.asarray(plan.t_grid, dtype=float)
    states = np.arange(plan.i_max + 1)

    # random measures reused across t-nodes (deterministic under the seed)
    measures = [random_measure(rng, cap) for _ in range(max(8, plan.n_random // 8))]
    pair_states = _anchor_states(plan.i_max)

    drift_const = np.zeros(t_grid.size)
    drift_state = np.zeros(t_grid.size)
    drift_measure = np.zeros(t_grid.size)
    joint = np.zeros(t_grid.size)
    violations: list = []

    # point masses across the state range anchor the extreme means; for
    # rates affine in the mean this pins the fitted plane on all of them
    dirac_anchors = [Distribution.dirac(k, cap) for k in _anchor_states(min(plan.i_max, cap))]

    for ti, t in enumerate(t_grid):
        t = float(t)
        drift_samples = [(float(i) ** p, 0.0, _drift_lhs(model, t, int(i), d0, p))
                         for i in states]
        for mu in dirac_anchors:
            m = mu.mean()
            for i in states:
                drift_samples.append((float(i) ** p, m ** p, _drift_lhs(model, t, int(i), mu, p)))
        for mu in measures:
            m = mu.mean()
            for i in pair_states:
                drift_samples.append((float(i) ** p, m ** p, _drift_lhs(model, t, i, mu, p)))
        c1, c2, c3 = _fit_linear_envelope(drift_samples)
        drift_const[ti], drift_state[ti], drift_measure[ti] = c1, c2, c3

        # stability: refit on the lower half of the state range and see
        # whether the upper half breaks that envelope by a margin
        half_fit = _fit_linear_envelope(
            [s for s in drift_samples if s[0] <= (plan.i_max // 2) ** p])
        for xs, ys, gs in drift_samples:
            bound = half_fit[0] + half_fit[1] * xs + half_fit[2] * ys
            if gs > GROWTH_TOL * max(bound, 1e-9):
                violations.append(Violation(
                    "envelope_unstable", t, int(round(xs ** (1.0 / p))), -1, gs, bound,
                    "moment-drift envelope fitted on the lower half fails above it"))
                break

        # joint Lipschitz over state pairs and measure pairs
        ratios = []
        for i in pair_states:
            ai, bi = model.rates(t, i, d0)
            for j in pair_states:
                if j <= i:
                    continue
                aj, bj = model.rates(t, j, d0)
                ratios.append((max(i, j), (abs(ai - aj) + abs(bi - bj)) / (j - i)))
        for k in range(0, len(measures) - 1, 2):
            mu, nu = measures[k], measures[k + 1]
            dist = w1(mu, nu)
            if dist <= 0:
                continue
            i = int(rng.integers(0, plan.i_max + 1))
            ai, bi = model.rates(t, i, mu)
            aj, bj = model.rates(t, i, nu)
            ratios.append((i, (abs(ai - aj) + abs(bi - bj)) / dist))
        joint[ti] = max(r for _, r in ratios)
        half_r = max(r for s, r in ratios if s <= plan.i_max // 2)
        if joint[ti] > half_r + (GROWTH_TOL - 1.0) * max(abs(half_r), 1e-9):
            violations.append(Violation(
                "envelope_unstable", t, -1, -1, joint[ti], half_r,
                "joint Lipschitz envelope keeps growing with the scanned range"))

    result = MomentDriftCheck(t_grid, p, joint, drift_const, drift_state, drift_measure,
                              violations)

    decl = model.constants
    declared_bad = []
    if decl.drift_const is not None and decl.drift_state is not None \
            and decl.drift_measure is not None:
        c1, c2, c3 = (as_curve(decl.drift_const), as_curve(decl.drift_state),
                      as_curve(decl.drift_measure))
        for ti, t in enumerate(t_grid):
            t = float(t)
            for mu in [d0] + measures:
                m = mu.mean()
                for i in pair_states:
                    lhs = _drift_lhs(model, t, i, mu, p)
                    rhs = float(c1(t)) + float(c2(t)) * i ** p + float(c3(t)) * m ** p
                    if lhs > rhs + DECLARED_TOL:
                        declared_bad.append(Violation("declared_exceeded", t, i, -1, lhs, rhs))
    if decl.joint_lipschitz is not None:
        beta = as_curve(decl.joint_lipschitz)
        for ti, t in enumerate(t_grid):
            if joint[ti] > float(beta(float(t))) + DECLARED_TOL:
                declared_bad.append(Violation(
                    "declared_exceeded", float(t), -1, -1, joint[ti], float(beta(float(t))),
                    "declared joint Lipschitz constant too small"))
    if declared_bad:
        result.violations.extend(declared_bad)
        raise DeclaredConstantViolation(
            f"{len(declared_bad)} sampled tuples exceed declared moment-drift constants",
            declared_bad)
    return result
