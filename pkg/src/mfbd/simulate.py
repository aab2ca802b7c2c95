"""Exact-in-law stochastic simulation.

Single paths are simulated against a precomputed measure flow by thinning:
the flow is read piecewise-constant at the left node of each grid window,
so within a window the rates vary only through explicit time dependence.
For time-homogeneous models the dominating rate is exact and thinning
degenerates to the Gillespie algorithm (every proposal accepted).

Couplings run six channels per coordinate pair (synchronized birth/death
at the minimum of the two rates, single-sided moves at the rate surplus),
which preserves both marginals.  Particle systems read the empirical
measure of the current configuration and update its cached mean in O(1)
per event.

Determinism: every replica owns a generator spawned from the master seed,
so results are byte-identical for any worker count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DominationFailure, RateOverflow, SimulationError, SizeMismatch
from .measures import Distribution
from .model import RateModel
from .solver import MeasureFlow, _MassView

SAFETY = 1.05                    # dominating-rate margin for time-varying windows
DOMINATION_SLACK = 1.0 + 1e-9
DEFAULT_RATE_CEILING = 1e7
MOMENT_RECHECK_EVERY = 1_000_000
MOMENT_DRIFT_GUARD = 1e-9

CHANNEL_NAMES = ("sync-birth", "sync-death", "x-birth", "y-birth", "x-death", "y-death")
SYNC_BIRTH, SYNC_DEATH, X_BIRTH, Y_BIRTH, X_DEATH, Y_DEATH = range(6)
_MOVES = np.array([[1, 1], [-1, -1], [1, 0], [0, 1], [-1, 0], [0, -1]])


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def replica_seeds(master_seed: int, n: int):
    return np.random.SeedSequence(master_seed).spawn(n)


# ---------------------------------------------------------------------------
# paths


@dataclass
class JumpPath:
    """Piecewise-constant integer trajectory recorded as (event time, new state)."""

    x0: int
    times: np.ndarray
    states: np.ndarray
    horizon: float
    proposals: int = 0
    rejections: int = 0

    def state_at(self, t: float) -> int:
        k = int(np.searchsorted(self.times, t, side="right"))
        return self.x0 if k == 0 else int(self.states[k - 1])

    @property
    def final_state(self) -> int:
        return self.x0 if self.states.size == 0 else int(self.states[-1])

    def validate(self):
        if self.times.size:
            if not np.all(np.diff(self.times) > 0):
                raise SimulationError("event times must be strictly increasing")
            if self.times[0] <= 0 or self.times[-1] > self.horizon:
                raise SimulationError("event times must lie in (0, horizon]")
            steps = np.diff(np.concatenate([[self.x0], self.states]))
            if not np.all(np.abs(steps) == 1):
                raise SimulationError("each event must move the state by exactly 1")


@dataclass
class CoupledPath:
    """Paired trajectory on Z+ x Z+ with one channel tag per event."""

    x0: int
    y0: int
    times: np.ndarray
    xs: np.ndarray
    ys: np.ndarray
    channels: np.ndarray
    horizon: float

    def state_at(self, t: float) -> tuple[int, int]:
        k = int(np.searchsorted(self.times, t, side="right"))
        if k == 0:
            return self.x0, self.y0
        return int(self.xs[k - 1]), int(self.ys[k - 1])

    def marginal(self, side: str) -> JumpPath:
        vals = self.xs if side == "x" else self.ys
        start = self.x0 if side == "x" else self.y0
        prev = np.concatenate([[start], vals[:-1]]) if vals.size else np.array([])
        moved = vals != prev
        return JumpPath(start, self.times[moved], vals[moved], self.horizon)


@dataclass
class ParticleState:
    """Configuration of an N-particle system with a cached empirical mean."""

    x: np.ndarray
    events: int = 0
    _mean: float = field(default=None, repr=False)

    def __post_init__(self):
        # always copy: the state mutates in place during simulation and the
        # caller's initial configuration may be shared across replicas
        self.x = np.array(self.x, dtype=np.int64)
        if self._mean is None:
            self._mean = float(self.x.mean())

    @property
    def n(self) -> int:
        return self.x.size

    def mean(self) -> float:
        return self._mean

    def bump(self, idx: int, delta: int):
        self.x[idx] += delta
        self._mean += delta / self.x.size
        self.events += 1
        if self.events % MOMENT_RECHECK_EVERY == 0:
            exact = float(self.x.mean())
            if abs(exact - self._mean) > MOMENT_DRIFT_GUARD:
                raise SimulationError(
                    f"cached empirical mean drifted by {abs(exact - self._mean):.3g}")
            self._mean = exact

    def empirical(self, cap: int | None = None) -> Distribution:
        cap = int(self.x.max()) if cap is None else cap
        counts = np.bincount(self.x, minlength=cap + 1).astype(float)
        return Distribution(counts / self.x.size)


class _ParticleView:
    """Measure view of a particle configuration: O(1) mean, lazy histogram."""

    __slots__ = ("state",)

    def __init__(self, state: ParticleState):
        self.state = state

    def mean(self) -> float:
        return self.state.mean()

    @property
    def mass(self) -> np.ndarray:
        return self.state.empirical().mass


# ---------------------------------------------------------------------------
# window iteration helpers


def _flow_windows(flow: MeasureFlow, T: float):
    """(start, end, node index) triples covering [0, T] on the flow grid."""
    if flow.horizon < T - 1e-9:
        raise ValueError(f"flow horizon {flow.horizon} does not cover T={T}")
    if flow.is_constant:
        return [(0.0, T, 0)]
    times = flow.times
    windows = []
    k = 0
    while times[k + 1] <= 1e-15:
        k += 1
    t = 0.0
    while t < T - 1e-15:
        end = min(float(times[k + 1]), T) if k + 1 < times.size else T
        windows.append((t, end, k))
        t = end
        k = min(k + 1, times.size - 2)
    return windows


def _node_views(flow: MeasureFlow):
    return [_MassView(flow.masses[k]) for k in range(flow.times.size)]


# ---------------------------------------------------------------------------
# single path against a frozen flow


def simulate_frozen(model: RateModel, flow: MeasureFlow, x0: int, T: float,
                    seed) -> JumpPath:
    """Simulate the inhomogeneous birth-death process with rates read
    from ``flow`` (piecewise-constant left-node lookup) by thinning.

    Within each window the dominating rate is the window-endpoint maximum
    (exact for time-homogeneous models, inflated by a safety factor
    otherwise); DominationFailure signals a rate exceeding its bound,
    e.g. a discontinuous tabulated multiplier.
    """
    rng = as_rng(seed)
    views = _node_views(flow)
    homogeneous = model.time_homogeneous
    t, i = 0.0, int(x0)
    ev_t, ev_s = [], []
    proposals = rejections = 0
    state_arr = np.empty(1, dtype=np.int64)

    def rates(tt, state, view):
        state_arr[0] = state
        a, b = model.rates_vector(tt, state_arr, view)
        return float(a[0]), float(b[0])

    for w_start, w_end, node in _flow_windows(flow, T):
        view = views[node]
        t = w_start
        while t < w_end - 1e-15:
            a_now, b_now = rates(t, i, view)
            q_now = a_now + b_now
            if homogeneous:
                lam = q_now
            else:
                a_e, b_e = rates(w_end, i, view)
                lam = SAFETY * max(q_now, a_e + b_e)
            if lam <= 0.0:
                break
            dt = rng.exponential(1.0 / lam)
            if t + dt >= w_end:
                break
            t += dt
            if homogeneous:
                a_t, b_t = a_now, b_now
            else:
                a_t, b_t = rates(t, i, view)
            q_t = a_t + b_t
            if q_t > lam * DOMINATION_SLACK:
                raise DominationFailure(
                    f"rate {q_t:.6g} exceeds window bound {lam:.6g} at t={t:.6g} "
                    f"(discontinuous rate curve?)")
            proposals += 1
            u = rng.random() * lam
            if u >= q_t:
                rejections += 1
                continue
            i += -1 if u < a_t else 1
            ev_t.append(t)
            ev_s.append(i)
    return JumpPath(int(x0), np.asarray(ev_t), np.asarray(ev_s, dtype=np.int64), T,
                    proposals, rejections)


# ---------------------------------------------------------------------------
# synchronized coupling of two single processes


def simulate_coupling(model: RateModel, flow_x: MeasureFlow, flow_y: MeasureFlow,
                      x0: int, y0: int, T: float, seed) -> CoupledPath:
    """Six-channel synchronized coupling of two frozen-flow processes.

    Channels: joint birth/death at the minimum of the two rates, plus
    single-sided moves at the positive/negative parts of the differences.
    Each marginal is distributed as the corresponding single process.
    """
    rng = as_rng(seed)
    views_x = _node_views(flow_x)
    views_y = _node_views(flow_y)
    if flow_x.times.size != flow_y.times.size or not np.allclose(flow_x.times, flow_y.times):
        raise ValueError("coupled flows must share their grid")
    homogeneous = model.time_homogeneous
    x, y = int(x0), int(y0)
    ev_t, ev_x, ev_y, ev_c = [], [], [], []
    state_arr = np.empty(1, dtype=np.int64)

    def channel_rates(tt, xx, yy, vx, vy):
        state_arr[0] = xx
        ax, bx = model.rates_vector(tt, state_arr, vx)
        state_arr[0] = yy
        ay, by = model.rates_vector(tt, state_arr, vy)
        ax, bx, ay, by = float(ax[0]), float(bx[0]), float(ay[0]), float(by[0])
        db, da = bx - by, ax - ay
        return np.array([min(bx, by), min(ax, ay),
                         max(db, 0.0), max(-db, 0.0),
                         max(da, 0.0), max(-da, 0.0)])

    for w_start, w_end, node in _flow_windows(flow_x, T):
        vx, vy = views_x[node], views_y[node]
        t = w_start
        while t < w_end - 1e-15:
            c_now = channel_rates(t, x, y, vx, vy)
            q_now = float(c_now.sum())
            if homogeneous:
                lam = q_now
            else:
                lam = SAFETY * max(q_now, float(channel_rates(w_end, x, y, vx, vy).sum()))
            if lam <= 0.0:
                break
            dt = rng.exponential(1.0 / lam)
            if t + dt >= w_end:
                break
            t += dt
            c_t = c_now if homogeneous else channel_rates(t, x, y, vx, vy)
            q_t = float(c_t.sum())
            if q_t > lam * DOMINATION_SLACK:
                raise DominationFailure(
                    f"coupled rate {q_t:.6g} exceeds window bound {lam:.6g} at t={t:.6g}")
            u = rng.random() * lam
            if u >= q_t:
                continue
            ch = int(np.searchsorted(np.cumsum(c_t), u, side="right"))
            x += int(_MOVES[ch, 0])
            y += int(_MOVES[ch, 1])
            ev_t.append(t)
            ev_x.append(x)
            ev_y.append(y)
            ev_c.append(ch)
    return CoupledPath(int(x0), int(y0), np.asarray(ev_t),
                       np.asarray(ev_x, dtype=np.int64), np.asarray(ev_y, dtype=np.int64),
                       np.asarray(ev_c, dtype=np.int64), T)


def comonotone_initial(mu: Distribution, nu: Distribution, rng) -> tuple[int, int]:
    """Draw (X0, Y0) from the quantile coupling, which attains W1 in 1-D."""
    u = rng.random()
    x = int(np.searchsorted(mu.cdf(), u, side="left"))
    y = int(np.searchsorted(nu.cdf(), u, side="left"))
    return min(x, mu.cap), min(y, nu.cap)


# ---------------------------------------------------------------------------
# mean-field particle system


@dataclass
class ParticleRun:
    final: ParticleState
    events: list                     # sparse log: (t, coordinate, delta)
    snapshots: dict                  # checkpoint time -> copy of the state vector


def simulate_particles(model: RateModel, N: int, init_sampler, T: float, seed,
                       checkpoints=(), window: float = 1.0 / 64.0,
                       rate_ceiling: float = DEFAULT_RATE_CEILING) -> ParticleRun:
    """Event-driven simulation of the N-particle mean-field system.

    Per-particle rates read the empirical measure of the configuration.
    Time-homogeneous models use exact Gillespie steps (rates change only
    at events); time-dependent models are thinned on fixed windows.
    ``init_sampler(rng, N)`` draws the initial configuration.
    """
    rng = as_rng(seed)
    state = ParticleState(np.asarray(init_sampler(rng, N), dtype=np.int64))
    view = _ParticleView(state)
    homogeneous = model.time_homogeneous
    checkpoints = sorted(checkpoints)
    next_cp = 0
    snapshots = {}
    events = []
    t = 0.0

    def total_rates(tt):
        a, b = model.rates_vector(tt, state.x, view)
        return a, b

    while True:
        w_end = T if homogeneous else min(T, (np.floor(t / window + 1e-12) + 1) * window)
        while t < w_end - 1e-15:
            a, b = total_rates(t)
            q_now = float(a.sum() + b.sum())
            if q_now > rate_ceiling:
                raise RateOverflow(f"total rate {q_now:.3g} exceeds ceiling {rate_ceiling:.3g}")
            if homogeneous:
                lam = q_now
            else:
                a_e, b_e = total_rates(w_end)
                lam = SAFETY * max(q_now, float(a_e.sum() + b_e.sum()))
            if lam <= 0.0:
                t = w_end
                break
            dt = rng.exponential(1.0 / lam)
            t_next = t + dt
            while next_cp < len(checkpoints) and checkpoints[next_cp] < min(t_next, w_end) + 1e-15:
                snapshots[checkpoints[next_cp]] = state.x.copy()
                next_cp += 1
            if t_next >= w_end:
                t = w_end
                break
            t = t_next
            if not homogeneous:
                a, b = total_rates(t)
            q_t = float(a.sum() + b.sum())
            if q_t > lam * DOMINATION_SLACK:
                raise DominationFailure(
                    f"particle rate {q_t:.6g} exceeds window bound {lam:.6g} at t={t:.6g}")
            u = rng.random() * lam
            if u >= q_t:
                continue
            cum = np.cumsum(np.concatenate([a, b]))
            ch = int(np.searchsorted(cum, u, side="right"))
            if ch < state.n:
                state.bump(ch, -1)
                events.append((t, ch, -1))
            else:
                state.bump(ch - state.n, +1)
                events.append((t, ch - state.n, +1))
        if t >= T - 1e-15:
            break
    while next_cp < len(checkpoints):
        snapshots[checkpoints[next_cp]] = state.x.copy()
        next_cp += 1
    return ParticleRun(state, events, snapshots)


def iid_sampler(mu: Distribution):
    """Initial sampler drawing N i.i.d. particles from mu."""
    return _IIDSampler(mu)


class _IIDSampler:
    def __init__(self, mu: Distribution):
        self.mu = mu

    def __call__(self, rng, n):
        return self.mu.sample(rng, n)


class _FixedSampler:
    def __init__(self, vector):
        self.vector = np.asarray(vector, dtype=np.int64)

    def __call__(self, rng, n):
        if n != self.vector.size:
            raise SizeMismatch(f"fixed initial vector has size {self.vector.size}, not {n}")
        return self.vector.copy()


def fixed_sampler(vector):
    """Initial sampler returning a deterministic configuration."""
    return _FixedSampler(vector)


# ---------------------------------------------------------------------------
# coupled 2N-coordinate systems


@dataclass
class CoupledParticlesRun:
    final_x: ParticleState
    final_y: ParticleState
    snapshots: dict                  # checkpoint time -> (x copy, y copy)


def _coupled_particles(model: RateModel, x_init: np.ndarray, y_init: np.ndarray,
                       T: float, rng, y_view_at, windows, checkpoints,
                       rate_ceiling: float) -> CoupledParticlesRun:
    """Shared engine: particle system X coupled coordinatewise to a second
    system Y whose rates read ``y_view_at(node, y_state)``."""
    sx = ParticleState(x_init)
    sy = ParticleState(y_init)
    vx = _ParticleView(sx)
    homogeneous = model.time_homogeneous
    checkpoints = sorted(checkpoints)
    next_cp = 0
    snapshots = {}

    def channel_matrix(tt, node):
        ax, bx = model.rates_vector(tt, sx.x, vx)
        ay, by = model.rates_vector(tt, sy.x, y_view_at(node, sy))
        db, da = bx - by, ax - ay
        return np.vstack([np.minimum(bx, by), np.minimum(ax, ay),
                          np.clip(db, 0.0, None), np.clip(-db, 0.0, None),
                          np.clip(da, 0.0, None), np.clip(-da, 0.0, None)])

    t = 0.0
    for w_start, w_end, node in windows:
        t = max(t, w_start)
        while t < w_end - 1e-15:
            c_now = channel_matrix(t, node)
            q_now = float(c_now.sum())
            if q_now > rate_ceiling:
                raise RateOverflow(f"total rate {q_now:.3g} exceeds ceiling {rate_ceiling:.3g}")
            if homogeneous:
                lam = q_now
            else:
                lam = SAFETY * max(q_now, float(channel_matrix(w_end, node).sum()))
            if lam <= 0.0:
                break
            dt = rng.exponential(1.0 / lam)
            t_next = t + dt
            while next_cp < len(checkpoints) and checkpoints[next_cp] < min(t_next, w_end) + 1e-15:
                snapshots[checkpoints[next_cp]] = (sx.x.copy(), sy.x.copy())
                next_cp += 1
            if t_next >= w_end:
                break
            t = t_next
            c_t = c_now if homogeneous else channel_matrix(t, node)
            q_t = float(c_t.sum())
            if q_t > lam * DOMINATION_SLACK:
                raise DominationFailure(
                    f"coupled particle rate {q_t:.6g} exceeds bound {lam:.6g} at t={t:.6g}")
            u = rng.random() * lam
            if u >= q_t:
                continue
            flat = int(np.searchsorted(np.cumsum(c_t.ravel()), u, side="right"))
            ch, l = divmod(flat, sx.n)
            dx, dy = int(_MOVES[ch, 0]), int(_MOVES[ch, 1])
            if dx:
                sx.bump(l, dx)
            if dy:
                sy.bump(l, dy)
        t = w_end
    while next_cp < len(checkpoints):
        snapshots[checkpoints[next_cp]] = (sx.x.copy(), sy.x.copy())
        next_cp += 1
    return CoupledParticlesRun(sx, sy, snapshots)


def simulate_particle_coupling(model: RateModel, N: int, mu0: Distribution,
                               flow: MeasureFlow, T: float, seed, checkpoints=(),
                               rate_ceiling: float = DEFAULT_RATE_CEILING) -> CoupledParticlesRun:
    """Couple the N-particle system with N independent copies of the
    frozen-flow process, both started from the same i.i.d. draw from mu0.

    Per coordinate, six channels pair the particle rates (read from the
    empirical measure) with the copy rates (read from the flow).
    """
    rng = as_rng(seed)
    x0 = mu0.sample(rng, N).astype(np.int64)
    views = _node_views(flow)
    windows = _flow_windows(flow, T)
    return _coupled_particles(model, x0, x0.copy(), T, rng,
                              lambda node, sy: views[node], windows, checkpoints,
                              rate_ceiling)


def simulate_particle_pair(model: RateModel, x_init, y_init, T: float, seed,
                           checkpoints=(), window: float = 1.0 / 64.0,
                           rate_ceiling: float = DEFAULT_RATE_CEILING) -> CoupledParticlesRun:
    """Couple two N-particle systems coordinatewise (six channels each),
    both reading their own empirical measures."""
    rng = as_rng(seed)
    x0 = np.asarray(x_init, dtype=np.int64)
    y0 = np.asarray(y_init, dtype=np.int64)
    if x0.shape != y0.shape:
        raise SizeMismatch("paired initial configurations must have equal size")
    if model.time_homogeneous:
        windows = [(0.0, T, 0)]
    else:
        edges = np.arange(0.0, T + window, window)
        windows = [(float(edges[k]), float(min(edges[k + 1], T)), 0)
                   for k in range(edges.size - 1) if edges[k] < T - 1e-15]
    return _coupled_particles(model, x0, y0, T, rng,
                              lambda node, sy: _ParticleView(sy), windows, checkpoints,
                              rate_ceiling)


# ---------------------------------------------------------------------------
# replica fan-out


def _dispatch(payload):
    fn, common, idx, seed_seq = payload
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    return idx, fn(common, rng)


def run_replicas(fn, common, n_replicas: int, master_seed: int, workers: int = 1):
    """Run ``fn(common, rng)`` for each replica with a spawned generator.

    ``fn`` must be a module-level function and ``common`` picklable when
    workers > 1.  Results come back ordered by replica index, so any
    reduction over them is independent of the worker count.
    """
    seeds = replica_seeds(master_seed, n_replicas)
    payloads = [(fn, common, k, seeds[k]) for k in range(n_replicas)]
    if workers <= 1:
        results = [_dispatch(p) for p in payloads]
    else:
        chunk = max(1, n_replicas // (workers * 8))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_dispatch, payloads, chunksize=chunk))
    results.sort(key=lambda pair: pair[0])
    return [res for _, res in results]
