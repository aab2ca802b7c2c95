"""Stochastic simulators: structure invariants, law agreement, determinism."""

import math

import numpy as np
import pytest

from mfbd import (AffineMeanField, Distribution, DominationFailure, MeasureFlow,
                  RateOverflow, TimeCurve, TimeModulated, comonotone_initial,
                  direct_nonlinear_solve, empirical_w1_scale, fixed_sampler,
                  iid_sampler, linear_solve, rate_model, replica_seeds, run_replicas,
                  simulate_coupling, simulate_frozen, simulate_particle_coupling,
                  simulate_particle_pair, simulate_particles, w1)
from mfbd.simulate import ParticleState

D0 = Distribution.dirac(0, 0)


def empirical_from(values, cap):
    counts = np.bincount(np.asarray(values, dtype=int), minlength=cap + 1).astype(float)
    return Distribution(counts / len(values))


def rngs(seed, n):
    return [np.random.Generator(np.random.PCG64(s)) for s in replica_seeds(seed, n)]


def test_zero_rates_no_events(zero_rates):
    flow = MeasureFlow.constant(Distribution.dirac(3, 5), 2.0, 1 / 8)
    path = simulate_frozen(zero_rates, flow, 3, 2.0, 1)
    assert path.times.size == 0
    assert path.final_state == 3


def test_path_structure_and_thinning_degeneracy(pure_birth_death):
    flow = MeasureFlow.constant(Distribution.dirac(0, 30), 4.0, 1 / 4)
    for rng in rngs(7, 25):
        path = simulate_frozen(pure_birth_death, flow, 0, 4.0, rng)
        path.validate()
        # time-homogeneous + constant flow: pure Gillespie, no rejections
        assert path.rejections == 0
        states = np.concatenate([[path.x0], path.states])
        assert states.min() >= 0


def test_frozen_law_matches_stationary_oracle(pure_birth_death):
    flow = MeasureFlow.constant(Distribution.dirac(0, 40), 5.0, 1 / 4)
    finals = [simulate_frozen(pure_birth_death, flow, 0, 5.0, rng).final_state
              for rng in rngs(123, 12000)]
    pois = Distribution.poisson(2.0, 40)
    scale = empirical_w1_scale(pois, len(finals))
    assert w1(empirical_from(finals, 40), pois) <= 3.0 * scale


def test_frozen_law_matches_linear_solve(affine):
    flow = direct_nonlinear_solve(affine, D0, 1.0).downsample(8)
    finals = [simulate_frozen(affine, flow, 0, 1.0, rng).final_state
              for rng in rngs(5, 8000)]
    target = flow.at(flow.times.size - 1)
    scale = empirical_w1_scale(target, len(finals))
    assert w1(empirical_from(finals, flow.cap), target) <= 3.0 * scale + 2.0 * flow.h


def test_domination_failure_on_discontinuous_curve(affine):
    # multiplier spikes strictly inside a lookup window
    nodes = [0.0, 0.124, 0.125, 0.1875, 0.25, 1.0]
    vals = [1.0, 1.0, 30.0, 30.0, 1.0, 1.0]
    spiky = TimeModulated(affine, TimeCurve(nodes, vals))
    flow = MeasureFlow.constant(Distribution.dirac(5, 20), 1.0, 1 / 4)
    with pytest.raises(DominationFailure):
        for rng in rngs(11, 50):
            simulate_frozen(spiky, flow, 5, 1.0, rng)


def test_coupling_collapses_on_diagonal(affine):
    flow = direct_nonlinear_solve(affine, D0, 1.0).downsample(8)
    path = simulate_coupling(affine, flow, flow, 3, 3, 1.0, 21)
    assert np.array_equal(path.xs, path.ys)
    assert set(np.unique(path.channels)) <= {0, 1}


def test_coupling_marginal_structure(affine):
    flow_x = direct_nonlinear_solve(affine, D0, 1.0).downsample(8)
    flow_y = direct_nonlinear_solve(affine, Distribution.dirac(4, 4), 1.0).downsample(8)
    for rng in rngs(3, 20):
        path = simulate_coupling(affine, flow_x, flow_y, 0, 4, 1.0, rng)
        path.marginal("x").validate()
        path.marginal("y").validate()


def test_coupling_pathwise_contraction(affine):
    flow_x = direct_nonlinear_solve(affine, D0, 2.0).downsample(8)
    flow_y = direct_nonlinear_solve(affine, Distribution.dirac(4, 4), 2.0).downsample(8)
    cps = (0.5, 1.0, 2.0)
    gaps = {t: [] for t in cps}
    for rng in rngs(17, 4000):
        path = simulate_coupling(affine, flow_x, flow_y, 0, 4, 2.0, rng)
        for t in cps:
            x, y = path.state_at(t)
            gaps[t].append(abs(x - y))
    for t in cps:
        vals = np.asarray(gaps[t], dtype=float)
        bound = 4.0 * math.exp(-0.5 * t)
        stderr = vals.std(ddof=1) / math.sqrt(vals.size)
        assert vals.mean() <= bound * 1.02 + 3.0 * stderr


def test_comonotone_initial_attains_w1():
    mu = Distribution.from_masses([0.5, 0.0, 0.5])
    nu = Distribution.dirac(1, 2)
    rng = np.random.default_rng(0)
    gaps = [abs(a - b) for a, b in (comonotone_initial(mu, nu, rng) for _ in range(4000))]
    assert np.mean(gaps) == pytest.approx(w1(mu, nu), abs=0.05)


def test_particles_zero_rates(zero_rates):
    run = simulate_particles(zero_rates, 16, fixed_sampler(np.arange(16)), 1.0, 3)
    assert np.array_equal(run.final.x, np.arange(16))
    assert not run.events


def test_particles_reduce_to_single_chain(pure_birth_death):
    # N=1 without measure dependence is the plain birth-death chain
    flow = linear_solve(pure_birth_death, MeasureFlow.constant(D0, 1.0), D0)
    finals = [simulate_particles(pure_birth_death, 1, fixed_sampler([0]), 1.0, rng)
              .final.x[0] for rng in rngs(29, 6000)]
    target = flow.at(flow.times.size - 1)
    scale = empirical_w1_scale(target, len(finals))
    assert w1(empirical_from(finals, flow.cap), target) <= 3.0 * scale


def test_particles_mean_field_moment(affine):
    means = [simulate_particles(affine, 512, iid_sampler(D0), 1.0, rng,
                                checkpoints=(1.0,)).snapshots[1.0].mean()
             for rng in rngs(41, 48)]
    vals = np.asarray(means)
    expect = 2.0 * (1.0 - math.exp(-0.5))
    stderr = vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(vals.mean() - expect) <= 3.0 * stderr


def test_particle_event_log_determinism(affine):
    runs = [simulate_particles(affine, 32, iid_sampler(Distribution.poisson(1.0, 12)),
                               1.0, 777) for _ in range(2)]
    assert runs[0].events == runs[1].events
    assert np.array_equal(runs[0].final.x, runs[1].final.x)


def test_moment_cache_guard(affine, monkeypatch):
    import mfbd.simulate as sim
    monkeypatch.setattr(sim, "MOMENT_RECHECK_EVERY", 64)
    run = simulate_particles(affine, 64, iid_sampler(D0), 1.0, 9)
    assert run.final.events > 64  # the guard actually ran and healed the cache
    exact = float(run.final.x.mean())
    assert abs(run.final.mean() - exact) <= 1e-9


def test_rate_ceiling(affine):
    explosive = rate_model(lambda t, i, mu: 0.0, lambda t, i, mu: 100.0 + 10.0 * i,
                           name="explosive", vectorized=False)
    with pytest.raises(RateOverflow):
        simulate_particles(explosive, 64, fixed_sampler(np.zeros(64, dtype=int)), 5.0, 13,
                           rate_ceiling=5e3)


def test_particle_coupling_identity_for_independent_model(pure_birth_death):
    flow = linear_solve(pure_birth_death, MeasureFlow.constant(D0, 1.0), D0).downsample(16)
    run = simulate_particle_coupling(pure_birth_death, 32, D0, flow, 1.0, 15,
                                     checkpoints=(0.5, 1.0))
    for x, y in run.snapshots.values():
        assert np.array_equal(x, y)


def test_particle_coupling_y_marginal_matches_flow(affine):
    flow = direct_nonlinear_solve(affine, D0, 1.0).downsample(8)
    pool = []
    for rng in rngs(19, 400):
        run = simulate_particle_coupling(affine, 16, D0, flow, 1.0, rng,
                                         checkpoints=(1.0,))
        pool.extend(run.snapshots[1.0][1])
    target = flow.at(flow.times.size - 1)
    scale = empirical_w1_scale(target, len(pool))
    assert w1(empirical_from(pool, flow.cap), target) <= 3.0 * scale + 2.0 * flow.h


def test_particle_pair_identical_inputs(affine):
    run = simulate_particle_pair(affine, np.full(16, 2), np.full(16, 2), 1.0, 23,
                                 checkpoints=(0.5, 1.0))
    for x, y in run.snapshots.values():
        assert np.array_equal(x, y)


def test_particle_pair_contraction(affine):
    cps = (0.5, 1.0, 2.0)
    rhos = {t: [] for t in cps}
    for rng in rngs(37, 300):
        run = simulate_particle_pair(affine, np.zeros(32, dtype=int), np.full(32, 2),
                                     2.0, rng, checkpoints=cps)
        for t in cps:
            x, y = run.snapshots[t]
            rhos[t].append(np.abs(x - y).mean())
    for t in cps:
        vals = np.asarray(rhos[t])
        stderr = vals.std(ddof=1) / math.sqrt(vals.size)
        assert vals.mean() <= 2.0 * math.exp(-0.5 * t) + 3.0 * stderr


def test_run_replicas_worker_independence(affine):
    from mfbd.experiments import _coupling_replica
    flow = direct_nonlinear_solve(affine, D0, 1.0).downsample(16)
    common = (affine, flow, flow, D0, Distribution.dirac(2, 2), 1.0, (0.5, 1.0))
    one = run_replicas(_coupling_replica, common, 40, 55, workers=1)
    two = run_replicas(_coupling_replica, common, 40, 55, workers=4)
    assert one == two


def test_particle_state_cache():
    st = ParticleState(np.array([0, 1, 2, 3]))
    st.bump(0, 1)
    assert st.mean() == pytest.approx(np.mean([1, 1, 2, 3]))
    assert st.empirical().mass[1] == pytest.approx(0.5)
