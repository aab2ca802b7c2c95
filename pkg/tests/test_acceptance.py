"""Acceptance suite: one test per criterion, each printing a pass/fail line
with its runtime against the stated budget.

The model instances are pinned here: the flagship contractive family
(beta0=1, beta1=0.5, alpha=1) for the contraction/chaos/stability
criteria, and three gentler instances for the route-agreement criterion,
where the dyadic level-10 freezing bias must sit below the 1e-4 pairwise
tolerance with margin.
"""

import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from mfbd import (AffineMeanField, Distribution, LogisticMeanField, MeasureFlow,
                  PicardConfig, SolverOptions, TimeCurve, TimeModulated,
                  chaos_experiment, contraction_experiment, direct_nonlinear_solve,
                  dyadic_approx_solve, empirical_w1_scale, intrinsic_gradient_experiment,
                  linear_solve, moment_check, particle_stability_experiment,
                  picard_fixed_point, rate_model, replica_seeds, stationary_solve,
                  tv_distance, w1, w1_lp_oracle, wp, wp_lp_oracle,
                  wp_lipschitz_experiment)
from mfbd.cli import _fitted_drift_constants, main

D0 = Distribution.dirac(0, 0)
FLAGSHIP = AffineMeanField(1.0, 0.5, 1.0)


def birth_death_2_i():
    return rate_model(lambda t, i, mu: float(i), lambda t, i, mu: 2.0,
                      name="bd(2, i)")


@contextmanager
def criterion(number, title, budget_s):
    start = time.time()
    failed = False
    try:
        yield
    except BaseException:
        failed = True
        raise
    finally:
        elapsed = time.time() - start
        verdict = "FAIL" if failed else "PASS"
        print(f"\n[criterion {number:2d}] {verdict} ({elapsed:6.2f}s < {budget_s}s budget): {title}")
        if not failed:
            assert elapsed < budget_s, f"criterion {number} exceeded its runtime budget"


def rngs(seed, n):
    return [np.random.Generator(np.random.PCG64(s)) for s in replica_seeds(seed, n)]


def pooled(values, cap):
    counts = np.bincount(np.asarray(values, dtype=int), minlength=cap + 1).astype(float)
    return Distribution(counts / len(values))


def test_criterion_01_stationarity_oracle():
    with criterion(1, "stationary law and long-horizon relaxation for b=2, a(i)=i", 1.0):
        model = birth_death_2_i()
        st = stationary_solve(model)
        pois = Distribution.poisson(2.0, st.distribution.cap)
        assert tv_distance(st.distribution, pois) <= 1e-10
        frozen = MeasureFlow.constant(D0, 20.0, 1.0 / 128.0)
        flow = linear_solve(model, frozen, D0)
        assert w1(flow.at(flow.times.size - 1), st.distribution) <= 1e-6


def test_criterion_02_self_consistent_mean():
    with criterion(2, "self-consistent stationary mean and transient mean", 5.0):
        st = stationary_solve(FLAGSHIP)
        assert st.distribution.mean() == pytest.approx(2.0, abs=1e-8)
        res = picard_fixed_point(FLAGSHIP, D0, 1.0)
        expect = 2.0 * (1.0 - math.exp(-0.5))
        assert res.flow.means()[-1] == pytest.approx(expect, abs=2e-4)


def test_criterion_03_route_agreement():
    with criterion(3, "picard/direct/dyadic(10) pairwise sup-W1 <= 1e-4, T <= 2", 30.0):
        instances = [
            (AffineMeanField(1.0, 0.2, 1.0), 1.0 / 256.0, SolverOptions()),
            (LogisticMeanField(1.5, 0.5, 2.0, 0.5, 0.2), 2.0 ** -11, SolverOptions(cap=24)),
            (TimeModulated(AffineMeanField(0.5, 0.2, 1.0),
                           TimeCurve([0.0, 2.0], [1.0, 1.1])), 1.0 / 256.0, SolverOptions()),
        ]
        for model, h, options in instances:
            pic = picard_fixed_point(model, D0, 2.0, PicardConfig(h=h), options).flow
            direct = direct_nonlinear_solve(model, D0, 2.0, h, options)
            dyadic = dyadic_approx_solve(model, D0, 2.0, 10, h, options=options)
            for a, b in ((pic, direct), (pic, dyadic), (direct, dyadic)):
                assert a.sup_w1(b) <= 1e-4, model.describe()


def test_criterion_04_picard_contraction():
    with criterion(4, "gap ratios <= 1/2 under the default discount; 2-step fixed point", 10.0):
        for model in (FLAGSHIP, LogisticMeanField(1.5, 0.5, 2.0, 0.5, 0.2)):
            opts = SolverOptions(cap=24) if isinstance(model, LogisticMeanField) else SolverOptions()
            h = 2.0 ** -11 if isinstance(model, LogisticMeanField) else 1.0 / 256.0
            res = picard_fixed_point(model, D0, 1.0, PicardConfig(h=h), opts)
            gaps = [g for g in res.gaps if g > 1e-12]
            ratios = [b / a for a, b in zip(gaps, gaps[1:])]
            assert all(r <= 0.5 for r in ratios[1:]), model.describe()
        res = picard_fixed_point(birth_death_2_i(), D0, 1.0, PicardConfig(lam=1.0))
        assert res.iterations == 2


def test_criterion_05_dyadic_convergence():
    with criterion(5, "dyadic route error monotone nonincreasing over levels 2..8", 60.0):
        target = picard_fixed_point(FLAGSHIP, D0, 1.0).flow
        errs = [target.sup_w1(dyadic_approx_solve(FLAGSHIP, D0, 1.0, n))
                for n in range(2, 9)]
        assert all(b <= a for a, b in zip(errs, errs[1:])), errs


def test_criterion_06_transport_oracle_equivalence():
    with criterion(6, "quantile formulas match the transport oracle to 1e-12", 5.0):
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            cap = int(rng.integers(1, 64))
            m1, m2 = rng.random(cap + 1) ** 3, rng.random(cap + 1) ** 3
            mu = Distribution(m1 / m1.sum())
            nu = Distribution(m2 / m2.sum())
            assert abs(w1(mu, nu) - w1_lp_oracle(mu, nu)) <= 1e-12
            assert abs(wp(mu, nu, 2.0) - wp_lp_oracle(mu, nu, 2.0)) <= 1e-12


def test_criterion_07_moment_bounds():
    with criterion(7, "first- and second-moment bounds hold at every node", 5.0):
        instances = [
            (FLAGSHIP, 1.0 / 256.0, SolverOptions()),
            (LogisticMeanField(1.5, 0.5, 2.0, 0.5, 0.2), 2.0 ** -11, SolverOptions(cap=24)),
            (TimeModulated(AffineMeanField(0.5, 0.2, 1.0),
                           TimeCurve([0.0, 1.0], [1.0, 1.05])), 1.0 / 256.0, SolverOptions()),
        ]
        for model, h, options in instances:
            flow = picard_fixed_point(model, D0, 1.0, PicardConfig(h=h), options).flow
            first = moment_check(flow, model, 1.0)
            assert first.passed and first.worst_margin() >= 0.0, model.describe()
            constants = model.constants
            if constants.drift_const is None:
                constants = _fitted_drift_constants(model, 1.0)
            second = moment_check(flow, model, 2.0, constants=constants)
            assert second.passed and second.worst_margin() >= 0.0, model.describe()


def test_criterion_08_w1_contraction_experiment():
    with criterion(8, "deterministic + coupled contraction at 1e4 replicas", 120.0):
        rep = contraction_experiment(FLAGSHIP, D0, Distribution.dirac(4, 4), 2.0,
                                     replicas=10_000, seed=80_001)
        assert rep.passed and not rep.excluded
        for p in rep.points:
            if p.label.startswith("flow-w1"):
                assert p.bound == pytest.approx(4.0 * math.exp(-0.5 * p.inputs["t"]), rel=1e-9)
        assert sum(p.label.startswith("coupled-gap") for p in rep.points) == 4


def test_criterion_09_wp_and_gradient_estimates():
    with criterion(9, "Wp Lipschitz and intrinsic gradient estimates at p=2", 60.0):
        from dataclasses import replace as dc_replace
        # strip the declared joint Lipschitz constant so both bounds run
        # on the envelope fitted by the moment-drift checker
        model = AffineMeanField(1.0, 0.5, 1.0)
        model.constants = dc_replace(model.constants, joint_lipschitz=None)
        nu0 = Distribution.dirac(3, 3)
        rep = wp_lipschitz_experiment(model, D0, nu0, 2.0, 1.0)
        assert rep.passed and rep.worst_margin() >= 0.0
        rep2 = intrinsic_gradient_experiment(model, D0, nu0, 2.0,
                                             lambda i: min(i, 10), 1.0)
        assert rep2.passed and rep2.worst_margin() >= 0.0


def test_criterion_10_coupling_marginal_property():
    with criterion(10, "coupled simulators reproduce their marginal laws", 120.0):
        R = 10_000
        T = 1.0
        flow_mu = direct_nonlinear_solve(FLAGSHIP, D0, T).downsample(4)
        flow_nu = direct_nonlinear_solve(FLAGSHIP, Distribution.dirac(4, 4), T).downsample(4)
        from mfbd import simulate_coupling, simulate_frozen, simulate_particle_coupling
        from mfbd import simulate_particles, iid_sampler

        xs, ys = [], []
        for rng in rngs(55_001, R):
            x, y = simulate_coupling(FLAGSHIP, flow_mu, flow_nu, 0, 4, T, rng).state_at(T)
            xs.append(x)
            ys.append(y)
        fx = [simulate_frozen(FLAGSHIP, flow_mu, 0, T, rng).final_state
              for rng in rngs(55_002, R)]
        fy = [simulate_frozen(FLAGSHIP, flow_nu, 4, T, rng).final_state
              for rng in rngs(55_003, R)]
        cap = max(flow_mu.cap, flow_nu.cap)
        s_mu = empirical_w1_scale(flow_mu.at(flow_mu.times.size - 1), R)
        s_nu = empirical_w1_scale(flow_nu.at(flow_nu.times.size - 1), R)
        assert w1(pooled(xs, cap), pooled(fx, cap)) <= 3.0 * math.sqrt(2.0) * s_mu
        assert w1(pooled(ys, cap), pooled(fy, cap)) <= 3.0 * math.sqrt(2.0) * s_nu

        N = 8
        xpool, ypool = [], []
        for rng in rngs(55_004, R):
            run = simulate_particle_coupling(FLAGSHIP, N, D0, flow_mu, T, rng,
                                             checkpoints=(T,))
            x, y = run.snapshots[T]
            xpool.extend(x)
            ypool.extend(y)
        ppool = []
        for rng in rngs(55_005, R):
            run = simulate_particles(FLAGSHIP, N, iid_sampler(D0), T, rng, checkpoints=(T,))
            ppool.extend(run.snapshots[T])
        target = flow_mu.at(flow_mu.times.size - 1)
        s_pool = empirical_w1_scale(target, len(ypool))
        # Y-coordinates are copies of the frozen-flow process: pooled law vs flow
        assert w1(pooled(ypool, cap), target) <= 3.0 * s_pool + 2.0 * flow_mu.h
        # X-coordinates against an independent run of the plain particle system
        assert w1(pooled(xpool, cap), pooled(ppool, cap)) <= 3.0 * math.sqrt(2.0) * s_pool \
            + 2.0 * flow_mu.h


def test_criterion_11_propagation_of_chaos():
    with criterion(11, "empirical-measure error scales like 1/sqrt(N)", 600.0):
        rep = chaos_experiment(FLAGSHIP, D0, 1.0, [16, 32, 64, 128, 256, 512, 1024],
                               replicas=200, seed=110_001)
        assert rep.passed
        slope = [p for p in rep.points if p.label == "loglog-slope"][0]
        assert abs(slope.measured - (-0.5)) <= 0.15
        scaling = [p for p in rep.points if p.label.startswith("scaling")]
        assert scaling and all(p.passed for p in scaling)


def test_criterion_12_particle_stability():
    with criterion(12, "coupled particle systems contract in the additive metric", 120.0):
        rep = particle_stability_experiment(FLAGSHIP, np.zeros(64, dtype=int),
                                            np.full(64, 2), 64, 2.0,
                                            replicas=400, seed=120_001)
        assert rep.passed
        for p in rep.points:
            if p.label.startswith("rho"):
                assert p.bound == pytest.approx(2.0 * math.exp(-0.5 * p.inputs["t"]), rel=1e-9)


ACCEPTANCE_CONFIG = """
[model]
family = "affine"
beta0 = 1.0
beta1 = 0.5
alpha = 1.0

[init]
kind = "dirac"
i = 0

[solver]
T = 1.0
h = 0.00390625

[simulate]
N = 16
replicas = 400
seed = 130001

[experiments]
run = ["contraction", "particle_stability", "moments"]

[experiments.contraction]
nu = { kind = "dirac", i = 4 }
replicas = 400

[experiments.particle_stability]
N = 16
replicas = 100
"""


def test_criterion_13_workers_determinism(tmp_path):
    with criterion(13, "byte-identical experiment summaries for 1 and 8 workers", 120.0):
        cfg = tmp_path / "run.toml"
        cfg.write_text(ACCEPTANCE_CONFIG)
        out1, out8 = tmp_path / "w1", tmp_path / "w8"
        assert main(["experiment", "--config", str(cfg), "--out", str(out1),
                     "--workers", "1"]) == 0
        assert main(["experiment", "--config", str(cfg), "--out", str(out8),
                     "--workers", "8"]) == 0
        for name in ("summary.csv", "contraction.report.json",
                     "particle-stability.report.json", "manifest.json"):
            b1 = (out1 / "experiment" / name).read_bytes()
            b8 = (out8 / "experiment" / name).read_bytes()
            assert b1 == b8, name
