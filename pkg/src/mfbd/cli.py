"""Configuration-driven command line front end.

Commands::

    mfbd solve      --config run.toml [--out DIR] [--route picard|direct|dyadic:N] ...
    mfbd simulate   --config run.toml [--seed S] [--workers W] ...
    mfbd experiment --config run.toml ...
    mfbd check      --config run.toml ...

Exit codes: 0 all selected checks pass, 1 a bound failed, 2 configuration
error, 3 numeric error.  Outputs are deterministic: rerunning a config
with any worker count yields byte-identical files (no timestamps).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .assumptions import SamplePlan, check_H1, check_H2, check_H3
from .config import RunConfig, load_config
from .errors import ConfigError, MFBDError
from .measures import Distribution
from .metrics import w1
from .model import PolynomialWeight
from .reporting import write_report_json, write_summary_csv
from .experiments import (chaos_experiment, contraction_experiment,
                          intrinsic_gradient_experiment, particle_stability_experiment,
                          wp_lipschitz_experiment)
from .simulate import iid_sampler, run_replicas, simulate_particles
from .solver import (MeasureFlow, PicardConfig, SolverOptions, direct_nonlinear_solve,
                     dyadic_approx_solve, linear_solve, moment_check, picard_fixed_point)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _write_manifest(cfg: RunConfig, out: Path, command: str):
    manifest = {"command": command, "config_sha256": cfg.config_hash(),
                "seed": cfg.seed, "version": __version__}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")


def _write_flow(flow: MeasureFlow, path: Path, cfg: RunConfig):
    with open(path, "w") as fh:
        fh.write("t,i,mass\n")
        for k, t in enumerate(flow.times):
            row = flow.masses[k]
            for i in np.nonzero(row > 1e-15)[0]:
                fh.write(f"{t:.12g},{i},{_fmt(row[i])}\n")
    meta = {"cap": flow.cap, "clipped_mass": flow.clipped, "route": flow.route,
            "tail_mass": float(flow.tails[-1]), "h": flow.h, "T": flow.horizon,
            "config_sha256": cfg.config_hash()}
    path.with_suffix(".meta.json").write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")


def _solve_routes(cfg: RunConfig):
    mu0 = cfg.init.build()
    options = SolverOptions(cap=cfg.cap)
    picard_cfg = PicardConfig(lam=cfg.picard_lam, tol=cfg.picard_tol,
                              max_iter=cfg.picard_max_iter, h=cfg.h)
    flows = {}
    for route in cfg.routes:
        if route == "picard":
            flows[route] = picard_fixed_point(cfg.model, mu0, cfg.T, picard_cfg, options).flow
        elif route == "direct":
            flows[route] = direct_nonlinear_solve(cfg.model, mu0, cfg.T, cfg.h, options)
        elif route == "linear":
            frozen = MeasureFlow.constant(mu0, cfg.T, cfg.h)
            flows[route] = linear_solve(cfg.model, frozen, mu0, options)
        else:
            level = int(route.split(":", 1)[1])
            flows[route] = dyadic_approx_solve(cfg.model, mu0, cfg.T, level, cfg.h,
                                               options=options)
    return flows


def cmd_solve(cfg: RunConfig, out_dir: Path) -> int:
    out = out_dir / "solve"
    out.mkdir(parents=True, exist_ok=True)
    flows = _solve_routes(cfg)
    for route, flow in flows.items():
        _write_flow(flow, out / f"{route.replace(':', '-')}.csv", cfg)
    names = list(flows)
    with open(out / "agreement.csv", "w") as fh:
        fh.write("route_a,route_b,sup_w1\n")
        for i, ra in enumerate(names):
            for rb in names[i + 1:]:
                fh.write(f"{ra},{rb},{_fmt(flows[ra].sup_w1(flows[rb]))}\n")
    _write_manifest(cfg, out, "solve")
    return 0


def _sim_replica(common, rng):
    model, N, mu0, T, cps, targets = common
    run = simulate_particles(model, N, iid_sampler(mu0), T, rng, checkpoints=cps)
    stats = {}
    for t in cps:
        x = run.snapshots[t]
        counts = np.bincount(x, minlength=targets[t].cap + 1).astype(float)
        stats[t] = (float(x.mean()), w1(Distribution(counts / x.size), targets[t]))
    return stats, run.events


def cmd_simulate(cfg: RunConfig, out_dir: Path) -> int:
    out = out_dir / "simulate"
    out.mkdir(parents=True, exist_ok=True)
    seed = cfg.require_seed()
    mu0 = cfg.init.build()
    reference = direct_nonlinear_solve(cfg.model, mu0, cfg.T, cfg.h, SolverOptions(cap=cfg.cap))
    cps = tuple(round(c / cfg.h) * cfg.h for c in cfg.checkpoints)
    targets = {t: reference.at(reference.node_index(t)) for t in cps}
    common = (cfg.model, cfg.sim_N, mu0, cfg.T, cps, targets)
    results = run_replicas(_sim_replica, common, cfg.sim_replicas, seed, cfg.workers)

    with open(out / "stats.csv", "w") as fh:
        fh.write("t,stat,value,stderr\n")
        for t in cps:
            for label, col in (("mean", 0), ("w1_vs_flow", 1)):
                vals = np.asarray([res[0][t][col] for res in results])
                stderr = vals.std(ddof=1) / math.sqrt(len(vals)) if len(vals) > 1 else 0.0
                fh.write(f"{t:.12g},{label},{_fmt(vals.mean())},{_fmt(stderr)}\n")
    if cfg.dump_events:
        with open(out / "events.csv", "w") as fh:
            fh.write("replica,t,coordinate,delta\n")
            for r, res in enumerate(results):
                for t, coord, delta in res[1]:
                    fh.write(f"{r},{t:.12g},{coord},{delta}\n")
    _write_manifest(cfg, out, "simulate")
    return 0


def _run_experiment(cfg: RunConfig, name: str):
    mu0 = cfg.init.build()
    opt = cfg.experiment_options.get(name, {})
    seed = cfg.seed if cfg.seed is not None else 0
    options = SolverOptions(cap=cfg.cap)

    def build_nu(default_i):
        from .config import _parse_init
        spec = opt.get("nu")
        if spec is None:
            return Distribution.dirac(default_i, default_i)
        return _parse_init(spec, f"experiments.{name}.nu").build()

    if name == "contraction":
        return contraction_experiment(
            cfg.model, mu0, build_nu(4), cfg.T,
            replicas=int(opt.get("replicas", cfg.sim_replicas)), seed=seed,
            tol=float(opt.get("tol", 0.02)), h=cfg.h, workers=cfg.workers, options=options)
    if name == "wp_lipschitz":
        return wp_lipschitz_experiment(
            cfg.model, mu0, build_nu(3), float(opt.get("p", 2.0)), cfg.T,
            tol=float(opt.get("tol", 0.02)), h=cfg.h, options=options)
    if name == "intrinsic_gradient":
        clip = float(opt.get("f_clip", 10.0))
        return intrinsic_gradient_experiment(
            cfg.model, mu0, build_nu(3), float(opt.get("p", 2.0)),
            _ClipFunction(clip), cfg.T, tol=float(opt.get("tol", 0.02)),
            h=cfg.h, options=options)
    if name == "chaos":
        return chaos_experiment(
            cfg.model, mu0, cfg.T, [int(n) for n in opt.get("N_list", [16, 32, 64, 128])],
            replicas=int(opt.get("replicas", 200)), seed=seed,
            tol_slope=float(opt.get("tol_slope", 0.15)), h=cfg.h, workers=cfg.workers,
            options=options)
    if name == "particle_stability":
        n = int(opt.get("N", cfg.sim_N))
        state_a = int(opt.get("state_a", 0))
        state_b = int(opt.get("state_b", 2))
        return particle_stability_experiment(
            cfg.model, np.full(n, state_a), np.full(n, state_b), n, cfg.T,
            replicas=int(opt.get("replicas", cfg.sim_replicas)), seed=seed,
            h=cfg.h, workers=cfg.workers)
    if name == "moments":
        flow = picard_fixed_point(cfg.model, mu0, cfg.T,
                                  PicardConfig(lam=cfg.picard_lam, tol=cfg.picard_tol,
                                               max_iter=cfg.picard_max_iter, h=cfg.h),
                                  options).flow
        reports = []
        for p in opt.get("p_list", [1.0, 2.0]):
            constants = cfg.model.constants
            if float(p) > 1.0 and constants.drift_const is None:
                constants = _fitted_drift_constants(cfg.model, cfg.T)
            reports.append(moment_check(flow, cfg.model, float(p), constants=constants,
                                        tol=float(opt.get("tol", 1e-6))))
        return reports
    raise ConfigError(f"experiments.run: unknown experiment {name!r}")


def _fitted_drift_constants(model, T):
    from dataclasses import replace
    from .model import TimeCurve
    fit = check_H3(model, 2.0, SamplePlan(t_grid=(0.0,) if model.time_homogeneous
                                          else tuple(np.linspace(0.0, T, 5))))

    def curve(vals):
        return TimeCurve(fit.t_grid, vals) if fit.t_grid.size > 1 \
            else TimeCurve.constant(float(vals[0]))

    return replace(model.constants, drift_const=curve(fit.drift_const_fit),
                   drift_state=curve(fit.drift_state_fit),
                   drift_measure=curve(fit.drift_measure_fit))


class _ClipFunction:
    """Bounded test function min(i, clip); picklable."""

    def __init__(self, clip):
        self.clip = clip

    def __call__(self, i):
        return min(float(i), self.clip)


def cmd_experiment(cfg: RunConfig, out_dir: Path) -> int:
    if not cfg.experiments:
        raise ConfigError("experiments.run: no experiments selected")
    out = out_dir / "experiment"
    out.mkdir(parents=True, exist_ok=True)
    reports = []
    for name in cfg.experiments:
        result = _run_experiment(cfg, name)
        reports.extend(result if isinstance(result, list) else [result])
    for rep in reports:
        write_report_json(rep, out / f"{rep.experiment}.report.json")
    write_summary_csv(reports, out / "summary.csv")
    _write_manifest(cfg, out, "experiment")
    failed = [r for r in reports if not r.passed and not r.excluded]
    for rep in reports:
        status = "excluded" if rep.excluded else ("pass" if rep.passed else "FAIL")
        print(f"{rep.experiment}: {status} (worst margin {rep.worst_margin():.4g})")
    return 1 if failed else 0


def cmd_check(cfg: RunConfig, out_dir: Path) -> int:
    out = out_dir / "check"
    out.mkdir(parents=True, exist_ok=True)
    plan = SamplePlan(t_grid=(0.0,) if cfg.model.time_homogeneous
                      else tuple(np.linspace(0.0, cfg.T, 5)), seed=cfg.seed or 0)
    h1 = check_H1(cfg.model, plan)
    decl = cfg.model.constants
    weight = decl.weight if decl.weight is not None else PolynomialWeight(2.0)
    power = decl.lyapunov_power if decl.lyapunov_power is not None else 2.0
    h2 = check_H2(cfg.model, weight, power, cfg.T)
    h3 = check_H3(cfg.model, 2.0, plan)
    rows = [
        ("monotone.k_state", h1.k_state_sup, len(h1.violations)),
        ("monotone.k_measure", h1.k_measure_sup, len(h1.violations)),
        ("lyapunov.weight_ratio", h2.ratio_cap_fit, len(h2.violations)),
        ("lyapunov.rate", float(np.max(h2.lyapunov_rate_fit)), len(h2.violations)),
        ("drift.joint_lipschitz", h3.joint_lipschitz_sup, len(h3.violations)),
        ("drift.const", float(np.max(h3.drift_const_fit)), len(h3.violations)),
        ("drift.state", float(np.max(h3.drift_state_fit)), len(h3.violations)),
        ("drift.measure", float(np.max(h3.drift_measure_fit)), len(h3.violations)),
    ]
    with open(out / "assumptions.csv", "w") as fh:
        fh.write("check,fitted,violations\n")
        for name, val, nv in rows:
            fh.write(f"{name},{_fmt(val)},{nv}\n")
    _write_manifest(cfg, out, "check")
    bad = h1.violations + h2.violations + h3.violations
    for name, val, nv in rows:
        print(f"{name}: {val:.6g}")
    if bad:
        print(f"{len(bad)} envelope violations detected")
    return 1 if bad else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mfbd",
        description="Distribution-dependent birth-death processes: solve, simulate, verify.")
    parser.add_argument("command", choices=["solve", "simulate", "experiment", "check"])
    parser.add_argument("--config", required=True, help="path to the TOML run configuration")
    parser.add_argument("--out", default=None, help="output directory (overrides config)")
    parser.add_argument("--workers", type=int, default=None,
                        help="worker processes (overrides config)")
    parser.add_argument("--seed", type=int, default=None, help="master seed (overrides config)")
    parser.add_argument("--route", action="append", default=None,
                        help="solver route: picard | direct | linear | dyadic:<n>")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if args.out is not None:
            cfg.out_dir = args.out
        if args.workers is not None:
            if args.workers < 1:
                raise ConfigError("--workers: must be >= 1")
            cfg.workers = args.workers
        if args.seed is not None:
            cfg.seed = args.seed
        if args.route:
            for r in args.route:
                if not (r in ("picard", "direct", "linear") or r.startswith("dyadic:")):
                    raise ConfigError(f"--route: unknown route {r!r}")
            cfg.routes = list(args.route)
        out_dir = Path(cfg.out_dir)
        handler = {"solve": cmd_solve, "simulate": cmd_simulate,
                   "experiment": cmd_experiment, "check": cmd_check}[args.command]
        return handler(cfg, out_dir)
    except ConfigError as exc:
        print(f"config-error: {exc}", file=sys.stderr)
        return 2
    except MFBDError as exc:
        print(f"numeric-error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
