"""Run configuration: a single TOML file drives solves, simulations,
experiments, and assumption checks.

Schema (defaults in parentheses; every block except [model] is optional):

[model]
  family = "affine" | "logistic" | "modulated" | "birth-death"
  affine:      beta0, beta1, alpha
  logistic:    lam, c2, q (1.0), eps (0.5), kappa (0.0)
  birth-death: birth, death_slope     # b(i) = birth, a(i) = death_slope * i
  modulated:   [model.base] = nested model block,
               [model.multiplier] t = [...], value = [...]
  [model.constants]  optional declared-constant overrides:
      k_state, k_measure, joint_lipschitz, drift_const, drift_state,
      drift_measure (numbers)

[init]      kind = "dirac" (i=0) | "poisson" (lam, cap=64) | "table" (masses=[...])
[solver]    T (1.0), h (1/256), cap (auto), routes (["picard","direct"]),
            [solver.picard] lam (rule), tol (1e-9), max_iter (60)
[simulate]  N (64), replicas (1000), seed (required if stochastic work runs),
            checkpoints (T-fractions 1/8,1/4,1/2,1), dump_events (false)
[experiments] run = [...], seed, workers; per-experiment blocks:
            [experiments.contraction] nu = {...}, tol, replicas
            [experiments.wp_lipschitz] nu = {...}, p, tol
            [experiments.intrinsic_gradient] nu = {...}, p, f_clip (10), tol
            [experiments.chaos] N_list, replicas, tol_slope
            [experiments.particle_stability] N, state_a (0), state_b (2), replicas
            [experiments.moments] p_list ([1.0, 2.0]), tol
[output]    dir ("out"), workers (1)
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:                      # python < 3.11
    import tomli as tomllib

from .errors import ConfigError
from .measures import Distribution
from .model import (AffineMeanField, FunctionRateModel, LogisticMeanField, RateModel,
                    TimeCurve, TimeModulated, DeclaredConstants)

KNOWN_EXPERIMENTS = ("contraction", "wp_lipschitz", "intrinsic_gradient",
                     "chaos", "particle_stability", "moments")


def _want(table, key, kind, path, default=None, required=False):
    if key not in table:
        if required:
            raise ConfigError(f"{path}.{key}: required field is missing")
        return default
    val = table[key]
    if kind is float and isinstance(val, int) and not isinstance(val, bool):
        val = float(val)
    if not isinstance(val, kind):
        raise ConfigError(f"{path}.{key}: expected {kind.__name__}, got {type(val).__name__}")
    return val


def _positive(val, path):
    if val is None or val <= 0:
        raise ConfigError(f"{path}: must be > 0")
    return val


@dataclass
class InitSpec:
    kind: str
    i: int = 0
    lam: float = 2.0
    cap: int = 64
    masses: list = field(default_factory=list)

    def build(self) -> Distribution:
        if self.kind == "dirac":
            return Distribution.dirac(self.i, max(self.i, 4))
        if self.kind == "poisson":
            return Distribution.poisson(self.lam, self.cap)
        return Distribution.from_masses(self.masses, normalize=True)


def _parse_init(table, path) -> InitSpec:
    kind = _want(table, "kind", str, path, default="dirac")
    if kind == "dirac":
        i = _want(table, "i", int, path, default=0)
        if i < 0:
            raise ConfigError(f"{path}.i: must be >= 0")
        return InitSpec("dirac", i=i)
    if kind == "poisson":
        lam = _positive(_want(table, "lam", float, path, required=True), f"{path}.lam")
        cap = _want(table, "cap", int, path, default=64)
        return InitSpec("poisson", lam=lam, cap=_positive(cap, f"{path}.cap"))
    if kind == "table":
        masses = _want(table, "masses", list, path, required=True)
        if not masses or any((not isinstance(v, (int, float))) or v < 0 for v in masses):
            raise ConfigError(f"{path}.masses: need a nonempty list of nonnegative numbers")
        return InitSpec("table", masses=[float(v) for v in masses])
    raise ConfigError(f"{path}.kind: unknown initial law {kind!r}")


def _parse_model(table, path="model") -> RateModel:
    family = _want(table, "family", str, path, required=True)
    if family == "affine":
        model = AffineMeanField(
            _want(table, "beta0", float, path, required=True),
            _want(table, "beta1", float, path, required=True),
            _want(table, "alpha", float, path, required=True))
    elif family == "logistic":
        model = LogisticMeanField(
            _want(table, "lam", float, path, required=True),
            _want(table, "c2", float, path, required=True),
            _want(table, "q", float, path, default=1.0),
            _want(table, "eps", float, path, default=0.5),
            _want(table, "kappa", float, path, default=0.0))
    elif family == "birth-death":
        birth = _want(table, "birth", float, path, required=True)
        slope = _want(table, "death_slope", float, path, required=True)
        if birth < 0 or slope < 0:
            raise ConfigError(f"{path}: rates must be nonnegative")
        model = FunctionRateModel(
            _ScaledDeath(slope), _ConstBirth(birth), vectorized=True,
            constants=DeclaredConstants(k_state=-slope, k_measure=0.0,
                                        joint_lipschitz=max(slope, 1e-12)),
            name=f"birth-death(b={birth:g}, a={slope:g}*i)")
    elif family == "modulated":
        base = _parse_model(_want(table, "base", dict, path, required=True), f"{path}.base")
        mult = _want(table, "multiplier", dict, path, required=True)
        ts = _want(mult, "t", list, f"{path}.multiplier", required=True)
        vals = _want(mult, "value", list, f"{path}.multiplier", required=True)
        try:
            curve = TimeCurve(ts, vals)
        except ValueError as exc:
            raise ConfigError(f"{path}.multiplier: {exc}") from exc
        model = TimeModulated(base, curve)
    else:
        raise ConfigError(f"{path}.family: unknown family {family!r}")

    if "constants" in table:
        overrides = {}
        for key in ("k_state", "k_measure", "joint_lipschitz",
                    "drift_const", "drift_state", "drift_measure"):
            val = _want(table["constants"], key, float, f"{path}.constants")
            if val is not None:
                overrides[key] = val
        from dataclasses import replace
        model.constants = replace(model.constants, **overrides)
    return model


class _ScaledDeath:
    def __init__(self, slope):
        self.slope = slope

    def __call__(self, t, s, mu):
        return self.slope * s


class _ConstBirth:
    def __init__(self, birth):
        self.birth = birth

    def __call__(self, t, s, mu):
        return self.birth


@dataclass
class RunConfig:
    model: RateModel
    init: InitSpec
    T: float
    h: float
    cap: int | None
    routes: list
    picard_lam: float | None
    picard_tol: float
    picard_max_iter: int
    sim_N: int
    sim_replicas: int
    seed: int | None
    checkpoints: list
    dump_events: bool
    experiments: list
    experiment_options: dict
    out_dir: str
    workers: int
    raw_bytes: bytes

    def config_hash(self) -> str:
        return hashlib.sha256(self.raw_bytes).hexdigest()

    def require_seed(self) -> int:
        if self.seed is None:
            raise ConfigError("simulate.seed: required when stochastic work is selected")
        return self.seed


def load_config(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
        data = tomllib.loads(raw.decode())
    except FileNotFoundError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config: invalid TOML: {exc}") from exc

    if "model" not in data:
        raise ConfigError("model: required block is missing")
    model = _parse_model(data["model"])
    init = _parse_init(data.get("init", {}), "init")

    solver = data.get("solver", {})
    T = _positive(_want(solver, "T", float, "solver", default=1.0), "solver.T")
    h = _positive(_want(solver, "h", float, "solver", default=1.0 / 256.0), "solver.h")
    if int(round(T / h)) < 1 or abs(round(T / h) * h - T) > 1e-9 * max(1.0, T):
        raise ConfigError("solver.h: horizon T must be an integer multiple of h")
    cap = _want(solver, "cap", int, "solver")
    if cap is not None:
        _positive(cap, "solver.cap")
    routes = _want(solver, "routes", list, "solver", default=["picard", "direct"])
    for r in routes:
        if not (r in ("picard", "direct", "linear") or str(r).startswith("dyadic:")):
            raise ConfigError(f"solver.routes: unknown route {r!r}")
    picard = solver.get("picard", {})
    lam = _want(picard, "lam", float, "solver.picard")
    if lam is not None and lam <= 0:
        lam = None                                  # 0 or negative: use the rule
    tol = _positive(_want(picard, "tol", float, "solver.picard", default=1e-9),
                    "solver.picard.tol")
    max_iter = _positive(_want(picard, "max_iter", int, "solver.picard", default=60),
                         "solver.picard.max_iter")

    sim = data.get("simulate", {})
    sim_n = _positive(_want(sim, "N", int, "simulate", default=64), "simulate.N")
    replicas = _want(sim, "replicas", int, "simulate", default=1000)
    if replicas < 1:
        raise ConfigError("simulate.replicas: must be >= 1")
    seed = _want(sim, "seed", int, "simulate")
    cps = _want(sim, "checkpoints", list, "simulate",
                default=[T / 8.0, T / 4.0, T / 2.0, T])
    cps = [float(c) for c in cps]
    if any(c <= 0 or c > T + 1e-9 for c in cps):
        raise ConfigError("simulate.checkpoints: must lie in (0, T]")
    dump_events = _want(sim, "dump_events", bool, "simulate", default=False)

    exp = data.get("experiments", {})
    run = _want(exp, "run", list, "experiments", default=[])
    for name in run:
        if name not in KNOWN_EXPERIMENTS:
            raise ConfigError(f"experiments.run: unknown experiment {name!r}")
    exp_options = {name: exp.get(name, {}) for name in KNOWN_EXPERIMENTS}
    if "seed" in exp:
        seed = _want(exp, "seed", int, "experiments")

    out = data.get("output", {})
    out_dir = _want(out, "dir", str, "output", default="out")
    workers = _positive(_want(out, "workers", int, "output", default=1), "output.workers")

    return RunConfig(model=model, init=init, T=T, h=h, cap=cap, routes=[str(r) for r in routes],
                     picard_lam=lam, picard_tol=tol, picard_max_iter=max_iter,
                     sim_N=sim_n, sim_replicas=replicas, seed=seed, checkpoints=cps,
                     dump_events=dump_events, experiments=[str(r) for r in run],
                     experiment_options=exp_options, out_dir=out_dir, workers=workers,
                     raw_bytes=raw)
