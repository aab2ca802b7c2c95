"""Distribution-dependent (mean-field) birth-death processes on Z+.

Construct rate models whose birth/death rates read the current law of the
process, solve the nonlinear marginal flow by mutually validating routes,
simulate exact paths, couplings, and N-particle systems, and check the
quantitative contraction / moment / propagation-of-chaos estimates.
"""

__version__ = "0.1.0"

from .errors import (CapOverflow, ClippingOverflow, ConfigError, DeclaredConstantViolation,
                     DominationFailure, MFBDError, MissingConstants, NoConvergence,
                     NonFiniteRate, RateOverflow, SimulationError, SizeMismatch,
                     SolverError, StepTooLarge, SupportTooLarge, UnboundedGrowth,
                     ZeroDeathRate)
from .measures import Distribution, tv_distance
from .metrics import (EmpiricalMeasure, empirical_w1_scale, product_w1_upper, w1,
                      w1_lp_oracle, wp, wp_lp_oracle)
from .model import (AffineMeanField, DeclaredConstants, FunctionRateModel,
                    LogisticMeanField, PolynomialWeight, RateModel, TimeCurve,
                    TimeModulated, eval_rates, rate_model)
from .assumptions import (LyapunovCheck, MomentDriftCheck, MonotoneCheck, SamplePlan,
                          check_H1, check_H2, check_H3, random_measure)
from .solver import (DEFAULT_H, MeasureFlow, PicardConfig, PicardResult, SolverOptions,
                     StationaryResult, default_lambda, direct_nonlinear_solve,
                     dyadic_approx_solve, linear_solve, moment_check, picard_fixed_point,
                     rho_lambda, stable_step, stationary_solve)
from .simulate import (CoupledParticlesRun, CoupledPath, JumpPath, ParticleRun,
                       ParticleState, comonotone_initial, fixed_sampler, iid_sampler,
                       replica_seeds, run_replicas, simulate_coupling, simulate_frozen,
                       simulate_particle_coupling, simulate_particle_pair,
                       simulate_particles)
from .reporting import ExperimentReport, ReportPoint, write_report_json, write_summary_csv
from .experiments import (ChaosConstants, chaos_experiment, compute_chaos_constants,
                          contraction_experiment, default_checkpoints, gradient_modulus,
                          intrinsic_gradient_experiment, particle_stability_experiment,
                          wp_lipschitz_experiment)
from .config import RunConfig, load_config
