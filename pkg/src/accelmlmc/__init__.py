"""Multi-level Monte Carlo with a higher order scheme on the finest level."""

__version__ = "0.1.0"

from .mlmc import (ConstantSet, DegenerateVarianceError, EstimatorReport, LevelPlan,
                   compute_kappa, compute_levels, compute_sample_sizes, mlmc_estimate, optimal_q,
                   pilot_estimate_constants, plan_levels, run_level)
from .noise import CoupledIncrements, RngStreamSpec, ihat, sample_coupled
from .schemes import EULER_MARUYAMA, RI6, PathDivergenceError, em_step, integrate_path, ri6_step
from .sde import SdeModel, get_model, make_four_dim, make_gbm, make_nonlinear_scalar
from .theory import (classify, improvement_guaranteed, ratio_beta_eq_gamma,
                     ratio_beta_lt_gamma)
