"""KL-projection local explanations for Bayesian predictive models."""
from ._accel import BACKEND
from .divergence import (PredictionMatrix, UndefinedPowerError, information_loss,
                         kl_bernoulli, kl_gaussian, relative_power)
from .explanation import ExplainOptions, explain
from .perturb import Instance, LocalityConfig, interpretable_rep, sample_perturbations
from .projection import (SolverConfig, fit_null, fit_path, lambda_max, power_curve,
                         project_bernoulli, project_ensemble, project_gaussian,
                         select_complexity)

__version__ = "0.1.0"
