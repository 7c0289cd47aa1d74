"""Online Lasso for sparse linear contextual bandits under a perturbed adversary."""

from .bandit import LearnerState, RegretTrace, ScheduleParams, lambda_schedule, run_episode
from .environment import BanditInstance, ContextStrategy
from .lasso import LassoProblem, SolverSettings, fit_lasso
from .perturbation import PerturbationSpec, censored_variance, g_lower_bound
from .streams import Purpose, StreamFactory

__version__ = "0.1.0"
