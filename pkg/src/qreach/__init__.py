"""Steady-state infidelity lower bounds for controlled Markovian open quantum systems."""
__version__ = "0.1.0"

from .bound import (BoundResult, HamiltonianTerm, SystemSpec, compute_A, compute_bound,
                    compute_E, compute_U, is_common_eigenvector)
from .dynamics import (FeedbackConfig, IntegratorConfig, TrajectoryEnsemble, feedback_u,
                       integrate_master, lindblad_rhs, simulate_ensemble,
                       simulate_feedback_ensemble, sme_step)
from .errors import ConfigError, DimensionError, NumericalError, TruncationError
