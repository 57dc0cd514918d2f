"""Saddle-escaping asynchronous coordinate gradient descent."""
from .algorithms import (CAP_REACHED, SOSP, PhaseResult, TerminationReport, lg_acgd, p_acgd, se_acgd,
                         uniform_ball_sample)
from .baselines import BaselineConfig, run_serial_gd, run_serial_pgd, run_sync_parallel_pgd
from .errors import (ConfigurationError, ContractViolation, DegenerateProblemError, RegimeError,
                     RunAborted)
from .hamiltonian import DescentReport, HamiltonianWindow, check_descent, energy, push_step
from .hyperparams import HyperParams, UserInputs, derive_params, solve_beta, validate_step_size
from .objective import (AggregateObjective, LandscapeParams, Objective, ObjectiveSpec, PaperQuartic,
                        PointClass, classify_point, make_objective, min_eigenvalue, register_objective)
from .runtime import DelayModel, audit_log, build_runtime, partition_blocks

__version__ = "0.1.0"
