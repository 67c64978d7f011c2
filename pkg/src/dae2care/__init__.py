"""Low-rank inexact Kleinman-Newton-ADI for Riccati feedback of index-2 descriptor systems."""
from .errors import Dae2CareError, NotStabilizing, NonConvergent, MaxIterations
from .model import DaeSystem, validate
from .newton import NewtonResult, SolverConfig, newton_solve
from .problems import ProblemSpec, generate, initial_feedback
from .projector import ProjectorContext, apply_pi, apply_pi_transpose, recover_pressure

__all__ = [
    "Dae2CareError",
    "DaeSystem",
    "MaxIterations",
    "NewtonResult",
    "NonConvergent",
    "NotStabilizing",
    "ProblemSpec",
    "ProjectorContext",
    "SolverConfig",
    "apply_pi",
    "apply_pi_transpose",
    "generate",
    "initial_feedback",
    "newton_solve",
    "recover_pressure",
    "validate",
]

__version__ = "0.1.0"
