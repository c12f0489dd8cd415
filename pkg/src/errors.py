"""
Exception hierarchy shared by all sub-packages
"""
from typing import List, Optional


class PmcfError(Exception):
    """Base class for all laboratory errors"""


class MeshGenerationError(PmcfError, ValueError):
    """Mesh cannot be built for the requested domain / resolution"""


class MeshFormatError(PmcfError, ValueError):
    """Malformed `pmcf-mesh v1` or `pmcf-fun v1` file"""


class PointLocationError(PmcfError, ValueError):
    """Point lies outside the triangulated domain"""


class NotInTrialSpaceError(PmcfError, ValueError):
    """A function expected in V_h has nonzero boundary coefficients"""


class LinearSolveError(PmcfError):
    """Singular or ill-conditioned linearized system"""

    def __init__(self, message: str, condition_estimate: float = float('inf')):
        super().__init__(f"{message} (condition estimate {condition_estimate:.3e})")
        self.condition_estimate = condition_estimate


class ConvergenceError(PmcfError):
    """Nonlinear iteration did not reach the tolerance"""

    def __init__(self, message: str, residuals: Optional[List[float]] = None):
        super().__init__(message)
        self.residuals = list(residuals or [])


class DivergenceError(ConvergenceError):
    """Residual grew by the divergence factor from its minimum"""


class ContinuationError(PmcfError):
    """A continuation stage failed"""

    def __init__(self, stage: int, epsilon: float, cause: Exception):
        super().__init__(f"Continuation stage {stage} (epsilon={epsilon:g}) failed: {cause}")
        self.stage = stage
        self.epsilon = epsilon


class OracleError(PmcfError):
    """Radial boundary value solve failed"""


class InfeasibleRateError(PmcfError, ValueError):
    """No exponent tuple satisfies the strict rate constraints"""
