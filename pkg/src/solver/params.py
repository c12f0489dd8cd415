"""
Parameter and report records for the discrete solver
"""
import math
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..config import Config
from ..operators.regularization import EllipticityReport

SOLVE_REPORT_COLUMNS = ['epsilon', 'h', 'k', 'mode', 'iterations', 'final_residual', 'rho',
                        'ball_distance', 'min_eig', 'max_eig', 'contraction_max']


class CouplingParams(BaseModel):
    """
    Mesh/regularization coupling h = c_coupling * eps^beta and ball radius
    rho = c_ball * eps^(-gamma_ball) * h^delta
    """
    model_config = ConfigDict(frozen=True)

    beta: float = Field(2.0, ge=0)
    c_coupling: float = Field(1.25, gt=0)
    delta: float = 1.1
    gamma_ball: float = Field(1.0, gt=0)
    c_ball: float = Field(1.0, gt=0)
    mu: float = Field(default_factory=lambda: Config.DEFAULT_MU)

    @model_validator(mode='after')
    def _check_exponents(self):
        if not 2.0 < self.mu < 4.0:
            raise ValueError(f"mu={self.mu} must satisfy 2 < mu < 4")
        upper = 0.5 + 2.0 / self.mu
        if not 1.0 < self.delta < upper:
            raise ValueError(f"delta={self.delta} must satisfy 1 < delta < {upper:.6g} for mu={self.mu}")
        return self

    def mesh_size(self, epsilon: float) -> float:
        return self.c_coupling * epsilon ** self.beta

    def ball_radius(self, epsilon: float, h: float) -> float:
        return self.c_ball * epsilon ** (-self.gamma_ball) * h ** self.delta


class SolveReport(BaseModel):
    """Diagnostics of one nonlinear solve"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    epsilon: float
    h: float
    k: float
    mode: Literal['newton', 'frozen'] = 'newton'
    iterations: int = 0
    final_residual: float = math.inf
    residual_history: List[float] = Field(default_factory=list)
    ball_radius_rho: Optional[float] = None
    ball_distance: Optional[float] = None
    contraction_estimates: List[float] = Field(default_factory=list)
    ellipticity: Optional[EllipticityReport] = None

    @property
    def contraction_max(self) -> Optional[float]:
        return max(self.contraction_estimates) if self.contraction_estimates else None

    def to_row(self) -> dict:
        """One CSV row, columns SOLVE_REPORT_COLUMNS (missing values are NaN)"""
        def value(x):
            return math.nan if x is None else x

        return {
            'epsilon': self.epsilon,
            'h': self.h,
            'k': self.k,
            'mode': self.mode,
            'iterations': self.iterations,
            'final_residual': self.final_residual,
            'rho': value(self.ball_radius_rho),
            'ball_distance': value(self.ball_distance),
            'min_eig': value(self.ellipticity.lambda_min if self.ellipticity else None),
            'max_eig': value(self.ellipticity.lambda_max if self.ellipticity else None),
            'contraction_max': value(self.contraction_max),
        }
