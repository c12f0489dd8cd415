"""
Exponent algebra for the regularization error rate

    beta1(alpha, s) = (2 - s + alpha (2 - 1/k)) / (gamma (2 - 1/k) + 1/k - 1)
    beta2(alpha, s) = (alpha + k s) / (gamma - k - 1)

A rate r is admissible when gamma > 1 + k, beta1 > beta2 and 0 < r < alpha/gamma.
With s = alpha/gamma the equality beta1 = beta2 is linear in alpha, so every
gamma gives a closed-form candidate; the objective alpha/gamma is maximized
over a gamma grid and then backed off to strict inequalities.
"""
import logging
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.optimize import minimize_scalar

from ..errors import InfeasibleRateError
from ..solver.params import CouplingParams

logger = logging.getLogger(__name__)

DEFAULT_GRID_N = 400
MAX_BACKOFF_STEPS = 200
# float slack when certifying the requested margins
CERTIFY_TOL = 1e-12


class RateExponents(BaseModel):
    """Certified exponent tuple with s = alpha/gamma and rate r < alpha/gamma"""
    model_config = ConfigDict(frozen=True)

    k: float = Field(..., gt=1)
    alpha: float = Field(..., gt=0)
    gamma: float
    s: float = Field(..., gt=0)
    r: float = Field(..., gt=0)
    beta1: float
    beta2: float
    margin: float = 0.0
    gamma_at_upper_bound: bool = False

    @model_validator(mode='after')
    def _check_strict(self):
        gap, beta_gap, rate_gap = self.feasibility_margins
        if gap <= 0:
            raise ValueError(f"gamma={self.gamma} must exceed 1 + k = {1 + self.k}")
        if beta_gap <= 0:
            raise ValueError(f"beta1={self.beta1} must exceed beta2={self.beta2}")
        if rate_gap <= 0:
            raise ValueError(f"r={self.r} must lie below alpha/gamma={self.alpha / self.gamma}")
        return self

    @property
    def feasibility_margins(self) -> Tuple[float, float, float]:
        """Raw slacks (gamma - (1 + k), beta1 - beta2, alpha/gamma - r)"""
        return (self.gamma - (1.0 + self.k), self.beta1 - self.beta2, self.alpha / self.gamma - self.r)

    @property
    def relative_margins(self) -> Tuple[float, float, float]:
        """(gamma - (1 + k), (beta1 - beta2)/beta1, (alpha/gamma - r)/(alpha/gamma))"""
        ratio = self.alpha / self.gamma
        return (self.gamma - (1.0 + self.k), (self.beta1 - self.beta2) / self.beta1, (ratio - self.r) / ratio)

    def lambda_of_theta(self, theta: float) -> float:
        """Hoelder rate min(r, s) (1 - theta)"""
        if not 0 <= theta < 1:
            raise ValueError(f"theta={theta} must lie in [0, 1)")
        return min(self.r, self.s) * (1.0 - theta)

    def to_row(self, thetas=()) -> dict:
        row = {'k': self.k, 'gamma': self.gamma, 'alpha': self.alpha, 's': self.s, 'r': self.r,
               'beta1': self.beta1, 'beta2': self.beta2}
        for theta in thetas:
            row[f'lambda({theta:g})'] = self.lambda_of_theta(theta)
        return row


def beta_exponents(k: float, alpha: float, gamma: float, s: float) -> Tuple[float, float]:
    """
    The two mesh-coupling exponents

    Args:
        k: Curvature power (> 1)
        alpha: Exponent alpha (> 0)
        gamma: Exponent gamma (> 1 + k)
        s: Exponent s (> 0)

    Returns:
        tuple: (beta1, beta2)
    """
    if not k > 1:
        raise ValueError(f"k={k} must exceed 1")
    if not gamma > 1 + k:
        raise ValueError(f"gamma={gamma} must exceed 1 + k = {1 + k}")
    if not (alpha > 0 and s > 0):
        raise ValueError(f"alpha={alpha} and s={s} must be positive")
    a = 2.0 - 1.0 / k
    beta1 = (2.0 - s + alpha * a) / (gamma * a + 1.0 / k - 1.0)
    beta2 = (alpha + k * s) / (gamma - k - 1.0)
    return beta1, beta2


def equality_alpha(k: float, gamma: float) -> float:
    """alpha solving beta1 = beta2 with s = alpha/gamma (nan if no positive solution)"""
    a = 2.0 - 1.0 / k
    d1 = gamma * a + 1.0 / k - 1.0
    d2 = gamma - k - 1.0
    denominator = (1.0 + k / gamma) * d1 - (a - 1.0 / gamma) * d2
    if denominator <= 0 or d2 <= 0:
        return float('nan')
    return 2.0 * d2 / denominator


def _objective(k: float, gamma: float) -> float:
    alpha = equality_alpha(k, gamma)
    return alpha / gamma if np.isfinite(alpha) and alpha > 0 else -np.inf


def optimize_rate(k: float, gamma_max: float, margin: float = 1e-3,
                  grid_n: Optional[int] = None) -> RateExponents:
    """
    Maximize alpha/gamma over gamma in (1 + k + margin, gamma_max] and back off

    The back-off shrinks alpha by (1 - margin) until the relative slack
    (beta1 - beta2)/beta1 reaches the margin, then sets s = alpha/gamma and
    r = (1 - margin) alpha/gamma.

    Args:
        k: Curvature power
        gamma_max: Upper end of the gamma search
        margin: Required relative slack in (0, 1)
        grid_n: Number of gamma grid points

    Returns:
        RateExponents: Certified exponents

    Raises:
        InfeasibleRateError: No gamma on the grid admits a strictly feasible tuple
    """
    if not k > 1:
        raise ValueError(f"k={k} must exceed 1")
    if not 0 < margin < 1:
        raise ValueError(f"margin={margin} must lie in (0, 1)")
    lower = 1.0 + k + margin
    if not gamma_max > lower:
        raise InfeasibleRateError(f"gamma_max={gamma_max} must exceed 1 + k + margin = {lower}")
    grid_n = DEFAULT_GRID_N if grid_n is None else grid_n

    grid = np.linspace(lower, gamma_max, grid_n + 1)[1:]
    values = np.array([_objective(k, g) for g in grid])
    if not np.any(np.isfinite(values)):
        raise InfeasibleRateError(f"No feasible gamma in ({lower}, {gamma_max}] for k={k}")
    best = int(np.argmax(values))
    at_upper = best == len(grid) - 1
    if at_upper:
        gamma = float(gamma_max)
    else:
        left = grid[best - 1] if best > 0 else lower
        result = minimize_scalar(lambda g: -_objective(k, g), bounds=(left, grid[best + 1]),
                                 method='bounded', options={'xatol': 1e-12})
        gamma = float(result.x) if -result.fun >= values[best] else float(grid[best])

    alpha_star = equality_alpha(k, gamma)
    alpha = alpha_star
    for _ in range(MAX_BACKOFF_STEPS):
        alpha *= (1.0 - margin)
        beta1, beta2 = beta_exponents(k, alpha, gamma, alpha / gamma)
        if (beta1 - beta2) / beta1 >= margin:
            break
    else:
        raise InfeasibleRateError(f"Back-off did not reach margin {margin} at gamma={gamma}")

    s = alpha / gamma
    r = (1.0 - margin) * s * (1.0 - CERTIFY_TOL)
    exponents = RateExponents(k=k, alpha=alpha, gamma=gamma, s=s, r=r, beta1=beta1, beta2=beta2,
                              margin=margin, gamma_at_upper_bound=at_upper)
    if at_upper:
        logger.warning(f"Rate optimum for k={k} sits at gamma_max={gamma_max}; "
                       f"the supremum is not attained on the search interval")
    logger.info(f"Optimized rate k={k}: gamma={gamma:.6g}, alpha={alpha:.6g}, r={r:.6g}")
    return exponents


def predicted_error_bounds(re: RateExponents, cp: CouplingParams, theta: float, epsilon: float,
                           h: Optional[float] = None) -> Tuple[float, float]:
    """
    Shape of the two error terms with unit constants

    Returns:
        tuple: (eps^lambda(theta), eps^(-gamma_ball) h^delta) with h = c eps^beta by default
    """
    if not 0 <= theta < 0.5:
        raise ValueError(f"theta={theta} must lie in [0, 1/2)")
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    h = cp.mesh_size(epsilon) if h is None else h
    return epsilon ** re.lambda_of_theta(theta), epsilon ** (-cp.gamma_ball) * h ** cp.delta
