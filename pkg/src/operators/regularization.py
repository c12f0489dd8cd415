"""
Regularized norm f_eps(z) = sqrt(|z|^2 + eps^2) and its derivatives

All functions are vectorized over leading axes: ``z`` has shape (..., 2).
"""
from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field


class RegParams(BaseModel):
    """Regularization parameter eps and curvature power k"""
    model_config = ConfigDict(frozen=True)

    epsilon: float = Field(..., gt=0)
    k: float = Field(..., gt=1)

    @property
    def inv_k(self) -> float:
        return 1.0 / self.k

    def with_epsilon(self, epsilon: float) -> 'RegParams':
        return RegParams(epsilon=epsilon, k=self.k)


class EllipticityReport(BaseModel):
    """
    Extreme eigenvalues of the coefficient matrix a^{ij} = D_i D_j f_eps over
    the sampled gradients, plus the derived nu and a1 estimates

    nu is max |c| / lambda(p) for the first-order coefficient c; a1 is a
    sampled C^1 size of the coefficients (sup norms plus the largest
    difference quotient inside an element).
    """
    model_config = ConfigDict(frozen=True)

    lambda_min: float = Field(..., gt=0)
    lambda_max: float = Field(..., gt=0)
    ratio: float
    nu: float = 0.0
    a1: float = 0.0


def f_eps(z, rp: RegParams) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    return np.sqrt(np.sum(z * z, axis=-1) + rp.epsilon ** 2)


def f_eps_grad(z, rp: RegParams) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    return z / f_eps(z, rp)[..., None]


def f_eps_hess(z, rp: RegParams) -> np.ndarray:
    """delta_ij / f - z_i z_j / f^3, shape (..., 2, 2)"""
    z = np.asarray(z, dtype=float)
    f = f_eps(z, rp)[..., None, None]
    return np.eye(2) / f - z[..., :, None] * z[..., None, :] / f ** 3


def hessian_eigen_bounds(z, rp: RegParams) -> Tuple[np.ndarray, np.ndarray]:
    """
    Exact eigenvalues of f_eps_hess(z)

    Returns:
        tuple: (eps^2 / f^3 along z, 1 / f orthogonal to z)
    """
    f = f_eps(z, rp)
    return rp.epsilon ** 2 / f ** 3, 1.0 / f
