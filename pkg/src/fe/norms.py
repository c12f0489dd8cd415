"""
Norms of finite element functions and of their errors against smooth references

Integral norms use the shared 7-point rule. Sup-type norms are sampling
estimates over a fixed point set: the six local nodes plus six interior
points per triangle. Every function accepts an optional ``reference`` (and
``reference_grad``) callable; the norm is then taken of f - reference.
"""
import logging
from typing import Callable, Optional

import numpy as np
from scipy.spatial.distance import pdist

from ..config import Config
from .space import (SAMPLE_BARYCENTRIC, SAMPLE_INTERIOR_BARYCENTRIC, FeFunction, P2Space)

logger = logging.getLogger(__name__)

PointFunction = Callable[[np.ndarray], np.ndarray]


def _check_exponent(q: float, name: str = 'q'):
    if not (1 <= q < np.inf):
        raise ValueError(f"Exponent {name}={q} must satisfy 1 <= {name} < inf")


def _error_at(points: np.ndarray, values: np.ndarray, reference: Optional[PointFunction]) -> np.ndarray:
    if reference is None:
        return values
    shape = values.shape
    ref = np.asarray(reference(points.reshape(-1, 2)), dtype=float).reshape(shape)
    return values - ref


def _error_grad_at(points: np.ndarray, grads: np.ndarray,
                   reference_grad: Optional[PointFunction]) -> np.ndarray:
    if reference_grad is None:
        return grads
    shape = grads.shape
    ref = np.asarray(reference_grad(points.reshape(-1, 2)), dtype=float).reshape(shape)
    return grads - ref


def quadrature_error(f: FeFunction, reference: Optional[PointFunction] = None) -> np.ndarray:
    data = f.space.element_data
    return _error_at(data.points, f.quadrature_values(), reference)


def quadrature_error_grad(f: FeFunction, reference_grad: Optional[PointFunction] = None) -> np.ndarray:
    data = f.space.element_data
    return _error_grad_at(data.points, f.quadrature_gradients(), reference_grad)


def norm_Lq(f: FeFunction, q: float = 2.0, reference: Optional[PointFunction] = None) -> float:
    """(integral |f - reference|^q)^(1/q) over Omega^h"""
    _check_exponent(q)
    err = quadrature_error(f, reference)
    return float(np.sum(f.space.element_data.weights * np.abs(err) ** q) ** (1.0 / q))


def norm_grad_Lq(f: FeFunction, q: float = 2.0,
                 reference_grad: Optional[PointFunction] = None) -> float:
    """L^q norm of the Euclidean gradient magnitude"""
    _check_exponent(q)
    grad = quadrature_error_grad(f, reference_grad)
    mag = np.linalg.norm(grad, axis=-1)
    return float(np.sum(f.space.element_data.weights * mag ** q) ** (1.0 / q))


def norm_H1mu(f: FeFunction, mu: float = None, reference: Optional[PointFunction] = None,
              reference_grad: Optional[PointFunction] = None) -> float:
    """
    Sobolev norm (||e||_mu^mu + || |grad e| ||_mu^mu)^(1/mu)

    Args:
        f: Finite element function
        mu: Integrability exponent (default Config.DEFAULT_MU)
        reference: Smooth function subtracted from f
        reference_grad: Gradient of the reference, shape (N, 2)

    Returns:
        float: The H^{1,mu} norm of f - reference
    """
    mu = Config.DEFAULT_MU if mu is None else mu
    _check_exponent(mu, 'mu')
    if (reference is None) != (reference_grad is None):
        raise ValueError("reference and reference_grad must be given together")
    weights = f.space.element_data.weights
    err = quadrature_error(f, reference)
    mag = np.linalg.norm(quadrature_error_grad(f, reference_grad), axis=-1)
    total = np.sum(weights * np.abs(err) ** mu) + np.sum(weights * mag ** mu)
    return float(total ** (1.0 / mu))


def _sample_values(f: FeFunction, reference: Optional[PointFunction]) -> np.ndarray:
    points = f.space.reference_to_physical(SAMPLE_BARYCENTRIC)
    return _error_at(points, f.element_values(SAMPLE_BARYCENTRIC), reference)


def norm_C0(f: FeFunction, reference: Optional[PointFunction] = None) -> float:
    """Sampled sup norm: local nodes plus six interior points per triangle"""
    return float(np.max(np.abs(_sample_values(f, reference))))


def nodal_error(f: FeFunction, reference: PointFunction) -> float:
    """max over dofs |f(p) - reference(p)|"""
    ref = np.asarray(reference(f.space.dof_coordinates), dtype=float)
    return float(np.max(np.abs(f.coefficients - ref)))


def norm_W1inf(f: FeFunction, reference: Optional[PointFunction] = None,
               reference_grad: Optional[PointFunction] = None) -> float:
    """
    Sampled H^{1,inf} norm max(sup |e|, sup |grad e|)

    Gradients are taken inside each element, so the piecewise gradient is
    sampled from both sides of every edge.
    """
    points = f.space.reference_to_physical(SAMPLE_BARYCENTRIC)
    values = _error_at(points, f.element_values(SAMPLE_BARYCENTRIC), reference)
    grads = _error_grad_at(points, f.element_gradients(SAMPLE_BARYCENTRIC), reference_grad)
    return float(max(np.max(np.abs(values)), np.max(np.linalg.norm(grads, axis=-1))))


def holder_sample(f: FeFunction, level: int = 1):
    """
    Deterministic sample set for the Hoelder seminorm

    level 0: dof coordinates; level 1: plus six interior points per triangle.

    Returns:
        tuple: (points (N, 2), values of f (N,))
    """
    space = f.space
    if level == 0:
        return space.dof_coordinates, f.coefficients
    interior = space.reference_to_physical(SAMPLE_INTERIOR_BARYCENTRIC).reshape(-1, 2)
    values = f.element_values(SAMPLE_INTERIOR_BARYCENTRIC).reshape(-1)
    return (np.vstack([space.dof_coordinates, interior]),
            np.concatenate([f.coefficients, values]))


def holder_quotient(points: np.ndarray, values: np.ndarray, theta: float,
                    max_pairs: Optional[int] = None) -> float:
    """
    max |v_i - v_j| / |x_i - x_j|^theta over sampled pairs

    When the number of pairs exceeds ``max_pairs`` every stride-th point is
    kept, with the smallest stride that fits.
    """
    if not 0 < theta < 1:
        raise ValueError(f"Hoelder exponent theta={theta} must lie in (0, 1)")
    max_pairs = Config.HOLDER_MAX_PAIRS if max_pairs is None else max_pairs
    points = np.asarray(points, dtype=float)
    values = np.asarray(values, dtype=float).reshape(-1)
    n = len(values)
    stride = 1
    while (n // stride) * (n // stride - 1) // 2 > max_pairs:
        stride += 1
    if stride > 1:
        logger.debug(f"Hoelder sampling: {n} points, stride {stride}")
        points = points[::stride]
        values = values[::stride]
    if len(values) < 2:
        return 0.0
    dist = pdist(points.reshape(len(values), -1))
    diff = pdist(values[:, None], metric='cityblock')
    mask = dist > 0
    if not np.any(mask):
        return 0.0
    return float(np.max(diff[mask] / dist[mask] ** theta))


def holder_seminorm(f: FeFunction, theta: float, reference: Optional[PointFunction] = None,
                    level: int = 1, max_pairs: Optional[int] = None) -> float:
    """Sampled Hoelder seminorm [f - reference]_theta"""
    points, values = holder_sample(f, level)
    if reference is not None:
        values = values - np.asarray(reference(points), dtype=float)
    return holder_quotient(points, values, theta, max_pairs=max_pairs)


def norm_C0theta(f: FeFunction, theta: float, reference: Optional[PointFunction] = None,
                 max_pairs: Optional[int] = None) -> float:
    """C^{0,theta} norm: sup norm plus Hoelder seminorm (theta = 0 gives the sup norm)"""
    c0 = norm_C0(f, reference)
    if theta == 0:
        return c0
    return c0 + holder_seminorm(f, theta, reference, max_pairs=max_pairs)
