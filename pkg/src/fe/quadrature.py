"""
Symmetric 7-point triangle quadrature, exact for polynomials of degree 5
"""
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TriangleQuadrature:
    """
    Quadrature on the reference triangle {xi >= 0, eta >= 0, xi + eta <= 1}

    ``barycentric`` has shape (nq, 3); ``weights`` sum to 1 and must be scaled
    by the physical triangle area.
    """
    barycentric: np.ndarray
    weights: np.ndarray

    @property
    def points(self) -> np.ndarray:
        """Reference coordinates (xi, eta) = (lambda_1, lambda_2)"""
        return self.barycentric[:, 1:]

    def __len__(self):
        return len(self.weights)


def _orbit(a: float) -> np.ndarray:
    b = 1.0 - 2.0 * a
    return np.array([[a, a, b], [b, a, a], [a, b, a]])


def seven_point_rule() -> TriangleQuadrature:
    sqrt15 = np.sqrt(15.0)
    a1 = (6.0 - sqrt15) / 21.0
    a2 = (6.0 + sqrt15) / 21.0
    barycentric = np.vstack([
        [[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]],
        _orbit(a1),
        _orbit(a2),
    ])
    weights = np.concatenate([
        [9.0 / 40.0],
        np.full(3, (155.0 - sqrt15) / 1200.0),
        np.full(3, (155.0 + sqrt15) / 1200.0),
    ])
    return TriangleQuadrature(barycentric, weights)


QUADRATURE = seven_point_rule()
