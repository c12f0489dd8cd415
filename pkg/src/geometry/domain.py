"""
Smooth 2D domains described by a signed distance function

Sign convention: negative strictly inside, zero on the boundary, positive outside.
All callables are vectorized over an (N, 2) array of points.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

logger = logging.getLogger(__name__)

PointFunction = Callable[[np.ndarray], np.ndarray]


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    return pts.reshape(-1, 2)


def _ellipse_parameter(a: float, b: float, y0: np.ndarray, y1: np.ndarray) -> np.ndarray:
    """
    Root of (a*y0/(t+a^2))^2 + (b*y1/(t+b^2))^2 = 1 with t > -b^2, first quadrant, a >= b

    The root is bracketed and found by bisection; the function is monotone in t.
    """
    lo = -b * b + b * y1
    hi = -b * b + np.sqrt(a * a * y0 * y0 + b * b * y1 * y1)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        g = (a * y0 / (mid + a * a)) ** 2 + (b * y1 / (mid + b * b)) ** 2 - 1.0
        lo = np.where(g > 0, mid, lo)
        hi = np.where(g > 0, hi, mid)
    return 0.5 * (lo + hi)


def _ellipse_projection(a: float, b: float, pts: np.ndarray) -> np.ndarray:
    """Closest boundary point of the axis-aligned ellipse for every row of pts"""
    swap = a < b
    if swap:
        a, b = b, a
        pts = pts[:, ::-1]
    sx = np.where(pts[:, 0] < 0, -1.0, 1.0)
    sy = np.where(pts[:, 1] < 0, -1.0, 1.0)
    y0 = np.abs(pts[:, 0])
    y1 = np.abs(pts[:, 1])

    x0 = np.empty_like(y0)
    x1 = np.empty_like(y1)

    generic = (y1 > 0) & (y0 > 0)
    if np.any(generic):
        t = _ellipse_parameter(a, b, y0[generic], y1[generic])
        x0[generic] = a * a * y0[generic] / (t + a * a)
        x1[generic] = b * b * y1[generic] / (t + b * b)

    # on the major axis: points close to the center project off-axis
    on_major = y1 == 0
    if np.any(on_major):
        focal = a * a - b * b
        inner = a * y0[on_major] < focal
        xa = np.where(inner, a * a * y0[on_major] / (focal if focal > 0 else 1.0), a)
        x0[on_major] = xa
        x1[on_major] = np.where(inner, b * np.sqrt(np.clip(1.0 - (xa / a) ** 2, 0.0, None)), 0.0)

    # on the minor axis
    on_minor = (y0 == 0) & (y1 > 0)
    x0[on_minor] = 0.0
    x1[on_minor] = b

    proj = np.column_stack([sx * x0, sy * x1])
    if swap:
        proj = proj[:, ::-1]
    return proj


@dataclass(frozen=True)
class DomainGeometry:
    """
    Smooth domain with signed distance and boundary projection

    Use the ``disk``, ``ellipse`` or ``custom`` constructors rather than the
    raw initializer.
    """
    kind: str
    parameters: dict
    _signed_distance: PointFunction = field(repr=False)
    _projection: PointFunction = field(repr=False)
    min_curvature_radius: float = float('inf')
    diameter: float = 1.0

    @classmethod
    def disk(cls, R: float = 1.0) -> 'DomainGeometry':
        if not R > 0:
            raise ValueError(f"Disk radius must be positive, got {R}")

        def signed_distance(points):
            pts = _as_points(points)
            return np.hypot(pts[:, 0], pts[:, 1]) - R

        def projection(points):
            pts = _as_points(points)
            r = np.hypot(pts[:, 0], pts[:, 1])
            safe = np.where(r > 0, r, 1.0)
            proj = R * pts / safe[:, None]
            proj[r == 0] = (R, 0.0)
            return proj

        return cls('disk', {'R': float(R)}, signed_distance, projection,
                   min_curvature_radius=float(R), diameter=2.0 * R)

    @classmethod
    def ellipse(cls, a: float, b: float) -> 'DomainGeometry':
        if not (a > 0 and b > 0):
            raise ValueError(f"Ellipse semi-axes must be positive, got a={a}, b={b}")

        def projection(points):
            return _ellipse_projection(float(a), float(b), _as_points(points))

        def signed_distance(points):
            pts = _as_points(points)
            dist = np.linalg.norm(pts - projection(pts), axis=1)
            inside = (pts[:, 0] / a) ** 2 + (pts[:, 1] / b) ** 2 < 1.0
            return np.where(inside, -dist, dist)

        rho_min = min(a, b) ** 2 / max(a, b)
        return cls('ellipse', {'a': float(a), 'b': float(b)}, signed_distance, projection,
                   min_curvature_radius=rho_min, diameter=2.0 * max(a, b))

    @classmethod
    def custom(cls, signed_distance: PointFunction, projection: Optional[PointFunction] = None,
               diameter: float = 1.0,
               min_curvature_radius: float = float('inf')) -> 'DomainGeometry':
        """
        User-supplied signed distance sampler

        Without a projection, boundary points are found by a gradient step
        p - d(p) * grad d(p) repeated to convergence (grad by central differences).
        """
        def sampled_sdf(points):
            return np.asarray(signed_distance(_as_points(points)), dtype=float)

        if projection is None:
            step = 1e-7 * diameter

            def projection(points):
                pts = _as_points(points).copy()
                for _ in range(50):
                    d = sampled_sdf(pts)
                    gx = (sampled_sdf(pts + [step, 0.0]) - sampled_sdf(pts - [step, 0.0])) / (2 * step)
                    gy = (sampled_sdf(pts + [0.0, step]) - sampled_sdf(pts - [0.0, step])) / (2 * step)
                    norm = np.hypot(gx, gy)
                    norm = np.where(norm > 0, norm, 1.0)
                    pts -= (d / norm)[:, None] * np.column_stack([gx / norm, gy / norm])
                    if np.max(np.abs(d)) <= 1e-14 * diameter:
                        break
                return pts

        return cls('custom', {}, sampled_sdf, projection,
                   min_curvature_radius=min_curvature_radius, diameter=diameter)

    def signed_distance(self, points) -> np.ndarray:
        """Signed distance d(p), d < 0 inside"""
        return self._signed_distance(points)

    def boundary_projection(self, points) -> np.ndarray:
        """Closest point on the boundary"""
        return self._projection(points)

    def contains(self, points, tol: float = 0.0) -> np.ndarray:
        return self.signed_distance(points) <= tol * self.diameter
