"""
Quadratic Lagrange space V_h: dof numbering, element tables, point location,
nodal interpolation I_h and the boundary correction z_h
"""
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Tuple

import numpy as np
from scipy.spatial import cKDTree

from ..errors import PointLocationError
from ..geometry.mesh import TriMesh, _triangle_edges
from .basis import NODES_BARYCENTRIC, p2_reference_gradients, p2_values
from .quadrature import QUADRATURE, TriangleQuadrature

logger = logging.getLogger(__name__)

LOCATE_TOL = 1e-12
LOCATE_CANDIDATES = 12

PointFunction = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ElementData:
    """Per-element geometry and basis tables at the quadrature points"""
    inv_jacobian: np.ndarray      # (n_tri, 2, 2)
    area: np.ndarray              # (n_tri,)
    points: np.ndarray            # (n_tri, nq, 2) physical quadrature points
    values: np.ndarray            # (nq, 6)
    gradients: np.ndarray         # (n_tri, nq, 6, 2)
    weights: np.ndarray           # (n_tri, nq) quadrature weight times area


class P2Space:
    """
    Continuous piecewise-quadratic space on a TriMesh

    Dofs are numbered vertices first, then edges in the mesh's lexicographic
    edge order. Boundary dofs are the vertices and midpoints of the edges of
    the discrete boundary.
    """

    def __init__(self, mesh: TriMesh, quadrature: TriangleQuadrature = QUADRATURE):
        self.mesh = mesh
        self.quadrature = quadrature

        local_edges = _triangle_edges(mesh.triangles)
        self.edges, inverse = np.unique(local_edges, axis=0, return_inverse=True)
        edge_of_triangle = inverse.reshape(-1).reshape(3, mesh.n_triangles).T

        nv = mesh.n_vertices
        self.dofmap = np.hstack([mesh.triangles, nv + edge_of_triangle])
        self.n_dofs = nv + len(self.edges)

        midpoints = 0.5 * (mesh.vertices[self.edges[:, 0]] + mesh.vertices[self.edges[:, 1]])
        self.dof_coordinates = np.vstack([mesh.vertices, midpoints])

        counts = np.bincount(inverse.reshape(-1), minlength=len(self.edges))
        boundary_edge_mask = counts == 1
        boundary = np.zeros(self.n_dofs, dtype=bool)
        boundary[self.edges[boundary_edge_mask].ravel()] = True
        boundary[nv + np.flatnonzero(boundary_edge_mask)] = True
        self.boundary_mask = boundary
        self.boundary_dof_indices = np.flatnonzero(boundary)
        self.interior_dof_indices = np.flatnonzero(~boundary)

        for array in (self.dofmap, self.dof_coordinates, self.boundary_mask,
                      self.boundary_dof_indices, self.interior_dof_indices):
            array.setflags(write=False)

        logger.debug(f"P2 space: {self.n_dofs} dofs, {len(self.interior_dof_indices)} interior")

    @property
    def n_interior(self) -> int:
        return len(self.interior_dof_indices)

    @cached_property
    def _jacobians(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        v = self.mesh.vertices
        t = self.mesh.triangles
        origin = v[t[:, 0]]
        jac = np.stack([v[t[:, 1]] - origin, v[t[:, 2]] - origin], axis=2)
        det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
        inv = np.empty_like(jac)
        inv[:, 0, 0] = jac[:, 1, 1] / det
        inv[:, 1, 1] = jac[:, 0, 0] / det
        inv[:, 0, 1] = -jac[:, 0, 1] / det
        inv[:, 1, 0] = -jac[:, 1, 0] / det
        return origin, jac, inv

    @cached_property
    def element_data(self) -> ElementData:
        origin, jac, inv = self._jacobians
        area = 0.5 * np.abs(jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0])
        ref = self.quadrature.points
        points = origin[:, None, :] + np.einsum('tij,qj->tqi', jac, ref)
        values = p2_values(self.quadrature.barycentric)
        gradients = self.physical_gradients(self.quadrature.barycentric)
        weights = area[:, None] * self.quadrature.weights[None, :]
        return ElementData(inv, area, points, values, gradients, weights)

    def physical_gradients(self, barycentric: np.ndarray) -> np.ndarray:
        """Basis gradients at reference points on every element, shape (n_tri, npts, 6, 2)"""
        _, _, inv = self._jacobians
        ref_grads = p2_reference_gradients(barycentric)
        return np.einsum('tsr,qis->tqir', inv, ref_grads)

    def reference_to_physical(self, barycentric: np.ndarray) -> np.ndarray:
        """Physical coordinates of reference points on every element, shape (n_tri, npts, 2)"""
        origin, jac, _ = self._jacobians
        ref = np.atleast_2d(barycentric)[:, 1:]
        return origin[:, None, :] + np.einsum('tij,qj->tqi', jac, ref)

    @cached_property
    def _centroid_tree(self) -> cKDTree:
        centroids = self.mesh.vertices[self.mesh.triangles].mean(axis=1)
        return cKDTree(centroids)

    def _barycentric(self, triangles: np.ndarray, points: np.ndarray) -> np.ndarray:
        origin, _, inv = self._jacobians
        xi = np.einsum('...ij,...j->...i', inv[triangles], points - origin[triangles])
        return np.stack([1.0 - xi[..., 0] - xi[..., 1], xi[..., 0], xi[..., 1]], axis=-1)

    def locate(self, points, extrapolate: bool = False) -> Tuple[np.ndarray, np.ndarray]:
        """
        Find a containing triangle for every point

        Args:
            points: (N, 2) array
            extrapolate: Use the nearest triangle for points outside Omega^h
                         instead of raising

        Returns:
            tuple: (triangle indices (N,), barycentric coordinates (N, 3))
        """
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        k = min(LOCATE_CANDIDATES, self.mesh.n_triangles)
        _, candidates = self._centroid_tree.query(pts, k=k)
        candidates = np.asarray(candidates).reshape(len(pts), k)
        bary = self._barycentric(candidates, pts[:, None, :])
        inside = np.all(bary >= -LOCATE_TOL, axis=2)
        found = inside.any(axis=1)
        choice = np.argmax(inside, axis=1)
        rows = np.arange(len(pts))
        tri = candidates[rows, choice]
        lam = bary[rows, choice]

        for idx in np.flatnonzero(~found):
            all_tri = np.arange(self.mesh.n_triangles)
            full = self._barycentric(all_tri, pts[idx][None, :])
            min_lam = full.min(axis=1)
            best = int(np.argmax(min_lam))
            if min_lam[best] < -LOCATE_TOL and not extrapolate:
                raise PointLocationError(f"Point {pts[idx].tolist()} lies outside the mesh")
            tri[idx] = best
            lam[idx] = full[best]
        return tri, lam


@dataclass(frozen=True, eq=False)
class FeFunction:
    """
    Element of the P2 space given by its coefficient vector

    The coefficient array is a read-only snapshot.
    """
    space: P2Space
    coefficients: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coefficients, dtype=float, copy=True).reshape(-1)
        if len(coeffs) != self.space.n_dofs:
            raise ValueError(f"Expected {self.space.n_dofs} coefficients, got {len(coeffs)}")
        coeffs.setflags(write=False)
        object.__setattr__(self, 'coefficients', coeffs)

    @classmethod
    def zeros(cls, space: P2Space) -> 'FeFunction':
        return cls(space, np.zeros(space.n_dofs))

    @classmethod
    def from_interior(cls, space: P2Space, interior_values: np.ndarray) -> 'FeFunction':
        coeffs = np.zeros(space.n_dofs)
        coeffs[space.interior_dof_indices] = interior_values
        return cls(space, coeffs)

    @property
    def interior_values(self) -> np.ndarray:
        return self.coefficients[self.space.interior_dof_indices]

    def is_in_vh(self) -> bool:
        """True iff all boundary coefficients vanish"""
        return bool(np.all(self.coefficients[self.space.boundary_dof_indices] == 0.0))

    def _local(self) -> np.ndarray:
        return self.coefficients[self.space.dofmap]

    def values_at(self, points, extrapolate: bool = False) -> np.ndarray:
        tri, lam = self.space.locate(points, extrapolate=extrapolate)
        return np.einsum('ni,ni->n', p2_values(lam), self._local()[tri])

    def gradients_at(self, points, extrapolate: bool = False) -> np.ndarray:
        tri, lam = self.space.locate(points, extrapolate=extrapolate)
        inv = self.space._jacobians[2][tri]
        ref = p2_reference_gradients(lam)
        phys = np.einsum('nsr,nis->nir', inv, ref)
        return np.einsum('nir,ni->nr', phys, self._local()[tri])

    def evaluate(self, p):
        """Exact P2 value at a point (scalar) or at an (N, 2) array of points"""
        values = self.values_at(p)
        return float(values[0]) if np.ndim(p) == 1 else values

    def evaluate_gradient(self, p) -> np.ndarray:
        grads = self.gradients_at(p)
        return grads[0] if np.ndim(p) == 1 else grads

    def element_values(self, barycentric: np.ndarray) -> np.ndarray:
        """Values at reference points on every element, shape (n_tri, npts)"""
        return np.einsum('qi,ti->tq', p2_values(barycentric), self._local())

    def element_gradients(self, barycentric: np.ndarray) -> np.ndarray:
        """Gradients at reference points on every element, shape (n_tri, npts, 2)"""
        return np.einsum('tqir,ti->tqr', self.space.physical_gradients(barycentric), self._local())

    def quadrature_values(self) -> np.ndarray:
        return np.einsum('qi,ti->tq', self.space.element_data.values, self._local())

    def quadrature_gradients(self) -> np.ndarray:
        return np.einsum('tqir,ti->tqr', self.space.element_data.gradients, self._local())

    def _check_space(self, other: 'FeFunction'):
        if other.space is not self.space:
            raise ValueError("FeFunctions live on different spaces")

    def __add__(self, other: 'FeFunction') -> 'FeFunction':
        self._check_space(other)
        return FeFunction(self.space, self.coefficients + other.coefficients)

    def __sub__(self, other: 'FeFunction') -> 'FeFunction':
        self._check_space(other)
        return FeFunction(self.space, self.coefficients - other.coefficients)

    def __mul__(self, scalar: float) -> 'FeFunction':
        return FeFunction(self.space, float(scalar) * self.coefficients)

    __rmul__ = __mul__


def interpolate(space: P2Space, g: PointFunction) -> FeFunction:
    """
    Nodal interpolation I_h: coefficients are g at the dof coordinates

    Args:
        space: Target space
        g: Vectorized function of an (N, 2) point array

    Returns:
        FeFunction: I_h g
    """
    values = np.asarray(g(space.dof_coordinates), dtype=float).reshape(-1)
    return FeFunction(space, values)


def reinterpolate(f: FeFunction, space: P2Space) -> FeFunction:
    """Interpolate f onto another mesh's space, extrapolating near the boundary"""
    return boundary_correct(interpolate(space, lambda pts: f.values_at(pts, extrapolate=True)))


def boundary_correction(f: FeFunction) -> Tuple[FeFunction, FeFunction]:
    """
    Split f = u_tilde + z_h with u_tilde in V_h

    Returns:
        tuple: (u_tilde, z_h) where z_h carries only the boundary coefficients
    """
    space = f.space
    interior = f.coefficients.copy()
    interior[space.boundary_dof_indices] = 0.0
    correction = np.zeros(space.n_dofs)
    correction[space.boundary_dof_indices] = f.coefficients[space.boundary_dof_indices]
    return FeFunction(space, interior), FeFunction(space, correction)


def boundary_correct(f: FeFunction) -> FeFunction:
    """u_tilde = I_h u - z_h: zero the boundary coefficients"""
    return boundary_correction(f)[0]


# Sampling points used by the C0 and Hoelder estimates: the six local nodes and
# the six off-centroid points of the quadrature rule.
SAMPLE_INTERIOR_BARYCENTRIC = QUADRATURE.barycentric[1:]
SAMPLE_BARYCENTRIC = np.vstack([NODES_BARYCENTRIC, SAMPLE_INTERIOR_BARYCENTRIC])
