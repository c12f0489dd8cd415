"""
Conforming triangulations whose boundary vertices lie on the domain boundary
"""
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional, Sequence

import numpy as np

from ..config import Config
from ..errors import MeshGenerationError
from .domain import DomainGeometry

logger = logging.getLogger(__name__)

SANDWICH_SAMPLES_PER_EDGE = 33
BOUNDARY_TOL = 1e-10


def _triangle_edges(triangles: np.ndarray) -> np.ndarray:
    """All (n_tri*3, 2) sorted edges, local order (0,1), (1,2), (2,0)"""
    edges = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    return np.sort(edges, axis=1)


def signed_areas(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    p0, p1, p2 = (vertices[triangles[:, i]] for i in range(3))
    d1 = p1 - p0
    d2 = p2 - p0
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def triangle_angles(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Interior angles in degrees, shape (n_tri, 3)"""
    angles = np.empty(triangles.shape, dtype=float)
    for i in range(3):
        p = vertices[triangles[:, i]]
        q = vertices[triangles[:, (i + 1) % 3]]
        r = vertices[triangles[:, (i + 2) % 3]]
        u = q - p
        v = r - p
        cos = np.sum(u * v, axis=1) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
        angles[:, i] = np.degrees(np.arccos(np.clip(cos, -1.0, 1.0)))
    return angles


@dataclass(frozen=True, eq=False)
class TriMesh:
    """
    Immutable triangulation of the discrete domain Omega^h

    Invariants are checked on construction (``check=True``): conforming,
    positively oriented, boundary flags consistent with the domain, every
    boundary triangle with exactly two vertices on the boundary.
    """
    vertices: np.ndarray
    triangles: np.ndarray
    boundary_vertex_flags: np.ndarray
    domain: DomainGeometry
    min_angle_floor: float = field(default_factory=lambda: Config.MIN_ANGLE_DEG)
    check: bool = True

    def __post_init__(self):
        vertices = np.ascontiguousarray(self.vertices, dtype=float)
        triangles = np.ascontiguousarray(self.triangles, dtype=np.int64)
        flags = np.ascontiguousarray(self.boundary_vertex_flags, dtype=bool)
        for array in (vertices, triangles, flags):
            array.setflags(write=False)
        object.__setattr__(self, 'vertices', vertices)
        object.__setattr__(self, 'triangles', triangles)
        object.__setattr__(self, 'boundary_vertex_flags', flags)
        if self.check:
            self.validate()

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique sorted edges, lexicographic order"""
        return np.unique(_triangle_edges(self.triangles), axis=0)

    @cached_property
    def boundary_edges(self) -> np.ndarray:
        """Edges owned by exactly one triangle (the boundary of Omega^h)"""
        unique, counts = np.unique(_triangle_edges(self.triangles), axis=0, return_counts=True)
        return unique[counts == 1]

    @cached_property
    def mesh_size_h(self) -> float:
        """Maximum edge length"""
        edges = self.edges
        return float(np.max(np.linalg.norm(self.vertices[edges[:, 0]] - self.vertices[edges[:, 1]], axis=1)))

    @property
    def min_angle(self) -> float:
        return float(np.min(triangle_angles(self.vertices, self.triangles)))

    @property
    def areas(self) -> np.ndarray:
        return signed_areas(self.vertices, self.triangles)

    def validate(self):
        """Raise MeshGenerationError listing every violated invariant"""
        errors = []
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise MeshGenerationError("Triangles must be index triples")
        if self.triangles.min() < 0 or self.triangles.max() >= self.n_vertices:
            raise MeshGenerationError("Triangle indices out of range")

        areas = self.areas
        if np.any(areas <= 0):
            errors.append(f"{int(np.sum(areas <= 0))} triangles are not positively oriented")

        # each edge is shared by at most two triangles, with opposite orientation
        directed = np.concatenate([self.triangles[:, [0, 1]], self.triangles[:, [1, 2]],
                                   self.triangles[:, [2, 0]]])
        _, directed_counts = np.unique(directed, axis=0, return_counts=True)
        if np.any(directed_counts > 1):
            errors.append("Non-conforming triangulation: a directed edge is repeated")
        _, counts = np.unique(_triangle_edges(self.triangles), axis=0, return_counts=True)
        if np.any(counts > 2):
            errors.append("Non-conforming triangulation: an edge has more than two triangles")

        tol = BOUNDARY_TOL * self.domain.diameter
        dist = np.abs(self.domain.signed_distance(self.vertices))
        on_boundary = dist <= tol
        if np.any(self.boundary_vertex_flags & ~on_boundary):
            errors.append("Flagged boundary vertices are not on the boundary")

        bedges = self.boundary_edges
        if not np.all(self.boundary_vertex_flags[bedges]):
            errors.append("Boundary edges have vertices off the boundary")

        # every triangle owning a boundary edge has exactly two boundary vertices
        boundary_tri = self._boundary_triangle_mask(bedges)
        n_on = self.boundary_vertex_flags[self.triangles].sum(axis=1)
        if np.any(n_on[boundary_tri] != 2):
            errors.append("A boundary triangle does not have exactly two vertices on the boundary")

        min_angle = self.min_angle
        if min_angle < self.min_angle_floor:
            errors.append(f"Minimum angle {min_angle:.2f} below floor {self.min_angle_floor:.2f}")

        if errors:
            raise MeshGenerationError("Mesh validation failed:\n" + "\n".join(f"  - {e}" for e in errors))

    def _boundary_triangle_mask(self, bedges: np.ndarray) -> np.ndarray:
        local = _triangle_edges(self.triangles).reshape(3, self.n_triangles, 2)
        bset = {tuple(e) for e in bedges.tolist()}
        mask = np.zeros(self.n_triangles, dtype=bool)
        for i in range(3):
            mask |= np.fromiter((tuple(e) in bset for e in local[i].tolist()), dtype=bool,
                                count=self.n_triangles)
        return mask


def _ring_mesh(n_rings: int):
    """
    Unit disk ring mesh: center plus ring i with 6*i equally spaced vertices

    Neighbouring rings are stitched by merging their angle sequences, which
    keeps every triangle close to equilateral.
    """
    points = [(0.0, 0.0)]
    offsets = [0]
    for i in range(1, n_rings + 1):
        offsets.append(len(points))
        n = 6 * i
        radius = i / n_rings
        for j in range(n):
            theta = 2.0 * math.pi * j / n
            points.append((radius * math.cos(theta), radius * math.sin(theta)))

    triangles = []
    first = offsets[1]
    for j in range(6):
        triangles.append((0, first + j, first + (j + 1) % 6))

    for i in range(2, n_rings + 1):
        inner, outer = offsets[i - 1], offsets[i]
        n_a, n_b = 6 * (i - 1), 6 * i
        a = b = 0
        while a < n_a or b < n_b:
            # advance the outer ring when its next angle is not beyond the inner one
            if b < n_b and (a == n_a or (b + 1) * n_a <= (a + 1) * n_b):
                triangles.append((inner + a % n_a, outer + b, outer + (b + 1) % n_b))
                b += 1
            else:
                triangles.append((inner + a, outer + b % n_b, inner + (a + 1) % n_a))
                a += 1

    vertices = np.array(points, dtype=float)
    flags = np.zeros(len(vertices), dtype=bool)
    flags[offsets[n_rings]:] = True
    return vertices, np.array(triangles, dtype=np.int64), flags


def _max_edge(vertices: np.ndarray, triangles: np.ndarray) -> float:
    edges = np.unique(_triangle_edges(triangles), axis=0)
    return float(np.max(np.linalg.norm(vertices[edges[:, 0]] - vertices[edges[:, 1]], axis=1)))


def smooth_interior(vertices: np.ndarray, triangles: np.ndarray, boundary_flags: np.ndarray,
                    iterations: int) -> np.ndarray:
    """Laplacian smoothing of interior vertices; boundary vertices stay fixed"""
    vertices = vertices.copy()
    edges = np.unique(_triangle_edges(triangles), axis=0)
    n = len(vertices)
    degree = np.bincount(edges.ravel(), minlength=n).astype(float)
    interior = ~boundary_flags
    for _ in range(iterations):
        sums = np.zeros_like(vertices)
        np.add.at(sums, edges[:, 0], vertices[edges[:, 1]])
        np.add.at(sums, edges[:, 1], vertices[edges[:, 0]])
        vertices[interior] = sums[interior] / degree[interior, None]
    return vertices


def build_mesh(domain: DomainGeometry, target_h: float,
               min_angle_floor: Optional[float] = None) -> TriMesh:
    """
    Build a structured ring mesh of a disk or ellipse

    Args:
        domain: Disk or ellipse geometry
        target_h: Requested maximum edge length
        min_angle_floor: Minimum angle in degrees (default Config.MIN_ANGLE_DEG)

    Returns:
        TriMesh: Mesh with mesh_size_h <= target_h and boundary vertices on the boundary
    """
    floor = Config.MIN_ANGLE_DEG if min_angle_floor is None else min_angle_floor
    rho_min = domain.min_curvature_radius
    if domain.kind not in ('disk', 'ellipse'):
        raise MeshGenerationError(
            f"No mesh generator for '{domain.kind}' domains; import a mesh with read_mesh instead")
    if not target_h > 0:
        raise MeshGenerationError(f"target_h must be positive, got {target_h}")
    if target_h >= 2.0 * rho_min:
        raise MeshGenerationError(
            f"target_h={target_h} cannot resolve a boundary with curvature radius {rho_min}")
    if target_h > Config.H0_FACTOR * rho_min:
        logger.warning(f"target_h={target_h} exceeds {Config.H0_FACTOR}*min curvature radius "
                       f"({Config.H0_FACTOR * rho_min:.4g}); boundary triangles are coarse")

    if domain.kind == 'disk':
        scale = np.array([domain.parameters['R'], domain.parameters['R']])
    else:
        scale = np.array([domain.parameters['a'], domain.parameters['b']])

    n_rings = max(1, math.ceil(float(np.max(scale)) / target_h))
    while True:
        unit, triangles, flags = _ring_mesh(n_rings)
        vertices = unit * scale
        max_edge = _max_edge(vertices, triangles)
        if max_edge <= target_h:
            break
        # edge length scales like 1/n_rings
        n_rings = max(n_rings + 1, math.ceil(n_rings * max_edge / target_h))

    # place boundary vertices exactly on the boundary
    vertices[flags] = domain.boundary_projection(vertices[flags])

    min_angle = float(np.min(triangle_angles(vertices, triangles)))
    if min_angle < floor:
        logger.info(f"Min angle {min_angle:.2f} below {floor}; smoothing interior vertices")
        for _ in range(Config.SMOOTHING_ITERS):
            vertices = smooth_interior(vertices, triangles, flags, 1)
            min_angle = float(np.min(triangle_angles(vertices, triangles)))
            if min_angle >= floor:
                break
        else:
            raise MeshGenerationError(
                f"Min angle {min_angle:.2f} below floor {floor} after {Config.SMOOTHING_ITERS} smoothing passes")

    mesh = TriMesh(vertices, triangles, flags, domain, min_angle_floor=floor)
    logger.info(f"Built {domain.kind} mesh: {n_rings} rings, {mesh.n_vertices} vertices, "
                f"{mesh.n_triangles} triangles, h={mesh.mesh_size_h:.4g}, min angle {mesh.min_angle:.1f}")
    return mesh


def refinement_sequence(domain: DomainGeometry, h_list: Sequence[float]) -> List[TriMesh]:
    """Meshes for a decreasing list of target sizes"""
    return [build_mesh(domain, h) for h in h_list]


def sandwich_constant(mesh: TriMesh, h: Optional[float] = None,
                      samples_per_edge: int = SANDWICH_SAMPLES_PER_EDGE) -> float:
    """
    Measured constant c with |d| <= c h^2 on the discrete boundary

    Every boundary edge is sampled at ``samples_per_edge`` (>= 32) equally
    spaced points including its end points.

    Args:
        mesh: Triangulation
        h: Mesh size to normalize with (default mesh.mesh_size_h)
        samples_per_edge: Number of samples per boundary edge

    Returns:
        float: sup |signed distance| / h^2 over sampled boundary points
    """
    samples = max(32, int(samples_per_edge))
    h = mesh.mesh_size_h if h is None else h
    bedges = mesh.boundary_edges
    p = mesh.vertices[bedges[:, 0]]
    q = mesh.vertices[bedges[:, 1]]
    t = np.linspace(0.0, 1.0, samples)
    points = p[:, None, :] + t[None, :, None] * (q - p)[:, None, :]
    dist = np.abs(mesh.domain.signed_distance(points.reshape(-1, 2)))
    return float(np.max(dist) / h ** 2)
