"""
ASCII mesh format ``pmcf-mesh v1``

    pmcf-mesh v1
    V <count>
    x y            (one line per vertex, shortest round-trip float repr)
    T <count>
    i j k          (0-based vertex indices)
    B <count>
    i              (boundary vertex indices)
"""
import hashlib
import logging
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import MeshFormatError
from .domain import DomainGeometry
from .mesh import TriMesh

logger = logging.getLogger(__name__)

MESH_HEADER = 'pmcf-mesh v1'


def mesh_checksum(mesh: TriMesh) -> str:
    """SHA-256 over vertex coordinates, connectivity and boundary flags"""
    digest = hashlib.sha256()
    digest.update(np.ascontiguousarray(mesh.vertices, dtype='<f8').tobytes())
    digest.update(np.ascontiguousarray(mesh.triangles, dtype='<i8').tobytes())
    digest.update(np.ascontiguousarray(mesh.boundary_vertex_flags, dtype='u1').tobytes())
    return digest.hexdigest()


def format_mesh(mesh: TriMesh) -> str:
    lines = [MESH_HEADER, f"V {mesh.n_vertices}"]
    lines.extend(f"{float(x)!r} {float(y)!r}" for x, y in mesh.vertices.tolist())
    lines.append(f"T {mesh.n_triangles}")
    lines.extend(f"{i} {j} {k}" for i, j, k in mesh.triangles.tolist())
    boundary = np.flatnonzero(mesh.boundary_vertex_flags)
    lines.append(f"B {len(boundary)}")
    lines.extend(str(i) for i in boundary.tolist())
    return "\n".join(lines) + "\n"


def write_mesh(mesh: TriMesh, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_mesh(mesh))
    logger.info(f"Wrote mesh ({mesh.n_vertices} vertices) to {path}")
    return path


def _section(lines, pos: int, tag: str):
    try:
        key, count = lines[pos].split()
        count = int(count)
    except (IndexError, ValueError):
        raise MeshFormatError(f"Expected '{tag} <count>' at line {pos + 1}")
    if key != tag:
        raise MeshFormatError(f"Expected section '{tag}' at line {pos + 1}, found '{key}'")
    body = lines[pos + 1:pos + 1 + count]
    if len(body) != count:
        raise MeshFormatError(f"Section '{tag}' is truncated")
    return body, pos + 1 + count


def parse_mesh(text: str, domain: DomainGeometry, check: bool = True,
               min_angle_floor: Optional[float] = None) -> TriMesh:
    lines = [line.strip() for line in text.splitlines() if line.strip()]
    if not lines or lines[0] != MESH_HEADER:
        raise MeshFormatError(f"Missing '{MESH_HEADER}' header")
    vbody, pos = _section(lines, 1, 'V')
    tbody, pos = _section(lines, pos, 'T')
    bbody, pos = _section(lines, pos, 'B')

    try:
        vertices = np.array([[float(v) for v in line.split()] for line in vbody], dtype=float).reshape(-1, 2)
        triangles = np.array([[int(v) for v in line.split()] for line in tbody], dtype=np.int64).reshape(-1, 3)
        boundary = np.array([int(line) for line in bbody], dtype=np.int64)
    except ValueError as e:
        raise MeshFormatError(f"Malformed mesh entry: {e}")

    for tag, indices in (('T', triangles), ('B', boundary)):
        bad = indices[(indices < 0) | (indices >= len(vertices))]
        if len(bad):
            raise MeshFormatError(f"Section '{tag}' references vertex {int(bad[0])}, "
                                  f"outside 0..{len(vertices) - 1}")

    flags = np.zeros(len(vertices), dtype=bool)
    flags[boundary] = True
    kwargs = {} if min_angle_floor is None else {'min_angle_floor': min_angle_floor}
    return TriMesh(vertices, triangles, flags, domain, check=check, **kwargs)


def read_mesh(path: Path, domain: DomainGeometry, check: bool = True,
              min_angle_floor: Optional[float] = None) -> TriMesh:
    """
    Read an externally generated mesh

    Args:
        path: File in ``pmcf-mesh v1`` format
        domain: Geometry the boundary vertices must lie on
        check: Validate TriMesh invariants
        min_angle_floor: Override the minimum angle floor

    Returns:
        TriMesh: The imported mesh
    """
    path = Path(path)
    mesh = parse_mesh(path.read_text(), domain, check=check, min_angle_floor=min_angle_floor)
    logger.info(f"Read mesh with {mesh.n_vertices} vertices from {path}")
    return mesh
