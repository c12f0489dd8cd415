"""
ASCII dump of finite element functions, format ``pmcf-fun v1``

    pmcf-fun v1
    mesh <sha256 of the mesh>
    n <number of dofs>
    c              (one coefficient per line, dof order)
"""
import logging
from pathlib import Path

import numpy as np

from ..errors import MeshFormatError
from ..geometry.mesh_io import mesh_checksum
from .space import FeFunction, P2Space

logger = logging.getLogger(__name__)

FUNCTION_HEADER = 'pmcf-fun v1'


def format_function(f: FeFunction) -> str:
    lines = [FUNCTION_HEADER, f"mesh {mesh_checksum(f.space.mesh)}", f"n {f.space.n_dofs}"]
    lines.extend(repr(float(c)) for c in f.coefficients.tolist())
    return "\n".join(lines) + "\n"


def write_function(f: FeFunction, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_function(f))
    logger.info(f"Wrote {f.space.n_dofs} coefficients to {path}")
    return path


def parse_function(text: str, space: P2Space) -> FeFunction:
    """
    Rebuild a FeFunction on ``space`` from its dump

    Raises:
        MeshFormatError: Bad header, wrong mesh checksum or dof count
    """
    lines = [line.strip() for line in text.splitlines() if line.strip()]
    if len(lines) < 3 or lines[0] != FUNCTION_HEADER:
        raise MeshFormatError(f"Missing '{FUNCTION_HEADER}' header")
    tag, _, checksum = lines[1].partition(' ')
    if tag != 'mesh':
        raise MeshFormatError("Expected 'mesh <checksum>' on line 2")
    if checksum != mesh_checksum(space.mesh):
        raise MeshFormatError("Function was written for a different mesh")
    tag, _, count = lines[2].partition(' ')
    if tag != 'n' or not count.isdigit() or int(count) != space.n_dofs:
        raise MeshFormatError(f"Expected 'n {space.n_dofs}' on line 3, found '{lines[2]}'")
    body = lines[3:]
    if len(body) != space.n_dofs:
        raise MeshFormatError(f"Expected {space.n_dofs} coefficients, found {len(body)}")
    try:
        coefficients = np.array([float(v) for v in body])
    except ValueError as e:
        raise MeshFormatError(f"Malformed coefficient: {e}")
    return FeFunction(space, coefficients)


def read_function(path: Path, space: P2Space) -> FeFunction:
    path = Path(path)
    return parse_function(path.read_text(), space)
