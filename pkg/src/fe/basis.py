"""
Quadratic Lagrange basis on the reference triangle

Local dof order: vertices 0, 1, 2 then edge midpoints (0,1), (1,2), (2,0).
"""
import numpy as np

# edges by local vertex pairs, matching the midpoint dofs 3, 4, 5
LOCAL_EDGES = ((0, 1), (1, 2), (2, 0))

# barycentric coordinates of the six local nodes
NODES_BARYCENTRIC = np.array([
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
    [0.5, 0.5, 0.0],
    [0.0, 0.5, 0.5],
    [0.5, 0.0, 0.5],
])

# gradients of the barycentric coordinates w.r.t. (xi, eta)
_BARY_GRAD = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])


def p2_values(barycentric: np.ndarray) -> np.ndarray:
    """Basis values, shape (npts, 6)"""
    lam = np.atleast_2d(barycentric)
    values = np.empty((len(lam), 6))
    for i in range(3):
        values[:, i] = lam[:, i] * (2.0 * lam[:, i] - 1.0)
    for m, (i, j) in enumerate(LOCAL_EDGES):
        values[:, 3 + m] = 4.0 * lam[:, i] * lam[:, j]
    return values


def p2_reference_gradients(barycentric: np.ndarray) -> np.ndarray:
    """Basis gradients w.r.t. (xi, eta), shape (npts, 6, 2)"""
    lam = np.atleast_2d(barycentric)
    grads = np.empty((len(lam), 6, 2))
    for i in range(3):
        grads[:, i, :] = (4.0 * lam[:, i] - 1.0)[:, None] * _BARY_GRAD[i]
    for m, (i, j) in enumerate(LOCAL_EDGES):
        grads[:, 3 + m, :] = 4.0 * (lam[:, j, None] * _BARY_GRAD[i] + lam[:, i, None] * _BARY_GRAD[j])
    return grads
