"""
Sparse linear solves for the linearized operator
"""
import logging
from typing import Callable, Optional

import numpy as np
from scipy.sparse import csc_matrix
from scipy.sparse.linalg import LinearOperator, gmres, onenormest, spilu, splu

from ..config import Config
from ..errors import LinearSolveError
from ..fe.space import FeFunction, P2Space
from ..operators.assembly import assemble_load, assemble_stiffness

logger = logging.getLogger(__name__)

# linear residual must stay below this fraction of the nonlinear tolerance
LINEAR_TOL_FRACTION = 0.01


def condition_estimate(matrix, lu=None) -> float:
    """1-norm condition estimate; inf when no factorization is available"""
    if lu is None:
        return float('inf')
    n = matrix.shape[0]
    inverse = LinearOperator((n, n), matvec=lu.solve, rmatvec=lambda x: lu.solve(x, trans='T'))
    try:
        return float(onenormest(matrix) * onenormest(inverse))
    except Exception as e:
        logger.debug(f"Condition estimate failed: {e}")
        return float('inf')


class LinearSolver:
    """
    Factorize-once, solve-many wrapper

    ``method='direct'`` uses sparse LU (SuperLU); ``method='gmres'`` uses
    GMRES with an incomplete-LU preconditioner.
    """

    def __init__(self, method: Optional[str] = None, nonlinear_tol: Optional[float] = None):
        self.method = method or Config.LINEAR_SOLVER
        if self.method not in ('direct', 'gmres'):
            raise ValueError(f"Unknown linear solver '{self.method}'")
        tol = Config.NONLINEAR_TOL if nonlinear_tol is None else nonlinear_tol
        self.atol = LINEAR_TOL_FRACTION * tol

    def factorize(self, matrix) -> Callable[[np.ndarray], np.ndarray]:
        """
        Prepare repeated solves with ``matrix``

        Returns:
            callable: b -> x with matrix @ x = b

        Raises:
            LinearSolveError: Singular matrix or failed iterative solve
        """
        A = csc_matrix(matrix)
        if A.shape[0] == 0:
            return lambda b: np.zeros(0)
        if self.method == 'direct':
            return self._factorize_direct(A)
        return self._factorize_gmres(A)

    def solve(self, matrix, rhs: np.ndarray) -> np.ndarray:
        return self.factorize(matrix)(rhs)

    def _factorize_direct(self, A: csc_matrix):
        try:
            lu = splu(A)
        except RuntimeError as e:
            logger.error(f"Sparse LU failed: {e}")
            raise LinearSolveError(f"Singular linearized system: {e}")

        def solve(b):
            x = lu.solve(np.asarray(b, dtype=float))
            if not np.all(np.isfinite(x)):
                raise LinearSolveError("Non-finite solution of the linearized system",
                                       condition_estimate(A, lu))
            return x

        return solve

    def _factorize_gmres(self, A: csc_matrix):
        try:
            ilu = spilu(A, drop_tol=1e-9, fill_factor=32.0)
        except RuntimeError as e:
            raise LinearSolveError(f"Incomplete LU failed: {e}")
        preconditioner = LinearOperator(A.shape, matvec=ilu.solve)

        def solve(b):
            b = np.asarray(b, dtype=float)
            x, info = gmres(A, b, M=preconditioner, rtol=0.0, atol=self.atol, restart=100, maxiter=50)
            if info != 0 or not np.all(np.isfinite(x)):
                try:
                    cond = condition_estimate(A, splu(A))
                except RuntimeError:
                    cond = float('inf')
                raise LinearSolveError(f"GMRES did not converge (info={info})", cond)
            return x

        return solve


def solve_torsion(space: P2Space, solver: Optional[LinearSolver] = None) -> FeFunction:
    """Discrete torsion function: -Laplace psi = 1 in Omega^h, psi = 0 on the boundary"""
    solver = solver or LinearSolver()
    values = solver.solve(assemble_stiffness(space), assemble_load(space))
    return FeFunction.from_interior(space, values)
