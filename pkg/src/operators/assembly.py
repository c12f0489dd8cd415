"""
Assembly of the regularized level-set operator on the P2 space

Residual (weak form, interior test functions phi_i):

    R_i(w) = int <Dw, Dphi_i> / f_eps(Dw) - int f_eps(Dw)^(-1/k) phi_i

Linearization at w_ref (the Jacobian of R):

    A_ij = int H(Dw_ref) Dphi_j . Dphi_i
         + (1/k) int f_eps(Dw_ref)^(-1-1/k) <Dw_ref / f_eps, Dphi_j> phi_i

Element contributions are summed in fixed element order (bincount for
vectors, COO -> CSR for matrices) so results are bit-reproducible.
"""
import logging
from pathlib import Path
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix

from ..errors import NotInTrialSpaceError
from ..fe.space import FeFunction, P2Space
from .regularization import (EllipticityReport, RegParams, f_eps, f_eps_hess,
                             hessian_eigen_bounds)

logger = logging.getLogger(__name__)

PointFunction = Callable[[np.ndarray], np.ndarray]


def require_vh(w: FeFunction, name: str = 'w'):
    if not w.is_in_vh():
        bad = int(np.count_nonzero(w.coefficients[w.space.boundary_dof_indices]))
        raise NotInTrialSpaceError(f"{name} has {bad} nonzero boundary coefficients")


def _scatter_vector(space: P2Space, local: np.ndarray) -> np.ndarray:
    full = np.bincount(space.dofmap.ravel(), weights=local.ravel(), minlength=space.n_dofs)
    return full[space.interior_dof_indices]


def _scatter_matrix(space: P2Space, local: np.ndarray) -> csr_matrix:
    dofmap = space.dofmap
    rows = np.broadcast_to(dofmap[:, :, None], local.shape).ravel()
    cols = np.broadcast_to(dofmap[:, None, :], local.shape).ravel()
    full = coo_matrix((local.ravel(), (rows, cols)), shape=(space.n_dofs, space.n_dofs)).tocsr()
    interior = space.interior_dof_indices
    return full[interior][:, interior].tocsr()


def _coefficients(w: FeFunction, rp: RegParams):
    """Gradient, f_eps and unit flux Dw/f at every quadrature point"""
    grad = w.quadrature_gradients()
    f = f_eps(grad, rp)
    return grad, f, grad / f[..., None]


def assemble_residual(w: FeFunction, rp: RegParams) -> np.ndarray:
    """
    Weak residual of the regularized equation

    Args:
        w: Function in V_h
        rp: Regularization parameters

    Returns:
        np.ndarray: R_i for every interior dof, in interior dof order
    """
    require_vh(w)
    data = w.space.element_data
    _, f, flux = _coefficients(w, rp)
    source = f ** (-rp.inv_k)
    local = (np.einsum('tq,tqr,tqir->ti', data.weights, flux, data.gradients)
             - np.einsum('tq,qi->ti', data.weights * source, data.values))
    return _scatter_vector(w.space, local)


def assemble_linearized_parts(w_ref: FeFunction, rp: RegParams) -> Tuple[csr_matrix, csr_matrix]:
    """
    Second-order (symmetric) and first-order (convection) parts of L_eps at w_ref

    Returns:
        tuple: (diffusion, convection) sparse matrices over interior dofs
    """
    require_vh(w_ref, 'w_ref')
    data = w_ref.space.element_data
    grad, f, flux = _coefficients(w_ref, rp)
    hess = f_eps_hess(grad, rp)

    hess_grad = np.einsum('tqrs,tqjs->tqjr', hess, data.gradients)
    diffusion = np.einsum('tq,tqir,tqjr->tij', data.weights, data.gradients, hess_grad)

    scale = rp.inv_k * f ** (-1.0 - rp.inv_k)
    flux_grad = np.einsum('tqr,tqjr->tqj', flux, data.gradients)
    convection = np.einsum('tq,tqj,qi->tij', data.weights * scale, flux_grad, data.values)

    return _scatter_matrix(w_ref.space, diffusion), _scatter_matrix(w_ref.space, convection)


def assemble_linearized(w_ref: FeFunction, rp: RegParams) -> csr_matrix:
    """Jacobian of assemble_residual at w_ref (nonsymmetric in general)"""
    diffusion, convection = assemble_linearized_parts(w_ref, rp)
    return (diffusion + convection).tocsr()


def assemble_stiffness(space: P2Space) -> csr_matrix:
    """int Dphi_j . Dphi_i over interior dofs"""
    data = space.element_data
    local = np.einsum('tq,tqir,tqjr->tij', data.weights, data.gradients, data.gradients)
    return _scatter_matrix(space, local)


def assemble_load(space: P2Space, source: Optional[PointFunction] = None) -> np.ndarray:
    """int g phi_i over interior dofs (g = 1 when no source is given)"""
    data = space.element_data
    if source is None:
        g = np.ones(data.weights.shape)
    else:
        g = np.asarray(source(data.points.reshape(-1, 2)), dtype=float).reshape(data.weights.shape)
    local = np.einsum('tq,qi->ti', data.weights * g, data.values)
    return _scatter_vector(space, local)


def ellipticity_report(w_ref: FeFunction, rp: RegParams) -> EllipticityReport:
    """Ellipticity diagnostics of L_eps sampled at the quadrature points"""
    data = w_ref.space.element_data
    grad, f, flux = _coefficients(w_ref, rp)
    lam, big_lam = hessian_eigen_bounds(grad, rp)
    convection = (rp.inv_k * f ** (-1.0 - rp.inv_k))[..., None] * flux
    conv_norm = np.linalg.norm(convection, axis=-1)

    # C^1 size: sup norms plus within-element difference quotients
    coeffs = np.concatenate([f_eps_hess(grad, rp).reshape(*grad.shape[:2], 4), convection], axis=-1)
    diff = np.linalg.norm(coeffs[:, :, None, :] - coeffs[:, None, :, :], axis=-1)
    dist = np.linalg.norm(data.points[:, :, None, :] - data.points[:, None, :, :], axis=-1)
    mask = dist > 0
    lipschitz = float(np.max(diff[mask] / dist[mask])) if np.any(mask) else 0.0

    report = EllipticityReport(
        lambda_min=float(np.min(lam)),
        lambda_max=float(np.max(big_lam)),
        ratio=float(np.max(big_lam) / np.min(lam)),
        nu=float(np.max(conv_norm / lam)),
        a1=float(np.max(big_lam) + np.max(conv_norm) + lipschitz),
    )
    logger.debug(f"Ellipticity: lambda in [{report.lambda_min:.3e}, {report.lambda_max:.3e}], "
                 f"nu={report.nu:.3e}")
    return report


def level_set_operator_residual(u_fn: PointFunction, grad_fn: PointFunction,
                                hess_fn: PointFunction, k: float, epsilon: float,
                                points: np.ndarray) -> np.ndarray:
    """
    Pointwise residual of the non-divergence form

        -|Du|_eps^(1/k - 1) (delta_ij - D_iu D_ju / |Du|_eps^2) D_ij u - 1

    epsilon = 0 gives the unregularized level-set operator (gradient must not vanish).

    Args:
        u_fn: Function values (unused by the operator, checked for finiteness)
        grad_fn: Gradient, (N, 2)
        hess_fn: Hessian, (N, 2, 2)
        k: Curvature power
        epsilon: Regularization (>= 0)
        points: (N, 2) evaluation points
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if not np.all(np.isfinite(u_fn(pts))):
        raise ValueError("u is not finite at the evaluation points")
    p = np.asarray(grad_fn(pts), dtype=float).reshape(-1, 2)
    hess = np.asarray(hess_fn(pts), dtype=float).reshape(-1, 2, 2)
    norm = np.sqrt(np.sum(p * p, axis=1) + epsilon ** 2)
    if np.any(norm == 0):
        raise ValueError("Gradient vanishes with epsilon = 0")
    projector = np.eye(2) - p[:, :, None] * p[:, None, :] / norm[:, None, None] ** 2
    trace = np.einsum('nij,nij->n', projector, hess)
    return -norm ** (1.0 / k - 1.0) * trace - 1.0


def dump_triplets(matrix, path: Path) -> Path:
    """Write a sparse matrix as 'row col value' lines, row-major order"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    csr = csr_matrix(matrix)
    csr.sort_indices()
    coo = csr.tocoo()
    lines = [f"{i} {j} {float(v)!r}" for i, j, v in zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist())]
    path.write_text("\n".join(lines) + ("\n" if lines else ""))
    logger.info(f"Wrote {coo.nnz} triplets to {path}")
    return path
