"""
Discrete solution of the regularized level-set equation

The T-map  L_eps(w_ref) (w - Tw) = R(w)  is iterated either with a frozen
reference (``mode='frozen'``) or with w_ref = current iterate (``mode='newton'``).
Small eps is reached by continuation along a decreasing eps schedule.
"""
import logging
import math
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..config import Config
from ..errors import ContinuationError, ConvergenceError, DivergenceError, PmcfError
from ..fe.norms import norm_H1mu
from ..fe.space import FeFunction, P2Space, boundary_correct, interpolate, reinterpolate
from ..geometry.domain import DomainGeometry
from ..geometry.mesh import TriMesh, build_mesh
from ..operators.assembly import (require_vh, assemble_linearized, assemble_residual,
                                  ellipticity_report)
from ..operators.regularization import RegParams
from .linear import LinearSolver
from .params import CouplingParams, SolveReport

logger = logging.getLogger(__name__)

PointFunction = Callable[[np.ndarray], np.ndarray]
Reference = Tuple[PointFunction, PointFunction]
StageCallback = Callable[[int, float, FeFunction, SolveReport], None]


def _as_space(target: Union[TriMesh, P2Space]) -> P2Space:
    return target if isinstance(target, P2Space) else P2Space(target)


def _max_norm(vector: np.ndarray) -> float:
    return float(np.max(np.abs(vector))) if len(vector) else 0.0


def apply_T(w: FeFunction, w_ref: FeFunction, rp: RegParams,
            linear_solver: Optional[LinearSolver] = None,
            residual_fn: Optional[Callable[[FeFunction], np.ndarray]] = None) -> FeFunction:
    """
    One application of the T-map: solve A(w_ref) d = R(w) and return w - d

    Args:
        w: Current function in V_h
        w_ref: Linearization point in V_h
        rp: Regularization parameters
        linear_solver: Solver for the linearized system
        residual_fn: Replacement for assemble_residual (interior vector)

    Returns:
        FeFunction: Tw
    """
    require_vh(w)
    residual = residual_fn(w) if residual_fn is not None else assemble_residual(w, rp)
    solver = linear_solver or LinearSolver()
    correction = solver.solve(assemble_linearized(w_ref, rp), residual)
    return FeFunction.from_interior(w.space, w.interior_values - correction)


def solve_regularized(target: Union[TriMesh, P2Space], rp: RegParams,
                      init: Optional[FeFunction] = None, mode: str = 'newton',
                      tol: Optional[float] = None, max_iter: Optional[int] = None,
                      linear_solver: Optional[LinearSolver] = None,
                      reference: Optional[Reference] = None,
                      coupling: Optional[CouplingParams] = None) -> Tuple[FeFunction, SolveReport]:
    """
    Solve R(w) = 0 in V_h

    Args:
        target: Mesh or P2 space
        rp: Regularization parameters
        init: Starting function in V_h (default zero)
        mode: 'newton' or 'frozen' (linearization fixed at init)
        tol: Max-norm residual tolerance (default Config.NONLINEAR_TOL)
        max_iter: Iteration limit (default Config.MAX_ITER)
        linear_solver: Linear solver (default from Config)
        reference: (u, Du) callables; the report then carries the H^{1,mu} ball distance
        coupling: Coupling parameters; the report then carries the ball radius rho

    Returns:
        tuple: (solution, SolveReport)

    Raises:
        ConvergenceError: Tolerance not reached within max_iter
        DivergenceError: Residual grew by Config.DIVERGENCE_FACTOR from its minimum
    """
    if mode not in ('newton', 'frozen'):
        raise ValueError(f"Unknown iteration mode '{mode}'")
    space = init.space if init is not None else _as_space(target)
    tol = Config.NONLINEAR_TOL if tol is None else tol
    max_iter = Config.MAX_ITER if max_iter is None else max_iter
    if not tol > 0:
        raise ValueError(f"Tolerance must be positive, got {tol}")
    solver = linear_solver or LinearSolver(nonlinear_tol=tol)
    mu = coupling.mu if coupling is not None else Config.DEFAULT_MU

    w = init if init is not None else FeFunction.zeros(space)
    require_vh(w, 'init')
    residual = assemble_residual(w, rp)
    history = [_max_norm(residual)]
    contraction: List[float] = []
    iterations = 0
    logger.debug(f"eps={rp.epsilon:g}: initial residual {history[0]:.3e}")

    frozen_solve = solver.factorize(assemble_linearized(w, rp)) if mode == 'frozen' else None
    previous_step = None

    while history[-1] > tol:
        if iterations >= max_iter:
            logger.error(f"eps={rp.epsilon:g}: no convergence after {max_iter} iterations "
                         f"(residual {history[-1]:.3e})")
            raise ConvergenceError(f"Residual {history[-1]:.3e} > {tol:g} after {max_iter} iterations",
                                   history)
        solve = frozen_solve or solver.factorize(assemble_linearized(w, rp))
        correction = solve(residual)

        step = 1.0
        for _ in range(Config.MAX_HALVINGS + 1):
            trial = FeFunction.from_interior(space, w.interior_values - step * correction)
            trial_residual = assemble_residual(trial, rp)
            trial_norm = _max_norm(trial_residual)
            if mode == 'frozen' or trial_norm < history[-1]:
                break
            step *= 0.5
        else:
            logger.warning(f"eps={rp.epsilon:g}: damping exhausted at iteration {iterations + 1}")

        step_size = norm_H1mu(trial - w, mu)
        if previous_step:
            contraction.append(step_size / previous_step)
        previous_step = step_size
        w, residual = trial, trial_residual
        iterations += 1
        history.append(trial_norm if np.isfinite(trial_norm) else math.inf)
        logger.debug(f"eps={rp.epsilon:g} it {iterations}: residual {history[-1]:.3e}, step {step:g}")

        if history[-1] > Config.DIVERGENCE_FACTOR * min(history):
            logger.error(f"eps={rp.epsilon:g}: residual diverged to {history[-1]:.3e}")
            raise DivergenceError(f"Residual grew to {history[-1]:.3e} from {min(history):.3e}", history)

    h = space.mesh.mesh_size_h
    report = SolveReport(
        epsilon=rp.epsilon, h=h, k=rp.k, mode=mode, iterations=iterations,
        final_residual=history[-1], residual_history=history,
        contraction_estimates=contraction, ellipticity=ellipticity_report(w, rp),
        ball_radius_rho=coupling.ball_radius(rp.epsilon, h) if coupling is not None else None,
        ball_distance=(norm_H1mu(w, mu, reference[0], reference[1])
                       if reference is not None else None),
    )
    logger.info(f"Solved eps={rp.epsilon:g}, h={h:.4g} ({mode}): {iterations} iterations, "
                f"residual {report.final_residual:.3e}")
    return w, report


def default_schedule(epsilon: float, start: Optional[float] = None) -> List[float]:
    """Halving schedule start, start/2, ... strictly above epsilon, then epsilon"""
    start = Config.CONTINUATION_START_EPS if start is None else start
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    schedule = []
    value = start
    while value > epsilon * (1.0 + 1e-12):
        schedule.append(value)
        value *= 0.5
    schedule.append(epsilon)
    return schedule


def coupled_mesh_size(cp: CouplingParams, epsilon: float) -> float:
    """h = c_coupling * eps^beta"""
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    return cp.mesh_size(epsilon)


def _check_schedule(schedule: Sequence[float], epsilon: float):
    if not schedule:
        raise ValueError("Continuation schedule is empty")
    if any(b >= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError(f"Schedule must be strictly decreasing: {list(schedule)}")
    if not math.isclose(schedule[-1], epsilon, rel_tol=1e-12):
        raise ValueError(f"Schedule ends at {schedule[-1]}, expected target epsilon {epsilon}")


def continuation_solve(target: Union[TriMesh, P2Space, DomainGeometry], rp_target: RegParams,
                       schedule: Optional[Sequence[float]] = None, tol: Optional[float] = None,
                       mode: str = 'newton', coupling: Optional[CouplingParams] = None,
                       init: Optional[FeFunction] = None,
                       linear_solver: Optional[LinearSolver] = None,
                       reference_for: Optional[Callable[[float], Reference]] = None,
                       on_stage: Optional[StageCallback] = None) -> Tuple[FeFunction, List[SolveReport]]:
    """
    Reach rp_target.epsilon through a decreasing eps schedule

    With a mesh or space the mesh is fixed. With a DomainGeometry and
    ``coupling`` each stage builds a mesh of size c_coupling * eps^beta and the
    previous stage's solution is re-interpolated onto it.

    Args:
        target: Mesh, space, or domain (coupled)
        rp_target: Final regularization parameters
        schedule: Strictly decreasing eps values ending at rp_target.epsilon
                  (default default_schedule)
        tol: Nonlinear tolerance of every stage
        mode: Iteration mode for every stage
        coupling: Coupling parameters (required for a DomainGeometry target)
        init: Starting function for the first stage
        linear_solver: Linear solver shared by all stages
        reference_for: eps -> (u, Du) reference for the ball distance
        on_stage: Called as on_stage(index, eps, solution, report) after each stage

    Returns:
        tuple: (final solution, list of per-stage SolveReports)

    Raises:
        ContinuationError: A stage failed; carries the stage index
    """
    schedule = list(schedule) if schedule is not None else default_schedule(rp_target.epsilon)
    _check_schedule(schedule, rp_target.epsilon)
    coupled = isinstance(target, DomainGeometry)
    if coupled and coupling is None:
        raise ValueError("A domain target requires coupling parameters")
    fixed_space = None if coupled else _as_space(target)

    w = init
    reports: List[SolveReport] = []
    for stage, epsilon in enumerate(schedule):
        rp = rp_target.with_epsilon(epsilon)
        try:
            if coupled:
                space = P2Space(build_mesh(target, coupled_mesh_size(coupling, epsilon)))
            else:
                space = fixed_space
            if w is None:
                w = FeFunction.zeros(space)
            elif w.space is not space:
                w = reinterpolate(w, space)
            reference = reference_for(epsilon) if reference_for is not None else None
            w, report = solve_regularized(space, rp, init=w, mode=mode, tol=tol,
                                          linear_solver=linear_solver, reference=reference,
                                          coupling=coupling)
        except (PmcfError, ValueError) as e:
            logger.error(f"Continuation stage {stage} (eps={epsilon:g}) failed: {e}")
            raise ContinuationError(stage, epsilon, e) from e
        reports.append(report)
        if on_stage is not None:
            on_stage(stage, epsilon, w, report)
    return w, reports


def perturbation_field(domain: DomainGeometry, rng: np.random.Generator,
                       modes: int = 4) -> PointFunction:
    """Random trigonometric field with wavelengths of order the domain size, zero on the boundary"""
    freqs = rng.normal(size=(modes, 2)) * (2.0 * np.pi / domain.diameter)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=modes)
    amps = rng.normal(size=modes)

    def field(points):
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        # distance bubble keeps the gradient bounded up to the boundary
        bubble = np.maximum(-domain.signed_distance(points), 0.0)
        return bubble * (np.cos(points @ freqs.T + phases) @ amps)

    return field


def _smooth_perturbation(space: P2Space, rng: np.random.Generator) -> FeFunction:
    return boundary_correct(interpolate(space, perturbation_field(space.mesh.domain, rng)))


def contraction_probe(w_ref: FeFunction, rp: RegParams, sigma: float, trials: int = 8,
                      center: Optional[FeFunction] = None, mu: Optional[float] = None,
                      seed: Optional[int] = None,
                      linear_solver: Optional[LinearSolver] = None) -> float:
    """
    Empirical Lipschitz constant of the frozen T-map on a ball

    Pairs v, w are drawn in the ball of H^{1,mu} radius ``sigma`` about
    ``center`` (default w_ref); L_eps is frozen at w_ref.

    Returns:
        float: max over trials of ||Tv - Tw|| / ||v - w|| (H^{1,mu} norms)
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if trials < 1:
        raise ValueError(f"trials must be at least 1, got {trials}")
    mu = Config.DEFAULT_MU if mu is None else mu
    center = w_ref if center is None else center
    rng = np.random.default_rng(Config.RANDOM_SEED if seed is None else seed)
    solver = linear_solver or LinearSolver()
    solve = solver.factorize(assemble_linearized(w_ref, rp))
    space = w_ref.space

    ratios = []
    for _ in range(trials):
        p = _smooth_perturbation(space, rng)
        q = _smooth_perturbation(space, rng)
        v = center + p * (sigma / norm_H1mu(p, mu))
        w = center + q * (sigma * rng.uniform(0.0, 1.0) / norm_H1mu(q, mu))
        difference = v - w
        correction = solve(assemble_residual(v, rp) - assemble_residual(w, rp))
        t_difference = FeFunction.from_interior(space, difference.interior_values - correction)
        ratios.append(norm_H1mu(t_difference, mu) / norm_H1mu(difference, mu))

    logger.info(f"Contraction probe eps={rp.epsilon:g}, sigma={sigma:.3e}: "
                f"max ratio {max(ratios):.4f} over {trials} trials")
    return float(max(ratios))
