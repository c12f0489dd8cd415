"""
Tests for the linear solver, the T-map iteration, continuation and the contraction probe
"""
import math

import numpy as np
import pytest
from pydantic import ValidationError
from scipy.sparse import csr_matrix
from scipy.spatial import cKDTree

from src.config import Config
from src.errors import ContinuationError, ConvergenceError, LinearSolveError
from src.fe.norms import norm_C0
from src.fe.space import FeFunction, P2Space, interpolate
from src.geometry.mesh import build_mesh
from src.operators.assembly import assemble_linearized, assemble_load, assemble_residual, assemble_stiffness
from src.operators.regularization import RegParams
from src.oracle.radial import radial_gradient_2d, radial_regularized_solve, radial_to_2d
from src.solver.fixed_point import (apply_T, continuation_solve, contraction_probe, coupled_mesh_size,
                                    default_schedule, perturbation_field, solve_regularized)
from src.solver.linear import LinearSolver, solve_torsion
from src.solver.params import SOLVE_REPORT_COLUMNS, CouplingParams, SolveReport


@pytest.fixture(scope='module')
def disk_solution(medium_space):
    """Converged solution at eps=0.5, k=2 on the h=0.2 disk mesh"""
    return solve_regularized(medium_space, RegParams(epsilon=0.5, k=2.0))


class TestCouplingParams:
    def test_defaults_valid(self):
        cp = CouplingParams()
        assert cp.mu == Config.DEFAULT_MU
        assert 1.0 < cp.delta < 0.5 + 2.0 / cp.mu

    @pytest.mark.parametrize('kwargs', [{'mu': 5.0}, {'mu': 2.0}, {'delta': 1.2}, {'delta': 1.0},
                                        {'beta': -1.0}, {'c_coupling': 0.0}])
    def test_invalid(self, kwargs):
        with pytest.raises(ValidationError):
            CouplingParams(**kwargs)

    def test_beta_zero_allowed(self):
        cp = CouplingParams(beta=0.0, c_coupling=0.3)
        assert coupled_mesh_size(cp, 0.01) == pytest.approx(0.3)

    def test_mesh_size(self):
        cp = CouplingParams(beta=2.0, c_coupling=0.5)
        assert coupled_mesh_size(cp, 0.1) == pytest.approx(0.005)
        assert coupled_mesh_size(cp, 1.0) == pytest.approx(0.5)
        assert coupled_mesh_size(cp, 0.05) / coupled_mesh_size(cp, 0.1) == pytest.approx(0.25)
        with pytest.raises(ValueError):
            coupled_mesh_size(cp, 0.0)

    def test_ball_radius(self):
        cp = CouplingParams(gamma_ball=1.0, c_ball=2.0, delta=1.1)
        assert cp.ball_radius(0.5, 0.1) == pytest.approx(4.0 * 0.1 ** 1.1)


class TestLinearSolver:
    def test_direct_and_gmres_agree(self, coarse_space):
        K, b = assemble_stiffness(coarse_space), assemble_load(coarse_space)
        direct = LinearSolver('direct').solve(K, b)
        iterative = LinearSolver('gmres', nonlinear_tol=1e-10).solve(K, b)
        np.testing.assert_allclose(K @ direct, b, atol=1e-12)
        np.testing.assert_allclose(iterative, direct, atol=1e-9)

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            LinearSolver('cholesky')

    def test_singular_matrix(self):
        with pytest.raises(LinearSolveError):
            LinearSolver('direct').solve(csr_matrix((3, 3)), np.ones(3))

    def test_torsion_positive_with_known_center_value(self, disk):
        space = P2Space(build_mesh(disk, 0.1))
        psi = solve_torsion(space)
        assert psi.is_in_vh()
        assert np.min(psi.interior_values) > 0
        # -Laplace psi = 1 on the unit disk: psi = (1 - r^2) / 4
        assert psi.evaluate(np.array([0.0, 0.0])) == pytest.approx(0.25, rel=1e-2)


class TestApplyT:
    def test_fixed_point_is_kept(self, disk_solution):
        w, _ = disk_solution
        rp = RegParams(epsilon=0.5, k=2.0)
        tw = apply_T(w, w, rp)
        assert norm_C0(tw - w) < 1e-9

    def test_linear_residual_gives_exact_solution(self, coarse_space, rp_default, rng):
        w_ref = FeFunction.from_interior(coarse_space, 0.1 * rng.normal(size=coarse_space.n_interior))
        A = assemble_linearized(w_ref, rp_default)
        b = assemble_load(coarse_space)

        def residual_fn(v):
            return A @ v.interior_values - b

        first = apply_T(FeFunction.zeros(coarse_space), w_ref, rp_default, residual_fn=residual_fn)
        second = apply_T(w_ref, w_ref, rp_default, residual_fn=residual_fn)
        np.testing.assert_allclose(first.coefficients, second.coefficients, atol=1e-12)
        np.testing.assert_allclose(A @ first.interior_values, b, atol=1e-12)


class TestSolveRegularized:
    def test_converges(self, disk_solution):
        w, report = disk_solution
        assert report.final_residual <= Config.NONLINEAR_TOL
        assert report.residual_history[-1] == report.final_residual
        assert report.ellipticity.lambda_min > 0
        assert w.is_in_vh()

    def test_nonnegative(self, disk_solution):
        w, _ = disk_solution
        assert np.min(w.coefficients) >= -10 * Config.NONLINEAR_TOL
        assert w.evaluate(np.array([0.0, 0.0])) > 0

    def test_rotation_equivariance(self, disk_solution):
        w, _ = disk_solution
        coords = w.space.dof_coordinates
        c, s = math.cos(math.pi / 3), math.sin(math.pi / 3)
        rotated = coords @ np.array([[c, s], [-s, c]])
        distance, match = cKDTree(coords).query(rotated)
        assert np.max(distance) < 1e-12
        np.testing.assert_allclose(w.coefficients[match], w.coefficients, atol=1e-8)

    def test_converged_init_takes_no_iterations(self, disk_solution):
        w, _ = disk_solution
        again, report = solve_regularized(w.space, RegParams(epsilon=0.5, k=2.0), init=w)
        assert report.iterations == 0
        np.testing.assert_array_equal(again.coefficients, w.coefficients)

    def test_newton_residuals_decrease(self, disk_solution):
        _, report = disk_solution
        history = report.residual_history
        assert all(b < a for a, b in zip(history, history[1:]))
        assert report.iterations <= 12

    @pytest.mark.parametrize('epsilon,start', [(0.5, None), (0.25, 0.5)])
    def test_newton_tail_is_quadratic(self, medium_space, epsilon, start):
        init = None
        if start is not None:
            init, _ = solve_regularized(medium_space, RegParams(epsilon=start, k=2.0))
        _, report = solve_regularized(medium_space, RegParams(epsilon=epsilon, k=2.0), init=init)
        history = np.array(report.residual_history)
        floor = 100 * np.finfo(float).eps * history[0]
        first = int(np.argmax(history < 1e-3 * history[0]))
        assert history[first] < 1e-3 * history[0]
        tail = history[max(first - 1, 0):]
        tail = tail[tail > floor]
        ratios = tail[1:] / tail[:-1]
        assert np.all(ratios < 1.0)
        # log-convex: each reduction factor at least as strong as the previous one
        assert np.all(np.diff(ratios[-3:]) <= 0)

    def test_frozen_mode_from_nearby_start(self, disk_solution):
        w, _ = disk_solution
        rp = RegParams(epsilon=0.45, k=2.0)
        solution, report = solve_regularized(w.space, rp, init=w, mode='frozen', tol=1e-9)
        assert report.mode == 'frozen'
        assert np.max(np.abs(assemble_residual(solution, rp))) <= 1e-9
        assert report.contraction_max < 1.0

    def test_iteration_limit(self, coarse_space):
        with pytest.raises(ConvergenceError) as info:
            solve_regularized(coarse_space, RegParams(epsilon=0.25, k=2.0), max_iter=1)
        assert len(info.value.residuals) == 2

    def test_invalid_mode(self, coarse_space, rp_default):
        with pytest.raises(ValueError):
            solve_regularized(coarse_space, rp_default, mode='picard')

    def test_large_eps_matches_scaled_torsion(self, medium_space):
        eps = 1e3
        w, _ = solve_regularized(medium_space, RegParams(epsilon=eps, k=2.0))
        linear = solve_torsion(medium_space) * eps ** 0.5
        assert norm_C0(w - linear) <= 0.01 * norm_C0(linear)

    def test_report_row(self, disk_solution):
        _, report = disk_solution
        row = report.to_row()
        assert list(row) == SOLVE_REPORT_COLUMNS
        assert math.isnan(row['rho']) and math.isnan(row['ball_distance'])
        assert row['min_eig'] == report.ellipticity.lambda_min

    def test_empty_report_row(self):
        row = SolveReport(epsilon=0.1, h=0.2, k=2.0).to_row()
        assert math.isnan(row['contraction_max']) and math.isnan(row['min_eig'])


class TestContinuation:
    def test_default_schedule(self):
        assert default_schedule(0.25) == [2.0, 1.0, 0.5, 0.25]
        assert default_schedule(0.3) == [2.0, 1.0, 0.5, 0.3]
        assert default_schedule(3.0) == [3.0]
        with pytest.raises(ValueError):
            default_schedule(0.0)

    def test_single_entry_matches_direct_solve(self, coarse_space):
        rp = RegParams(epsilon=0.5, k=2.0)
        direct, _ = solve_regularized(coarse_space, rp)
        continued, reports = continuation_solve(coarse_space, rp, [0.5])
        assert len(reports) == 1
        np.testing.assert_array_equal(continued.coefficients, direct.coefficients)

    @pytest.mark.parametrize('schedule', [[0.5, 1.0, 0.25], [1.0, 0.5], []])
    def test_bad_schedule(self, coarse_space, schedule):
        with pytest.raises(ValueError):
            continuation_solve(coarse_space, RegParams(epsilon=0.25, k=2.0), schedule)

    def test_cauchy_differences_shrink(self, medium_space):
        stages = []
        continuation_solve(medium_space, RegParams(epsilon=0.125, k=2.0), [1.0, 0.5, 0.25, 0.125],
                           on_stage=lambda i, eps, w, report: stages.append(w))
        differences = [norm_C0(b - a) for a, b in zip(stages, stages[1:])]
        assert all(b < a for a, b in zip(differences, differences[1:]))

    def test_stage_failure_is_wrapped(self, coarse_space, monkeypatch):
        monkeypatch.setattr(Config, 'MAX_ITER', 1)
        with pytest.raises(ContinuationError) as info:
            continuation_solve(coarse_space, RegParams(epsilon=0.5, k=2.0), [2.0, 1.0, 0.5])
        assert info.value.stage == 0
        assert isinstance(info.value.__cause__, ConvergenceError)

    def test_domain_target_requires_coupling(self, disk):
        with pytest.raises(ValueError):
            continuation_solve(disk, RegParams(epsilon=0.2, k=2.0), [0.4, 0.2])

    def test_coupled_meshes_follow_schedule(self, disk):
        cp = CouplingParams(beta=1.0, c_coupling=0.75)

        def reference_for(epsilon):
            profile = radial_regularized_solve(RegParams(epsilon=epsilon, k=2.0))
            return radial_to_2d(profile), radial_gradient_2d(profile)

        _, reports = continuation_solve(disk, RegParams(epsilon=0.2, k=2.0), [0.4, 0.2], coupling=cp,
                                        reference_for=reference_for)
        assert [r.epsilon for r in reports] == [0.4, 0.2]
        assert reports[1].h < reports[0].h
        assert all(r.h <= coupled_mesh_size(cp, r.epsilon) for r in reports)
        assert reports[1].ball_radius_rho == pytest.approx(cp.ball_radius(0.2, reports[1].h))
        for report in reports:
            assert 0.0 <= report.ball_distance <= report.ball_radius_rho


class TestContractionProbe:
    def test_invalid_arguments(self, random_vh, rp_default):
        with pytest.raises(ValueError):
            contraction_probe(random_vh, rp_default, sigma=0.0)
        with pytest.raises(ValueError):
            contraction_probe(random_vh, rp_default, sigma=0.1, trials=0)

    def test_deterministic(self, random_vh, rp_default):
        first = contraction_probe(random_vh, rp_default, sigma=0.05, trials=3, seed=1)
        second = contraction_probe(random_vh, rp_default, sigma=0.05, trials=3, seed=1)
        assert first == second

    def test_linear_regime_independent_of_sigma(self, coarse_space):
        rp = RegParams(epsilon=1e3, k=2.0)
        w_ref, _ = solve_regularized(coarse_space, rp)
        small = contraction_probe(w_ref, rp, sigma=1e-3, trials=4)
        large = contraction_probe(w_ref, rp, sigma=1e-2, trials=4)
        assert small < 1e-3 and large < 1e-3
        assert abs(small - large) < 1e-6

    def test_perturbation_field_vanishes_on_boundary(self, disk, rng):
        field = perturbation_field(disk, rng)
        angles = np.linspace(0.0, 2.0 * np.pi, 97)
        boundary = np.column_stack([np.cos(angles), np.sin(angles)])
        np.testing.assert_allclose(field(boundary), 0.0, atol=1e-12)
        inner = 0.5 * boundary
        assert np.max(np.abs(field(inner))) > 0.0

    def test_perturbation_is_resolved_near_boundary(self, medium_space, rng):
        field = perturbation_field(medium_space.mesh.domain, rng)
        raw = interpolate(medium_space, field)
        interior = np.max(np.abs(raw.interior_values))
        boundary = raw.coefficients[medium_space.boundary_dof_indices]
        assert np.max(np.abs(boundary)) <= 0.1 * interior

    def test_contracts_on_ball_radius(self, medium_space):
        rp = RegParams(epsilon=0.25, k=2.0)
        cp = CouplingParams()
        w, _ = continuation_solve(medium_space, rp)
        sigma = cp.ball_radius(rp.epsilon, medium_space.mesh.mesh_size_h)
        assert contraction_probe(w, rp, sigma=sigma, trials=8, mu=cp.mu) < 1.0

    def test_frozen_map_contracts_near_solution(self, disk_solution):
        w, _ = disk_solution
        ratio = contraction_probe(w, RegParams(epsilon=0.5, k=2.0), sigma=1e-2, trials=4)
        assert 0.0 <= ratio < 1.0


@pytest.mark.slow
def test_newton_continuation_on_fine_mesh(disk):
    space = P2Space(build_mesh(disk, 0.1))
    rp = RegParams(epsilon=0.25, k=2.0)
    _, reports = continuation_solve(space, rp, [2.0, 1.0, 0.5, 0.25], mode='newton')
    assert [r.epsilon for r in reports] == [2.0, 1.0, 0.5, 0.25]
    assert all(r.final_residual <= 1e-10 for r in reports)
    assert all(r.iterations <= 8 for r in reports)


@pytest.mark.slow
def test_contraction_improves_under_refinement(disk):
    rp = RegParams(epsilon=0.25, k=2.0)
    cp = CouplingParams()
    ratios = []
    for target in (0.2, 0.1, 0.05):
        space = P2Space(build_mesh(disk, target))
        w, _ = continuation_solve(space, rp)
        sigma = cp.ball_radius(rp.epsilon, space.mesh.mesh_size_h)
        ratios.append(contraction_probe(w, rp, sigma=sigma, trials=8, mu=cp.mu))
    assert ratios[-1] < 1.0
    assert ratios == sorted(ratios, reverse=True)
