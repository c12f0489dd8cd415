"""
Tests for the regularized nonlinearity and the assembled residual / linearization
"""
import numpy as np
import pytest
from pydantic import ValidationError

from src.errors import NotInTrialSpaceError
from src.fe.space import FeFunction, P2Space
from src.geometry.domain import DomainGeometry
from src.geometry.mesh import build_mesh
from src.operators.assembly import (assemble_linearized, assemble_linearized_parts, assemble_load,
                                    assemble_residual, assemble_stiffness, dump_triplets,
                                    ellipticity_report, level_set_operator_residual)
from src.operators.regularization import (RegParams, f_eps, f_eps_grad, f_eps_hess,
                                          hessian_eigen_bounds)
from src.oracle.radial import exact_disk_arrival_time, exact_disk_gradient, exact_disk_hessian


class TestRegularization:
    def test_params_validated(self):
        with pytest.raises(ValidationError):
            RegParams(epsilon=0.0, k=2.0)
        with pytest.raises(ValidationError):
            RegParams(epsilon=0.1, k=1.0)

    def test_origin(self):
        rp = RegParams(epsilon=1.0, k=2.0)
        z = np.zeros(2)
        assert f_eps(z, rp) == pytest.approx(1.0)
        np.testing.assert_allclose(f_eps_grad(z, rp), [0.0, 0.0])
        np.testing.assert_allclose(f_eps_hess(z, rp), np.eye(2))

    def test_small_eps_is_euclidean_norm(self):
        rp = RegParams(epsilon=1e-12, k=2.0)
        z = np.array([3.0, 4.0])
        assert f_eps(z, rp) == pytest.approx(5.0)
        np.testing.assert_allclose(f_eps_grad(z, rp), [0.6, 0.8])

    def test_derivatives_match_finite_differences(self, rng):
        rp = RegParams(epsilon=0.3, k=2.0)
        step = 1e-5
        for z in rng.normal(size=(10, 2)):
            grad_fd = np.array([(f_eps(z + step * e, rp) - f_eps(z - step * e, rp)) / (2 * step)
                                for e in np.eye(2)])
            np.testing.assert_allclose(f_eps_grad(z, rp), grad_fd, rtol=1e-7, atol=1e-12)
            hess_fd = np.array([(f_eps_grad(z + step * e, rp) - f_eps_grad(z - step * e, rp)) / (2 * step)
                                for e in np.eye(2)])
            np.testing.assert_allclose(f_eps_hess(z, rp), hess_fd, rtol=1e-7, atol=1e-12)

    def test_hessian_positive_definite(self, rng):
        rp = RegParams(epsilon=0.05, k=3.0)
        hess = f_eps_hess(5.0 * rng.normal(size=(100, 2)), rp)
        np.testing.assert_allclose(hess, np.swapaxes(hess, 1, 2))
        assert np.all(np.linalg.eigvalsh(hess) > 0)

    def test_eigen_bounds_isotropic(self):
        lam, big_lam = hessian_eigen_bounds(np.zeros(2), RegParams(epsilon=0.5, k=2.0))
        assert lam == pytest.approx(2.0)
        assert big_lam == pytest.approx(2.0)

    def test_eigen_bounds_closed_form(self):
        rp = RegParams(epsilon=0.1, k=2.0)
        z = np.array([0.6, 0.8])
        lam, big_lam = hessian_eigen_bounds(z, rp)
        assert big_lam == pytest.approx(0.99504, rel=1e-5)
        assert lam == pytest.approx(0.0098518, rel=1e-4)
        assert big_lam / lam == pytest.approx(101.0)
        np.testing.assert_allclose(np.linalg.eigvalsh(f_eps_hess(z, rp)), [lam, big_lam], rtol=1e-12)

    def test_ratio_bound_sweep(self):
        rp = RegParams(epsilon=0.2, k=2.0)
        c0 = 3.0
        radii = np.linspace(0.0, c0, 50)
        z = np.column_stack([radii * np.cos(radii), radii * np.sin(radii)])
        lam, big_lam = hessian_eigen_bounds(z, rp)
        assert np.all(big_lam / lam <= 1.0 + c0 ** 2 / rp.epsilon ** 2 + 1e-9)


class TestResidual:
    def test_zero_function_unit_eps(self, coarse_space):
        rp = RegParams(epsilon=1.0, k=3.0)
        residual = assemble_residual(FeFunction.zeros(coarse_space), rp)
        np.testing.assert_allclose(residual, -assemble_load(coarse_space), atol=1e-15)

    def test_zero_function_eps_two(self, coarse_space):
        rp = RegParams(epsilon=2.0, k=2.0)
        residual = assemble_residual(FeFunction.zeros(coarse_space), rp)
        np.testing.assert_allclose(residual, -2.0 ** -0.5 * assemble_load(coarse_space), rtol=1e-14)

    def test_load_integrates_area(self, coarse_space):
        # interior basis functions plus boundary ones sum to one
        total = assemble_load(coarse_space).sum()
        assert 0.0 < total < np.sum(coarse_space.mesh.areas)

    def test_rejects_boundary_values(self, coarse_space, rp_default):
        f = FeFunction(coarse_space, np.ones(coarse_space.n_dofs))
        with pytest.raises(NotInTrialSpaceError):
            assemble_residual(f, rp_default)
        with pytest.raises(NotInTrialSpaceError):
            assemble_linearized(f, rp_default)

    def test_residual_scales_with_domain(self):
        k, eps, rho = 2.0, 0.4, 2.0
        small = P2Space(build_mesh(DomainGeometry.disk(1.0), 0.3))
        large = P2Space(build_mesh(DomainGeometry.disk(rho), 0.3 * rho))
        np.testing.assert_allclose(large.dof_coordinates, rho * small.dof_coordinates, atol=1e-14)
        rng = np.random.default_rng(7)
        w = FeFunction.from_interior(small, 0.2 * rng.normal(size=small.n_interior))
        w_large = FeFunction(large, rho ** (k + 1) * w.coefficients)
        r_small = assemble_residual(w, RegParams(epsilon=eps, k=k))
        r_large = assemble_residual(w_large, RegParams(epsilon=rho ** k * eps, k=k))
        np.testing.assert_allclose(r_large, rho * r_small, rtol=1e-10, atol=1e-14)


class TestLinearized:
    def test_at_zero_is_scaled_laplacian(self, coarse_space):
        rp = RegParams(epsilon=0.5, k=2.0)
        diffusion, convection = assemble_linearized_parts(FeFunction.zeros(coarse_space), rp)
        assert abs(convection).max() == 0.0
        stiffness = assemble_stiffness(coarse_space)
        assert abs(diffusion - stiffness / rp.epsilon).max() < 1e-12

    def test_diffusion_symmetric(self, random_vh, rp_default):
        diffusion, convection = assemble_linearized_parts(random_vh, rp_default)
        assert abs(diffusion - diffusion.T).max() < 1e-13
        assert abs(convection - convection.T).max() > 0.0

    def test_jacobian_matches_finite_differences(self, rng):
        rp = RegParams(epsilon=0.3, k=2.0)
        space = P2Space(build_mesh(DomainGeometry.disk(1.0), 0.3))
        for _ in range(20):
            w = FeFunction.from_interior(space, 0.3 * rng.normal(size=space.n_interior))
            direction = rng.normal(size=space.n_interior)
            direction /= np.max(np.abs(direction))
            t = 1e-6
            plus = FeFunction.from_interior(space, w.interior_values + t * direction)
            minus = FeFunction.from_interior(space, w.interior_values - t * direction)
            fd = (assemble_residual(plus, rp) - assemble_residual(minus, rp)) / (2 * t)
            exact = assemble_linearized(w, rp) @ direction
            assert np.linalg.norm(fd - exact) / np.linalg.norm(exact) <= 1e-5

    def test_forward_difference_error_is_first_order(self, random_vh, rp_default, rng):
        space = random_vh.space
        direction = rng.normal(size=space.n_interior)
        base = assemble_residual(random_vh, rp_default)
        exact = assemble_linearized(random_vh, rp_default) @ direction
        errors = []
        for t in (1e-2, 1e-3):
            moved = FeFunction.from_interior(space, random_vh.interior_values + t * direction)
            fd = (assemble_residual(moved, rp_default) - base) / t
            errors.append(np.linalg.norm(fd - exact) / np.linalg.norm(exact))
        assert 5.0 < errors[0] / errors[1] < 20.0


class TestDiagnostics:
    def test_ellipticity_report(self, random_vh, rp_default):
        report = ellipticity_report(random_vh, rp_default)
        grad = random_vh.quadrature_gradients()
        max_grad = np.max(np.linalg.norm(grad, axis=-1))
        assert report.lambda_min > 0
        assert report.ratio == pytest.approx(report.lambda_max / report.lambda_min)
        assert report.ratio <= 1.0 + max_grad ** 2 / rp_default.epsilon ** 2 + 1e-9
        assert report.nu > 0 and report.a1 > report.lambda_max

    def test_exact_disk_solution_solves_level_set_equation(self):
        k, R = 2.0, 1.0
        r = np.linspace(0.1, 0.99, 40)
        t = np.linspace(0.0, 2.0 * np.pi, 40)
        points = np.column_stack([r * np.cos(t), r * np.sin(t)])
        residual = level_set_operator_residual(
            lambda p: exact_disk_arrival_time(k, R, p),
            lambda p: exact_disk_gradient(k, R, p),
            lambda p: exact_disk_hessian(k, R, p),
            k, 0.0, points)
        np.testing.assert_allclose(residual, 0.0, atol=1e-12)

    def test_regularized_operator_differs(self):
        points = np.array([[0.5, 0.0]])
        residual = level_set_operator_residual(
            lambda p: exact_disk_arrival_time(2.0, 1.0, p),
            lambda p: exact_disk_gradient(2.0, 1.0, p),
            lambda p: exact_disk_hessian(2.0, 1.0, p),
            2.0, 0.5, points)
        assert abs(residual[0]) > 1e-3

    def test_dump_triplets(self, coarse_space, tmp_path):
        matrix = assemble_stiffness(coarse_space)
        path = dump_triplets(matrix, tmp_path / 'K.txt')
        lines = path.read_text().splitlines()
        assert len(lines) == matrix.nnz
        rows = [int(line.split()[0]) for line in lines]
        assert rows == sorted(rows)
        i, j, v = lines[0].split()
        assert float(v) == pytest.approx(matrix[int(i), int(j)])
