"""
Reference solutions on disks

The unregularized problem has the closed form u(x) = (R^(k+1) - |x|^(k+1)) / (k+1).
The regularized problem reduces by rotational symmetry to the two-point
boundary value problem

    (1/r) (r w)' = -f^(-1/k),   w = v' / f,   f = sqrt(eps^2 + v'^2)

solved for y = (v, w) by collocation with w(0) = 0 and v(R) = 0. Inverting
w = v'/f gives v' = eps w / sqrt(1 - w^2) and f = eps / sqrt(1 - w^2).
"""
import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import pandas as pd
from scipy.integrate import cumulative_trapezoid, solve_bvp
from scipy.interpolate import CubicHermiteSpline

from ..config import Config
from ..errors import OracleError
from ..fe.norms import holder_quotient
from ..operators.regularization import RegParams

logger = logging.getLogger(__name__)

PROFILE_COLUMNS = ['r', 'v', 'dv']
MAX_NODES = 200000
TOL_TIGHTENINGS = 2
# keeps 1 - w^2 positive while the collocation Newton iterates
W_FLOOR = 1e-300

# singular term of (r w)'/r: w' = -w/r + ...
_SINGULAR = np.array([[0.0, 0.0], [0.0, -1.0]])

PointFunction = Callable[[np.ndarray], np.ndarray]


def _radii(x, R: float) -> np.ndarray:
    pts = np.asarray(x, dtype=float)
    r = np.hypot(pts[..., 0], pts[..., 1])
    if np.any(r > R * (1.0 + 1e-9)):
        raise ValueError(f"Point outside the disk of radius {R}")
    return np.minimum(r, R)


def exact_disk_arrival_time(k: float, R: float, x):
    """
    (R^(k+1) - |x|^(k+1)) / (k+1) for a point (2,) or an array (N, 2)
    """
    if not k > 1:
        raise ValueError(f"k={k} must exceed 1")
    r = _radii(x, R)
    u = (R ** (k + 1.0) - r ** (k + 1.0)) / (k + 1.0)
    return float(u) if np.ndim(u) == 0 else u


def exact_disk_gradient(k: float, R: float, x) -> np.ndarray:
    """Du = -|x|^(k-1) x"""
    pts = np.asarray(x, dtype=float)
    r = _radii(pts, R)
    return -(r ** (k - 1.0))[..., None] * pts


def exact_disk_hessian(k: float, R: float, x) -> np.ndarray:
    """D^2u = -|x|^(k-1) I - (k-1) |x|^(k-3) x x^T (x != 0)"""
    pts = np.asarray(x, dtype=float).reshape(-1, 2)
    r = _radii(pts, R)
    outer = pts[:, :, None] * pts[:, None, :]
    return -(r ** (k - 1.0))[:, None, None] * np.eye(2) - ((k - 1.0) * r ** (k - 3.0))[:, None, None] * outer


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Regularized radial solution v(r) on [0, R] with a C^1 cubic evaluator"""
    radii: np.ndarray
    values: np.ndarray
    slopes: np.ndarray
    rp: RegParams
    R: float
    solver_tol: float
    error_estimate: float = field(default=float('nan'))

    @cached_property
    def _spline(self) -> CubicHermiteSpline:
        return CubicHermiteSpline(self.radii, self.values, self.slopes)

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if np.any(r < 0) or np.any(r > self.R * (1.0 + 1e-9)):
            raise ValueError(f"Radius outside [0, {self.R}]")
        return self._spline(np.clip(r, 0.0, self.R))

    def derivative(self, r) -> np.ndarray:
        return self._spline(np.clip(np.asarray(r, dtype=float), 0.0, self.R), 1)

    @property
    def center_value(self) -> float:
        return float(self.values[0])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'r': self.radii, 'v': self.values, 'dv': self.slopes}, columns=PROFILE_COLUMNS)


def _initial_guess(rp: RegParams, R: float, radii: np.ndarray) -> np.ndarray:
    """Slope blend of the small-eps (-r^k) and large-eps (-eps^(1-1/k) r / 2) limits"""
    eps, k = rp.epsilon, rp.k
    slope = -(radii ** k + eps ** (1.0 - 1.0 / k) * radii / 2.0)
    v = -cumulative_trapezoid(slope[::-1], radii[::-1], initial=0.0)[::-1]
    w = slope / np.sqrt(eps ** 2 + slope ** 2)
    return np.vstack([v, w])


def _collocate(rp: RegParams, R: float, radii: np.ndarray, guess: np.ndarray, tol: float):
    eps, inv_k = rp.epsilon, 1.0 / rp.k

    def fun(r, y):
        w = y[1]
        one_minus = np.maximum(1.0 - w * w, W_FLOOR)
        root = np.sqrt(one_minus)
        return np.vstack([eps * w / root, -(root / eps) ** inv_k])

    def fun_jac(r, y):
        w = y[1]
        one_minus = np.maximum(1.0 - w * w, W_FLOOR)
        jac = np.zeros((2, 2, len(r)))
        jac[0, 1] = eps / one_minus ** 1.5
        jac[1, 1] = w * inv_k * eps ** (-inv_k) * one_minus ** (0.5 * inv_k - 1.0)
        return jac

    def bc(ya, yb):
        return np.array([ya[1], yb[0]])

    return solve_bvp(fun, bc, radii, guess, S=_SINGULAR, fun_jac=fun_jac, tol=tol,
                     max_nodes=MAX_NODES)


def _solve_with_fallback(rp: RegParams, R: float, grid_n: int, tol: float):
    radii = np.linspace(0.0, R, grid_n)
    result = _collocate(rp, R, radii, _initial_guess(rp, R, radii), tol)
    if result.success:
        return result
    logger.warning(f"Radial solve failed at eps={rp.epsilon:g} ({result.message}); "
                   f"continuing from eps={max(1.0, 2.0 * rp.epsilon):g}")

    epsilons = []
    value = max(1.0, 2.0 * rp.epsilon)
    while value > rp.epsilon:
        epsilons.append(value)
        value *= 0.5
    epsilons.append(rp.epsilon)

    guess_x, guess_y = radii, _initial_guess(rp.with_epsilon(epsilons[0]), R, radii)
    for eps in epsilons:
        result = _collocate(rp.with_epsilon(eps), R, guess_x, guess_y, tol)
        if not result.success:
            logger.error(f"Radial continuation failed at eps={eps:g}: {result.message}")
            raise OracleError(f"Radial solve failed at eps={eps:g}: {result.message}")
        guess_x, guess_y = result.x, result.y
    return result


def radial_regularized_solve(rp: RegParams, R: float = 1.0, grid_n: Optional[int] = None,
                             tol: Optional[float] = None) -> RadialProfile:
    """
    High-accuracy radial solution of the regularized problem on the disk

    The error estimate compares against a solve on a doubled initial grid;
    the collocation tolerance is tightened when the estimate exceeds ``tol``.

    Args:
        rp: Regularization parameters
        R: Disk radius
        grid_n: Initial number of collocation nodes (>= 64)
        tol: Target accuracy (<= 1e-8)

    Returns:
        RadialProfile: Profile with v(R) = 0 and v'(0) = 0

    Raises:
        OracleError: Collocation failed even with continuation
    """
    grid_n = Config.ORACLE_GRID_N if grid_n is None else int(grid_n)
    tol = Config.ORACLE_TOL if tol is None else tol
    if grid_n < 64:
        raise ValueError(f"grid_n={grid_n} must be at least 64")
    if tol > 1e-8:
        raise ValueError(f"tol={tol} must not exceed 1e-8")
    if not R > 0:
        raise ValueError(f"R={R} must be positive")

    bvp_tol = tol
    for attempt in range(TOL_TIGHTENINGS + 1):
        coarse = _solve_with_fallback(rp, R, grid_n, bvp_tol)
        fine = _solve_with_fallback(rp, R, 2 * grid_n, bvp_tol)
        nodes = np.union1d(coarse.x, fine.x)
        estimate = float(np.max(np.abs(coarse.sol(nodes)[0] - fine.sol(nodes)[0])))
        if estimate <= tol:
            break
        if attempt < TOL_TIGHTENINGS:
            bvp_tol *= 0.1
            logger.debug(f"Radial estimate {estimate:.2e} > {tol:g}; tightening to {bvp_tol:g}")
    else:
        logger.warning(f"Radial oracle eps={rp.epsilon:g}: self-convergence estimate "
                       f"{estimate:.2e} exceeds {tol:g}")

    radii = fine.x.copy()
    values = fine.y[0].copy()
    values[-1] = 0.0
    w = fine.y[1]
    slopes = rp.epsilon * w / np.sqrt(np.maximum(1.0 - w * w, W_FLOOR))
    slopes[0] = 0.0
    profile = RadialProfile(radii, values, slopes, rp, float(R), tol, estimate)
    logger.info(f"Radial oracle eps={rp.epsilon:g}, k={rp.k:g}: v(0)={profile.center_value:.12g}, "
                f"{len(radii)} nodes, estimate {estimate:.2e}")
    return profile


def radial_to_2d(profile: RadialProfile) -> PointFunction:
    """p -> v(|p|) for an (N, 2) array"""
    def evaluate(points):
        return profile(_radii(np.asarray(points, dtype=float).reshape(-1, 2), profile.R))
    return evaluate


def radial_gradient_2d(profile: RadialProfile) -> PointFunction:
    """p -> v'(|p|) p / |p| (zero at the origin)"""
    def evaluate(points):
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        r = _radii(pts, profile.R)
        safe = np.where(r > 0, r, 1.0)
        return (profile.derivative(r) / safe)[:, None] * pts
    return evaluate


def radial_error_samples(f: Callable, g: Callable, R: float, n: int = 4001) -> tuple:
    """Radii and differences f(r) - g(r) on an even grid of [0, R]"""
    r = np.linspace(0.0, R, n)
    return r, np.asarray(f(r), dtype=float) - np.asarray(g(r), dtype=float)


def radial_c0_error(f: Callable, g: Callable, R: float, n: int = 4001) -> float:
    """sup |f - g| over a radial grid (equals the 2D sup for radial functions)"""
    _, diff = radial_error_samples(f, g, R, n)
    return float(np.max(np.abs(diff)))


def radial_holder_seminorm(f: Callable, g: Callable, theta: float, R: float,
                           n: int = 2001) -> float:
    """
    Hoelder seminorm of the radial function f - g

    For radial functions the planar seminorm equals the one-dimensional one
    in r (pairs on a common ray realize it).
    """
    r, diff = radial_error_samples(f, g, R, n)
    return holder_quotient(r[:, None], diff, theta)


def exact_disk_profile(k: float, R: float) -> Callable[[np.ndarray], np.ndarray]:
    """r -> (R^(k+1) - r^(k+1)) / (k+1)"""
    return lambda r: (R ** (k + 1.0) - np.asarray(r, dtype=float) ** (k + 1.0)) / (k + 1.0)


def dump_profile_csv(profile: RadialProfile, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    profile.to_frame().to_csv(path, index=False, float_format='%.17g')
    logger.info(f"Wrote radial profile ({len(profile.radii)} nodes) to {path}")
    return path


def load_profile_csv(path: Path, rp: RegParams, solver_tol: float = float('nan')) -> RadialProfile:
    frame = pd.read_csv(path)
    missing = [c for c in PROFILE_COLUMNS if c not in frame.columns]
    if missing:
        raise OracleError(f"Profile file {path} lacks columns {missing}")
    radii = frame['r'].to_numpy(dtype=float)
    if len(radii) < 2 or np.any(np.diff(radii) <= 0) or radii[0] != 0.0:
        raise OracleError(f"Profile file {path} does not hold an increasing grid starting at 0")
    return RadialProfile(radii, frame['v'].to_numpy(dtype=float), frame['dv'].to_numpy(dtype=float),
                         rp, float(radii[-1]), solver_tol)
