"""
Convergence-table helpers: EOC, log-log slope fits, deterministic CSV output
and the column schemas printed by ``--schema``
"""
import io
import logging
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np
import pandas as pd

from ..solver.params import SOLVE_REPORT_COLUMNS

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'

SCHEMAS = {
    'solve': [(c, '') for c in SOLVE_REPORT_COLUMNS],
    'converge-eps': [
        ('epsilon', 'regularization parameter'),
        ('c0_error', 'sup |v_eps - u| over the radial grid'),
        ('holder_error', 'C^{0,theta} norm of v_eps - u (only when theta > 0)'),
        ('center_value', 'v_eps(0)'),
        ('eoc_c0', 'EOC of c0_error against epsilon'),
    ],
    'converge-h': [
        ('h', 'measured mesh size'),
        ('n_dofs', 'number of P2 dofs'),
        ('iterations', 'Newton iterations of the final stage'),
        ('c0_error', 'nodal max |u_h - v_eps|'),
        ('h1mu_error', 'H^{1,mu} norm of u_h - v_eps'),
        ('eoc_c0', 'EOC of c0_error'),
        ('eoc_h1mu', 'EOC of h1mu_error'),
    ],
    'converge-coupled': [
        ('epsilon', 'regularization parameter'),
        ('h', 'measured mesh size of the coupled mesh'),
        ('n_dofs', 'number of P2 dofs'),
        ('total_c0', 'sampled sup |u_h - u|'),
        ('total_holder', 'sampled C^{0,theta} norm of u_h - u'),
        ('reg_c0', 'sup |v_eps - u| (regularization part)'),
        ('disc_c0', 'sampled sup |u_h - v_eps| (discretization part)'),
        ('split_ok', 'total_c0 <= reg_c0 + disc_c0'),
        ('asymptotic', 'row lies in the trailing range where reg_c0 decreases'),
        ('rho', 'ball radius c eps^-gamma h^delta'),
        ('ball_distance', 'H^{1,mu} norm of u_h - v_eps'),
    ],
    'rates': [
        ('k', 'curvature power'), ('gamma', 'exponent gamma'), ('alpha', 'exponent alpha'),
        ('s', 'exponent s = alpha/gamma'), ('r', 'rate r'), ('beta1', 'beta1(alpha, s)'),
        ('beta2', 'beta2(alpha, s)'), ('lambda(theta)', 'min(r, s)(1 - theta), one column per theta'),
    ],
    'oracle': [('r', 'radius'), ('v', 'v_eps(r)'), ('dv', "v_eps'(r)")],
}


def eoc(errors: Sequence[float], step_sizes: Sequence[float]) -> List[float]:
    """
    Experimental orders of convergence log(e_i/e_{i+1}) / log(s_i/s_{i+1})

    Args:
        errors: Positive errors
        step_sizes: Positive, strictly decreasing step sizes

    Returns:
        list: One EOC per consecutive pair
    """
    errors = np.asarray(errors, dtype=float)
    steps = np.asarray(step_sizes, dtype=float)
    if len(errors) != len(steps) or len(errors) < 2:
        raise ValueError("errors and step_sizes must have the same length >= 2")
    if np.any(errors <= 0) or np.any(steps <= 0):
        raise ValueError("errors and step sizes must be positive")
    if np.any(np.diff(steps) >= 0):
        raise ValueError("step sizes must be strictly decreasing")
    return (np.log(errors[:-1] / errors[1:]) / np.log(steps[:-1] / steps[1:])).tolist()


def eoc_column(errors: Sequence[float], step_sizes: Sequence[float]) -> List[float]:
    """EOC aligned with table rows (NaN in the first row)"""
    if len(errors) < 2:
        return [float('nan')] * len(errors)
    return [float('nan')] + eoc(errors, step_sizes)


def fit_slope(step_sizes: Sequence[float], errors: Sequence[float]) -> Tuple[float, float]:
    """
    Least-squares slope of log(error) against log(step)

    Returns:
        tuple: (slope, RMS residual of the fit); NaNs with fewer than two points
    """
    x = np.log(np.asarray(step_sizes, dtype=float))
    y = np.log(np.asarray(errors, dtype=float))
    if len(x) < 2:
        return float('nan'), float('nan')
    coeffs = np.polyfit(x, y, 1)
    residual = float(np.sqrt(np.mean((np.polyval(coeffs, x) - y) ** 2)))
    return float(coeffs[0]), residual


def is_monotone_decreasing(values: Sequence[float]) -> bool:
    values = np.asarray(values, dtype=float)
    return bool(np.all(np.diff(values) < 0))


def format_table(table: pd.DataFrame) -> str:
    buffer = io.StringIO()
    table.to_csv(buffer, index=False, float_format=FLOAT_FORMAT)
    return buffer.getvalue()


def write_table(table: pd.DataFrame, path: Path) -> Path:
    """Write a study table as CSV with round-trip float formatting"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_table(table))
    logger.info(f"Wrote {len(table)} rows to {path}")
    return path


def schema_text(command: str = None) -> str:
    commands = [command] if command else list(SCHEMAS)
    lines = []
    for name in commands:
        if name not in SCHEMAS:
            raise ValueError(f"No schema for '{name}'")
        lines.append(f"[{name}]")
        lines.extend(f"  {column}" + (f": {text}" if text else '') for column, text in SCHEMAS[name])
    return "\n".join(lines)
