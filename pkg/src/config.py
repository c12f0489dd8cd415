# Configuration management
"""
Configuration management for the PMCF finite-element laboratory
Loads settings from environment variables with sensible defaults and
parses key=value run files for the CLI subcommands
"""
import os
from pathlib import Path
from typing import List, Literal, Optional
from dotenv import load_dotenv, dotenv_values
from pydantic import BaseModel, ConfigDict, Field, field_validator
import logging

# Load environment variables from .env file
load_dotenv()


class Config:
    """Central configuration class for the application"""

    # Project paths
    PROJECT_ROOT = Path(__file__).parent.parent
    DATA_DIR = PROJECT_ROOT / 'data'
    OUTPUT_DIR = Path(os.getenv('PMCF_OUTPUT_DIR', str(PROJECT_ROOT / 'output')))

    # Nonlinear solver settings
    NONLINEAR_TOL = float(os.getenv('PMCF_NONLINEAR_TOL', '1e-10'))
    MAX_ITER = int(os.getenv('PMCF_MAX_ITER', '50'))
    MAX_HALVINGS = int(os.getenv('PMCF_MAX_HALVINGS', '10'))
    DIVERGENCE_FACTOR = float(os.getenv('PMCF_DIVERGENCE_FACTOR', '10'))
    LINEAR_SOLVER = os.getenv('PMCF_LINEAR_SOLVER', 'direct')  # 'direct' or 'gmres'
    CONTINUATION_START_EPS = float(os.getenv('PMCF_CONTINUATION_START_EPS', '2.0'))

    # Mesh settings
    MIN_ANGLE_DEG = float(os.getenv('PMCF_MIN_ANGLE_DEG', '20'))
    H0_FACTOR = float(os.getenv('PMCF_H0_FACTOR', '0.2'))
    SMOOTHING_ITERS = int(os.getenv('PMCF_SMOOTHING_ITERS', '20'))

    # Norms
    DEFAULT_MU = float(os.getenv('PMCF_DEFAULT_MU', '3'))
    HOLDER_MAX_PAIRS = int(os.getenv('PMCF_HOLDER_MAX_PAIRS', '1000000'))

    # Radial oracle
    ORACLE_GRID_N = int(os.getenv('PMCF_ORACLE_GRID_N', '256'))
    ORACLE_TOL = float(os.getenv('PMCF_ORACLE_TOL', '1e-10'))

    # Application settings
    LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO')
    RANDOM_SEED = int(os.getenv('PMCF_RANDOM_SEED', '12345'))

    @classmethod
    def validate(cls) -> bool:
        """
        Validate that the configured numerical settings are usable

        Returns:
            bool: True if valid, raises ValueError if invalid
        """
        errors = []

        if not cls.NONLINEAR_TOL > 0:
            errors.append("PMCF_NONLINEAR_TOL must be positive")

        if cls.MAX_ITER < 1:
            errors.append("PMCF_MAX_ITER must be at least 1")

        if cls.LINEAR_SOLVER not in ('direct', 'gmres'):
            errors.append("PMCF_LINEAR_SOLVER must be 'direct' or 'gmres'")

        if not 0 < cls.MIN_ANGLE_DEG < 60:
            errors.append("PMCF_MIN_ANGLE_DEG must lie in (0, 60)")

        if not 2 < cls.DEFAULT_MU < 4:
            errors.append("PMCF_DEFAULT_MU must lie in (2, 4)")

        if cls.ORACLE_GRID_N < 64:
            errors.append("PMCF_ORACLE_GRID_N must be at least 64")

        if cls.ORACLE_TOL > 1e-8:
            errors.append("PMCF_ORACLE_TOL must not exceed 1e-8")

        if errors:
            error_msg = "Configuration validation failed:\n" + "\n".join(f"  - {e}" for e in errors)
            raise ValueError(error_msg)

        return True

    @classmethod
    def get_summary(cls) -> dict:
        """
        Get a summary of current configuration (safe for logging)

        Returns:
            dict: Configuration summary
        """
        return {
            'output_dir': str(cls.OUTPUT_DIR),
            'nonlinear_tol': cls.NONLINEAR_TOL,
            'max_iter': cls.MAX_ITER,
            'linear_solver': cls.LINEAR_SOLVER,
            'min_angle_deg': cls.MIN_ANGLE_DEG,
            'h0_factor': cls.H0_FACTOR,
            'default_mu': cls.DEFAULT_MU,
            'oracle_grid_n': cls.ORACLE_GRID_N,
            'oracle_tol': cls.ORACLE_TOL,
            'log_level': cls.LOG_LEVEL,
        }


def _split_floats(value) -> Optional[List[float]]:
    if value is None or isinstance(value, list):
        return value
    text = str(value).strip()
    if not text:
        return []
    return [float(item) for item in text.split(',') if item.strip()]


class RunConfig(BaseModel):
    """
    Validated contents of a key=value run file

    Keys mirror the CLI vocabulary; ``mesh.h`` is accepted as the alias of ``mesh_h``.
    """
    model_config = ConfigDict(extra='forbid', populate_by_name=True, frozen=True)

    domain: Literal['disk', 'ellipse'] = 'disk'
    R: float = Field(1.0, gt=0)
    a: float = Field(1.2, gt=0)
    b: float = Field(1.0, gt=0)
    k: float = Field(2.0, gt=1)
    epsilon: float = Field(0.25, gt=0)
    schedule: Optional[List[float]] = None
    beta: float = Field(2.0, ge=0)
    c_coupling: float = Field(1.25, gt=0)
    delta: float = 1.1
    mu: float = 3.0
    gamma_ball: float = Field(1.0, gt=0)
    c_ball: float = Field(1.0, gt=0)
    theta: float = Field(0.25, ge=0, lt=1)
    tol: float = Field(default_factory=lambda: Config.NONLINEAR_TOL, gt=0)
    mesh_h: float = Field(0.1, gt=0, alias='mesh.h')
    h_list: Optional[List[float]] = None
    coupled: bool = False
    mode: Literal['newton', 'frozen'] = 'newton'
    output: Optional[Path] = None
    gamma_max: float = 7.0
    margin: float = Field(1e-3, gt=0, lt=1)
    grid_n: int = Field(default_factory=lambda: Config.ORACLE_GRID_N, ge=64)
    sigma: float = Field(0.1, gt=0)
    trials: int = Field(8, ge=1)

    @field_validator('schedule', 'h_list', mode='before')
    @classmethod
    def _parse_list(cls, value):
        return _split_floats(value)

    @property
    def output_path(self) -> Optional[Path]:
        """``output`` resolved against Config.OUTPUT_DIR when relative"""
        if self.output is None:
            return None
        return self.output if self.output.is_absolute() else Config.OUTPUT_DIR / self.output


def load_run_config(path: Path, overrides: Optional[dict] = None) -> RunConfig:
    """
    Load and validate a key=value run file

    Args:
        path: Path to the run file (``#`` comments allowed); a bare name is also
              looked up in Config.DATA_DIR
        overrides: Optional key/value pairs taking precedence over the file

    Returns:
        RunConfig: Validated run configuration
    """
    path = Path(path)
    if not path.exists() and not path.is_absolute() and (Config.DATA_DIR / path).exists():
        path = Config.DATA_DIR / path
    if not path.exists():
        raise ValueError(f"Run configuration not found: {path}")
    values = {key: value for key, value in dotenv_values(path).items() if value is not None}
    if overrides:
        values.update(overrides)
    return RunConfig.model_validate(values)


def setup_logging(level: str = None):
    """
    Configure application logging

    Args:
        level: Log level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
    """
    log_level = level or Config.LOG_LEVEL

    # Create logs directory if it doesn't exist
    logs_dir = Config.PROJECT_ROOT / 'logs'
    logs_dir.mkdir(exist_ok=True)

    # Configure logging
    logging.basicConfig(
        level=getattr(logging, log_level.upper()),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            # Console handler
            logging.StreamHandler(),
            # File handler
            logging.FileHandler(logs_dir / 'pmcf_lab.log')
        ]
    )

    # Set third-party loggers to WARNING to reduce noise
    logging.getLogger('matplotlib').setLevel(logging.WARNING)
    logging.getLogger('numba').setLevel(logging.WARNING)

    logger = logging.getLogger(__name__)
    logger.info(f"Logging configured at {log_level} level")
    logger.info(f"Log file: {logs_dir / 'pmcf_lab.log'}")
