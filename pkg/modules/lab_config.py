import os
import logging
import configparser
from dataclasses import dataclass
from typing import Optional

logger = logging.getLogger(__name__)

PROJECT_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DEFAULT_CONFIG_PATH = os.path.join(PROJECT_ROOT, 'config', 'configuration.ini')
THREADS_ENV_VAR = 'NONLOCAL_LAB_THREADS'

# Default INI content, one dict per section
DEFAULT_SECTIONS = {
    'lab': {
        'output_dir': 'data/reports',
        'log_file': 'nonlocal_lab.log',
        'log_level': 'INFO',
        'threads': '0',
    },
    'solver': {
        'tolerance': '1e-8',
        'max_iterations': '100000',
        'descent_tolerance': '1e-7',
        'armijo_constant': '1e-4',
        'shrink': '0.5',
        'fd_step': '1e-6',
        'minimizer_restarts': '2',
    },
    'cut_norm': {
        'restarts': '8',
        'bruteforce_budget': '100000',
        'relative_improvement': '1e-10',
        'max_alternations': '1000',
    },
    'reports': {
        'save_plots': 'false',
    },
}


@dataclass(frozen=True)
class LabSettings:
    """Lab-wide settings read from ``config/configuration.ini``."""
    output_dir: str = 'data/reports'
    log_file: str = 'nonlocal_lab.log'
    log_level: str = 'INFO'
    threads: int = 0
    tolerance: float = 1e-8
    max_iterations: int = 100000
    descent_tolerance: float = 1e-7
    armijo_constant: float = 1e-4
    shrink: float = 0.5
    fd_step: float = 1e-6
    minimizer_restarts: int = 2
    restarts: int = 8
    bruteforce_budget: int = 100000
    relative_improvement: float = 1e-10
    max_alternations: int = 1000
    save_plots: bool = False


def create_default_config(path: Optional[str] = None) -> str:
    """Write the default configuration file.

    Args:
        path: Target path (default: config/configuration.ini next to the package)

    Returns:
        The path that was written
    """
    path = path or DEFAULT_CONFIG_PATH
    config = configparser.ConfigParser()
    for section, values in DEFAULT_SECTIONS.items():
        config[section] = dict(values)

    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)

    with open(path, 'w') as configfile:
        config.write(configfile)

    logger.warning(f"Created default configuration at {path}")
    return path


def load_settings(config_path: Optional[str] = None) -> LabSettings:
    """Load lab settings, falling back to defaults for anything missing.

    Args:
        config_path: Path to the INI file (default: config/configuration.ini)

    Returns:
        LabSettings instance
    """
    config_path = config_path or DEFAULT_CONFIG_PATH
    config = configparser.ConfigParser()

    if os.path.exists(config_path):
        try:
            config.read(config_path)
            logger.debug(f"Loaded settings from {config_path}")
        except configparser.Error as e:
            logger.error(f"Error reading settings from {config_path}: {e}")
            config = configparser.ConfigParser()
    else:
        logger.warning(f"Settings file not found at {config_path}, using defaults")

    defaults = LabSettings()
    try:
        return LabSettings(
            output_dir=config.get('lab', 'output_dir', fallback=defaults.output_dir),
            log_file=config.get('lab', 'log_file', fallback=defaults.log_file),
            log_level=config.get('lab', 'log_level', fallback=defaults.log_level).upper(),
            threads=config.getint('lab', 'threads', fallback=defaults.threads),
            tolerance=config.getfloat('solver', 'tolerance', fallback=defaults.tolerance),
            max_iterations=config.getint('solver', 'max_iterations', fallback=defaults.max_iterations),
            descent_tolerance=config.getfloat('solver', 'descent_tolerance', fallback=defaults.descent_tolerance),
            armijo_constant=config.getfloat('solver', 'armijo_constant', fallback=defaults.armijo_constant),
            shrink=config.getfloat('solver', 'shrink', fallback=defaults.shrink),
            fd_step=config.getfloat('solver', 'fd_step', fallback=defaults.fd_step),
            minimizer_restarts=config.getint('solver', 'minimizer_restarts', fallback=defaults.minimizer_restarts),
            restarts=config.getint('cut_norm', 'restarts', fallback=defaults.restarts),
            bruteforce_budget=config.getint('cut_norm', 'bruteforce_budget', fallback=defaults.bruteforce_budget),
            relative_improvement=config.getfloat('cut_norm', 'relative_improvement',
                                                 fallback=defaults.relative_improvement),
            max_alternations=config.getint('cut_norm', 'max_alternations', fallback=defaults.max_alternations),
            save_plots=config.getboolean('reports', 'save_plots', fallback=defaults.save_plots),
        )
    except ValueError as e:
        logger.error(f"Invalid value in {config_path}: {e}. Using defaults.")
        return defaults


def resolve_threads(settings: Optional[LabSettings] = None) -> int:
    """Number of worker threads for parallel restarts and per-k work.

    ``NONLOCAL_LAB_THREADS`` wins over the settings file; 0 means one thread
    per core.
    """
    configured = settings.threads if settings is not None else 0
    raw = os.environ.get(THREADS_ENV_VAR)
    if raw:
        try:
            configured = int(raw)
        except ValueError:
            logger.warning(f"Ignoring invalid {THREADS_ENV_VAR}={raw!r}")
    if configured <= 0:
        configured = os.cpu_count() or 1
    return max(1, configured)
