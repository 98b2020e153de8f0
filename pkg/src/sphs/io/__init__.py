"""Input/Output modules"""

from sphs.io.config import Config, config, RunSpec, load_run_spec
from sphs.io.trajectory import Trajectory, DerivativePairs, load_csv, save_csv, load_pairs, save_pairs

__all__ = [
    'Config',
    'config',
    'RunSpec',
    'load_run_spec',
    'Trajectory',
    'DerivativePairs',
    'load_csv',
    'save_csv',
    'load_pairs',
    'save_pairs',
]
