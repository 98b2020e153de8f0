"""
sphs - Stable port-Hamiltonian neural networks

Learns globally stable nonlinear dynamical systems from trajectory data by
parameterizing port-Hamiltonian systems with a convex Hamiltonian, alongside
baseline models, ODE integrators, POD reduction and stability verification.
"""

__version__ = "1.0.0"
__author__ = "stable-phs Contributors"
__license__ = "MIT"

# Core functionality
from sphs.core import (
    ConfigurationError,
    DataError,
    DivergenceError,
    StructuralError,
    UnsupportedOperationError,
    get_preset,
    list_available_presets,
)

# Models
from sphs.models import (
    ModelSpec,
    PhsModel,
    build_model,
    hamiltonian,
    grad_hamiltonian,
    rhs,
    decompose,
)

# IO
from sphs.io import Config, config, Trajectory, DerivativePairs, load_csv, save_csv

# Calculators
from sphs.calculators import (
    IntegrationConfig,
    InputSignal,
    integrate,
    TrainConfig,
    fit,
    pod_fit,
    verify_stability,
)
from sphs.io.checkpoint import Checkpoint, save_checkpoint, load_checkpoint

# UI
from sphs.ui import main

__all__ = [
    # Version
    '__version__',
    '__author__',
    '__license__',
    # Errors
    'ConfigurationError',
    'DataError',
    'DivergenceError',
    'StructuralError',
    'UnsupportedOperationError',
    # Presets
    'get_preset',
    'list_available_presets',
    # Models
    'ModelSpec',
    'PhsModel',
    'build_model',
    'hamiltonian',
    'grad_hamiltonian',
    'rhs',
    'decompose',
    # IO
    'Config',
    'config',
    'Trajectory',
    'DerivativePairs',
    'load_csv',
    'save_csv',
    'Checkpoint',
    'save_checkpoint',
    'load_checkpoint',
    # Calculators
    'IntegrationConfig',
    'InputSignal',
    'integrate',
    'TrainConfig',
    'fit',
    'pod_fit',
    'verify_stability',
    # UI
    'main',
]
