"""Core modules - differentiation, networks, reference equations and presets"""

# autodiff first: it switches jax to 64-bit floats
from sphs.core.autodiff import (
    ParamLayout,
    ParamVector,
    ScalarExpr,
    eval_expr,
    grad_input,
    grad_params,
    value_and_grad_params,
    hessian,
)
from sphs.core.errors import (
    SphsError,
    StructuralError,
    ConfigurationError,
    DataError,
    DivergenceError,
    UnsupportedOperationError,
)
from sphs.core.nets import FfnnConfig, FicnnConfig, Ffnn, Ficnn, init_glorot, ffnn_forward, ficnn_forward
from sphs.core.equations import euler_rhs, rigid_energy, linear_rhs
from sphs.core.presets import (
    EXPERIMENT_PRESETS,
    get_preset,
    list_available_presets,
    display_preset_table,
)

__all__ = [
    # Autodiff
    'ParamLayout',
    'ParamVector',
    'ScalarExpr',
    'eval_expr',
    'grad_input',
    'grad_params',
    'value_and_grad_params',
    'hessian',
    # Errors
    'SphsError',
    'StructuralError',
    'ConfigurationError',
    'DataError',
    'DivergenceError',
    'UnsupportedOperationError',
    # Networks
    'FfnnConfig',
    'FicnnConfig',
    'Ffnn',
    'Ficnn',
    'init_glorot',
    'ffnn_forward',
    'ficnn_forward',
    # Equations
    'euler_rhs',
    'rigid_energy',
    'linear_rhs',
    # Presets
    'EXPERIMENT_PRESETS',
    'get_preset',
    'list_available_presets',
    'display_preset_table',
]
