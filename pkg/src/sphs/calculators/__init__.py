"""Calculation engines - integration, training, reduction and verification"""

from sphs.calculators.ode import InputSignal, IntegrationConfig, signal_eval, rk4_step, integrate
from sphs.calculators.generators import gen_spinning_body, gen_linear_phs, square_wave
from sphs.calculators.preprocessing import Normalizer, fit_normalizer, add_noise
from sphs.calculators.train import TrainConfig, TrainHistory, fit, fit_derivative, fit_trajectory
from sphs.calculators.pod import PodBasis, pod_fit, encode, decode, set_equilibrium, reconstruction_error
from sphs.calculators.verify import (
    StabilityReport,
    verify_stability,
    energy_audit,
    boundedness_probe,
    rmse,
)

__all__ = [
    # Integration
    'InputSignal',
    'IntegrationConfig',
    'signal_eval',
    'rk4_step',
    'integrate',
    # Data
    'gen_spinning_body',
    'gen_linear_phs',
    'square_wave',
    'Normalizer',
    'fit_normalizer',
    'add_noise',
    # Training
    'TrainConfig',
    'TrainHistory',
    'fit',
    'fit_derivative',
    'fit_trajectory',
    # POD
    'PodBasis',
    'pod_fit',
    'encode',
    'decode',
    'set_equilibrium',
    'reconstruction_error',
    # Verification
    'StabilityReport',
    'verify_stability',
    'energy_audit',
    'boundedness_probe',
    'rmse',
]
