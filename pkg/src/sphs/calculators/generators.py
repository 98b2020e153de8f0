"""Synthetic training data: spinning rigid body and a forced linear port-Hamiltonian system"""

import logging
import math

import numpy as np

from sphs.calculators.ode import InputSignal, IntegrationConfig, integrate, signal_eval
from sphs.core.equations import (
    DEFAULT_DAMPING,
    DEFAULT_INERTIA,
    euler_rhs,
    linear_phs_matrices,
    linear_rhs,
)
from sphs.core.errors import ConfigurationError

logger = logging.getLogger(__name__)

# Ground truth is integrated two orders of magnitude tighter than model predictions
GROUND_TRUTH_INTEGRATION = IntegrationConfig(method="tsit5_adaptive", rtol=1e-10, atol=1e-12)


def sample_times(duration, dt):
    """Uniform grid 0, dt, ..., floor(duration / dt) * dt"""
    if dt <= 0 or duration < 0:
        raise ConfigurationError(f"Need dt > 0 and duration >= 0, got dt={dt}, duration={duration}")
    count = int(math.floor(duration / dt + 1e-9)) + 1
    return dt * np.arange(count)


def square_wave(period, amplitude, duration, phase=0.0):
    """
    Square wave alternating +amplitude / -amplitude every half period

    The signal holds its value between switching instants, so it is exact
    as a zero-order-hold InputSignal with one sample per switch.

    Returns:
        InputSignal with m = 1
    """
    if period <= 0:
        raise ConfigurationError(f"Square-wave period must be > 0, got {period}")
    half = 0.5 * period
    switches = half * np.arange(int(math.ceil(duration / half)) + 1)
    levels = np.where(np.floor((switches + phase) / half + 1e-9) % 2 == 0, amplitude, -amplitude)
    return InputSignal(switches, levels.reshape(-1, 1), mode="zero_order_hold")


def gen_spinning_body(inertia=DEFAULT_INERTIA, mu=DEFAULT_DAMPING, n_traj=10, duration=50.0, dt=0.1, seed=0):
    """
    Spinning rigid body trajectories from random initial angular velocities

    Args:
        inertia: Principal moments of inertia
        mu: Viscous damping coefficient
        n_traj: Number of trajectories
        duration: Length of each trajectory in s
        dt: Sampling interval in s
        seed: Seed of the initial-condition sampler, ω(0) ~ U[0, 1]³

    Returns:
        List of Trajectory, each carrying exact derivatives at its samples
    """
    times = sample_times(duration, dt)
    rng = np.random.default_rng(seed)
    initial = rng.uniform(0.0, 1.0, size=(n_traj, 3))

    def field(omega, _u):
        return euler_rhs(omega, inertia, mu)

    trajectories = []
    for omega0 in initial:
        traj = integrate(field, omega0, times, None, GROUND_TRUTH_INTEGRATION)
        traj.derivatives = np.array([euler_rhs(omega, inertia, mu) for omega in traj.states])
        trajectories.append(traj)
    logger.info(
        "Generated %d spinning-body trajectories of %d samples (mu=%g)", n_traj, times.size, mu
    )
    return trajectories


def gen_linear_phs(
    A=None,
    B=None,
    n_traj=5,
    duration=20.0,
    dt=0.1,
    seed=0,
    period=4.0,
    amplitude=0.5,
    x0_box=(-1.0, 1.0),
):
    """
    Trajectories of x' = A x + B u under a square-wave input

    Defaults to the linear port-Hamiltonian test system of
    ``linear_phs_matrices``. Each trajectory gets a square wave with a random
    phase so the excitation differs between trajectories.

    Returns:
        List of Trajectory with inputs and exact derivatives
    """
    default_A, default_B = linear_phs_matrices()
    A = default_A if A is None else np.asarray(A, dtype=np.float64)
    B = default_B if B is None else np.asarray(B, dtype=np.float64).reshape(A.shape[0], -1)
    times = sample_times(duration, dt)
    rng = np.random.default_rng(seed)
    low, high = x0_box
    trajectories = []
    for _ in range(n_traj):
        x0 = rng.uniform(low, high, size=A.shape[0])
        # phase in whole half periods keeps the switches on the sampling grid
        phase = 0.5 * period * rng.integers(0, 2)
        signal = square_wave(period, amplitude, duration, phase) if B.shape[1] else None

        def field(x, u):
            return linear_rhs(x, u, A, B)

        traj = integrate(field, x0, times, signal, GROUND_TRUTH_INTEGRATION)
        traj.derivatives = np.array(
            [linear_rhs(x, signal_eval(signal, t), A, B) for t, x in zip(times, traj.states)]
        )
        trajectories.append(traj)
    logger.info("Generated %d linear-system trajectories of %d samples", n_traj, times.size)
    return trajectories
