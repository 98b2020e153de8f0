"""Reference dynamics - Euler rotation equations, rigid-body kinetic energy, linear port-Hamiltonian system"""

import numpy as np

from sphs.core.errors import ConfigurationError, StructuralError

# Default principal moments of inertia of the spinning body, kg m²
DEFAULT_INERTIA = (1.0, 2.0, 3.0)

# Default linear viscous damping coefficient of the spinning body
DEFAULT_DAMPING = 0.01


def _principal_moments(inertia):
    moments = np.asarray(inertia, dtype=np.float64)
    if moments.ndim == 2:
        moments = np.diag(moments)
    if moments.shape != (3,):
        raise StructuralError(f"Inertia must hold 3 principal moments, got shape {moments.shape}")
    if np.any(moments <= 0):
        raise ConfigurationError(f"Principal moments must be > 0, got {moments.tolist()}")
    return moments


def euler_rhs(omega, inertia=DEFAULT_INERTIA, mu=DEFAULT_DAMPING):
    """
    Angular acceleration of a damped rigid body spinning freely about its center of mass

    I ω' + ω × (I ω) = -μ ω

    Args:
        omega: Angular velocity in the body frame (3,) in rad/s
        inertia: Principal moments (3,) or diagonal inertia matrix (3, 3)
        mu: Viscous damping coefficient (>= 0)

    Returns:
        ω' in rad/s²
    """
    moments = _principal_moments(inertia)
    if mu < 0:
        raise ConfigurationError(f"Damping coefficient must be >= 0, got {mu}")
    omega = np.asarray(omega, dtype=np.float64)
    return (-np.cross(omega, moments * omega) - mu * omega) / moments


def rigid_energy(omega, inertia=DEFAULT_INERTIA):
    """
    Rotational kinetic energy

    E = 1/2 Σ I_i ω_i²

    Works on a single state (3,) or on a batch of states (K, 3).
    """
    moments = _principal_moments(inertia)
    omega = np.asarray(omega, dtype=np.float64)
    return 0.5 * np.sum(moments * omega**2, axis=-1)


def linear_rhs(x, u, A, B):
    """
    Linear time-invariant dynamics

    x' = A x + B u

    Args:
        x: State (n,)
        u: Input (m,), may be empty
        A: (n, n)
        B: (n, m)
    """
    x = np.asarray(x, dtype=np.float64)
    out = np.asarray(A, dtype=np.float64) @ x
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    if u.size:
        out = out + np.asarray(B, dtype=np.float64).reshape(x.size, -1) @ u
    return out


def linear_phs_matrices(damping=0.1):
    """
    Forced linear port-Hamiltonian test system with H(x) = 1/2 |x|²

    A = J - R with J = [[0, -1], [1, 0]] and R = damping * I, B = (0, 1)^T

    Returns:
        Tuple (A, B)
    """
    J = np.array([[0.0, -1.0], [1.0, 0.0]])
    R = damping * np.eye(2)
    B = np.array([[0.0], [1.0]])
    return J - R, B
