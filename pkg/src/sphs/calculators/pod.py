"""
Proper orthogonal decomposition of field snapshots.

Snapshots are the rows of A (M snapshots by N field values). With the SVD
A = U S V^T truncated to n modes, the basis is M = c V_n where c is the
standard deviation of the entries of U_n S_n, so the latent coordinates of
the snapshots have unit spread. Encoding solves the least-squares problem
min |X - M x|, i.e. x = M^T X / c², and subtracts a latent shift that maps
the equilibrium field to the origin.
"""

import logging
from dataclasses import dataclass, replace

import numpy as np

from sphs.core.errors import ConfigurationError, StructuralError

logger = logging.getLogger(__name__)

DEFAULT_LATENT_DIM = 40


@dataclass(frozen=True, eq=False)
class PodBasis:
    """
    Scaled POD modes

    Args:
        modes: M = c V_n, shape (N, n)
        scale: c > 0
        shift: Latent equilibrium shift (n,)
        singular_values: All singular values of the snapshot matrix, descending
    """

    modes: np.ndarray
    scale: float
    shift: np.ndarray
    singular_values: np.ndarray

    @property
    def snapshot_dim(self):
        return self.modes.shape[0]

    @property
    def latent_dim(self):
        return self.modes.shape[1]

    def _check(self, values, expected, what):
        values = np.asarray(values, dtype=np.float64)
        if values.shape[-1:] != (expected,):
            raise StructuralError(f"{what} has shape {values.shape}, expected trailing dimension {expected}")
        return values


def pod_fit(snapshots, n=DEFAULT_LATENT_DIM):
    """
    Fit an n-mode basis to snapshot rows

    Args:
        snapshots: (M, N) matrix, one snapshot per row
        n: Latent dimension, 1 <= n <= min(M, N)

    Returns:
        PodBasis with zero shift

    Raises:
        ConfigurationError: If n is out of range or the snapshots are all zero
    """
    A = np.asarray(snapshots, dtype=np.float64)
    if A.ndim != 2:
        raise StructuralError(f"Snapshots must be a matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ConfigurationError("Snapshots contain non-finite values")
    if not 1 <= n <= min(A.shape):
        raise ConfigurationError(f"Latent dimension must lie in [1, {min(A.shape)}], got {n}")
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    if s[0] == 0.0:
        raise ConfigurationError("Snapshot matrix is zero")
    codes = U[:, :n] * s[:n]
    c = float(np.std(codes))
    if c == 0.0:
        raise ConfigurationError("Truncated snapshot coordinates have zero spread")
    basis = PodBasis(c * Vt[:n].T, c, np.zeros(n), s)
    captured = float(np.sum(s[:n] ** 2) / np.sum(s**2))
    logger.info("POD basis: N=%d, n=%d, c=%.6g, captured energy %.6f", A.shape[1], n, c, captured)
    return basis


def encode(basis, X):
    """Latent coordinates of a field (N,) or of field rows (K, N)"""
    X = basis._check(X, basis.snapshot_dim, "Field")
    return X @ basis.modes / basis.scale**2 - basis.shift


def decode(basis, x):
    """Field reconstruction X = M (x + shift)"""
    x = basis._check(x, basis.latent_dim, "Latent vector")
    return (x + basis.shift) @ basis.modes.T


def set_equilibrium(basis, T_eq):
    """Basis whose encoding maps the field T_eq to the latent origin"""
    T_eq = basis._check(T_eq, basis.snapshot_dim, "Equilibrium field")
    if T_eq.ndim != 1:
        raise StructuralError(f"Equilibrium field must be a vector, got shape {T_eq.shape}")
    return replace(basis, shift=T_eq @ basis.modes / basis.scale**2)


def reconstruction_error(basis, X):
    """
    Relative Frobenius error |X - decode(encode(X))| / |X|

    Falls back to the absolute error when X is zero.
    """
    X = np.asarray(X, dtype=np.float64)
    residual = np.linalg.norm(X - decode(basis, encode(basis, X)))
    norm = np.linalg.norm(X)
    return float(residual / norm) if norm > 0 else float(residual)
