"""Definiteness checks on small symmetric matrices"""

import numpy as np


def symmetrize(matrix):
    matrix = np.asarray(matrix, dtype=np.float64)
    return 0.5 * (matrix + matrix.T)


def min_eigenvalue(matrix):
    """Smallest eigenvalue of the symmetric part of ``matrix``"""
    return float(np.linalg.eigvalsh(symmetrize(matrix))[0])


def cholesky_succeeds(matrix, shift=0.0):
    """
    Attempted Cholesky factorization of ``matrix - shift * I``

    Returns:
        True if the (shifted) matrix is numerically positive definite
    """
    matrix = symmetrize(matrix)
    try:
        np.linalg.cholesky(matrix - shift * np.eye(matrix.shape[0]))
    except np.linalg.LinAlgError:
        return False
    return True


def skew_residual(matrix):
    """max |J + J^T|"""
    matrix = np.asarray(matrix, dtype=np.float64)
    return float(np.max(np.abs(matrix + matrix.T))) if matrix.size else 0.0
