"""
Structure (J), dissipation (R) and input (G) matrix heads.

J is skew-symmetric by construction, R = L L^T with L lower triangular is
symmetric positive semi-definite (positive definite in strict mode, where the
diagonal of L passes through softplus), and G is a plain reshape.
"""

from dataclasses import dataclass

import jax
import jax.numpy as jnp
import numpy as np

from sphs.core.errors import ConfigurationError, StructuralError
from sphs.core.nets import DEFAULT_WIDTHS, Ffnn, FfnnConfig, glorot_bound

ROLES = ("J", "R", "G")
MODES = ("constant", "state_dependent", "fixed_symplectic", "zero")
DEFINITENESS = ("strict", "semi")


def skew_size(n):
    return n * (n - 1) // 2


def tril_size(n):
    return n * (n + 1) // 2


def skew_from_vec(v, n):
    """
    Skew-symmetric matrix from its strictly-upper entries

    Entries are filled row-major over i < j with J[i][j] = -v_k and
    J[j][i] = +v_k; the diagonal is zero, so J + J^T = 0 exactly.

    Args:
        v: Vector of length n(n-1)/2
        n: Matrix size

    Returns:
        (n, n) jax array
    """
    v = jnp.asarray(v, dtype=jnp.float64)
    if v.shape != (skew_size(n),):
        raise StructuralError(f"skew_from_vec needs {skew_size(n)} entries for n={n}, got {v.shape}")
    rows, cols = np.triu_indices(n, k=1)
    upper = jnp.zeros((n, n), dtype=jnp.float64).at[rows, cols].set(-v)
    return upper - upper.T


def cholesky_factor_from_vec(v, n, mode="strict"):
    """
    Lower-triangular factor L filled row-major from v

    In strict mode the diagonal is softplus(raw) > 0; in semi mode all
    entries are taken as they are.
    """
    if mode not in DEFINITENESS:
        raise ConfigurationError(f"Unknown definiteness mode: {mode}. Choose from: {DEFINITENESS}")
    v = jnp.asarray(v, dtype=jnp.float64)
    if v.shape != (tril_size(n),):
        raise StructuralError(f"spd_from_vec needs {tril_size(n)} entries for n={n}, got {v.shape}")
    rows, cols = np.tril_indices(n)
    lower = jnp.zeros((n, n), dtype=jnp.float64).at[rows, cols].set(v)
    if mode == "strict":
        lower = jnp.where(np.eye(n, dtype=bool), jax.nn.softplus(lower), lower)
    return lower


def spd_from_vec(v, n, mode="strict"):
    """
    Symmetric positive (semi-)definite matrix R = L L^T

    Args:
        v: Vector of length n(n+1)/2 holding the lower triangle of L row-major
        n: Matrix size
        mode: "strict" (R > 0) or "semi" (R >= 0)

    Returns:
        (n, n) jax array
    """
    lower = cholesky_factor_from_vec(v, n, mode)
    return lower @ lower.T


def symplectic_matrix(n):
    """Canonical symplectic matrix [[0, -I], [I, 0]] for even n"""
    if n % 2:
        raise ConfigurationError(f"Fixed symplectic structure needs an even state dimension, got n={n}")
    half = n // 2
    eye = np.eye(half)
    zero = np.zeros((half, half))
    return np.block([[zero, -eye], [eye, zero]])


@dataclass(frozen=True)
class MatrixHead:
    """
    One of the J, R, G matrix-valued functions of the state

    Args:
        role: "J", "R" or "G"
        mode: "constant", "state_dependent", "fixed_symplectic" (J only) or "zero"
        state_dim: n
        input_dim: m (only used by G)
        definiteness: "strict" or "semi" (only used by R)
        widths: Hidden widths of the state-dependent FFNN
        activation: Hidden activation of the state-dependent FFNN
    """

    role: str
    mode: str
    state_dim: int
    input_dim: int = 0
    definiteness: str = "strict"
    widths: tuple = DEFAULT_WIDTHS
    activation: str = "softplus"

    def __post_init__(self):
        if self.role not in ROLES:
            raise ConfigurationError(f"Unknown matrix role: {self.role}. Choose from: {ROLES}")
        if self.mode not in MODES:
            raise ConfigurationError(f"Unknown matrix mode: {self.mode}. Choose from: {MODES}")
        if self.definiteness not in DEFINITENESS:
            raise ConfigurationError(
                f"Unknown definiteness mode: {self.definiteness}. Choose from: {DEFINITENESS}"
            )
        if self.mode == "fixed_symplectic":
            if self.role != "J":
                raise ConfigurationError("Only the structure matrix J can be fixed to the symplectic matrix")
            symplectic_matrix(self.state_dim)
        if self.role == "G" and self.input_dim == 0 and self.mode != "zero":
            raise ConfigurationError("Input matrix G must use mode 'zero' when the model has no inputs")

    @property
    def prefix(self):
        return self.role

    @property
    def shape(self):
        n = self.state_dim
        return (n, self.input_dim) if self.role == "G" else (n, n)

    @property
    def raw_size(self):
        n = self.state_dim
        if self.role == "J":
            return skew_size(n)
        if self.role == "R":
            return tril_size(n)
        return n * self.input_dim

    @property
    def net(self):
        config = FfnnConfig(
            input_dim=self.state_dim,
            output_dim=max(self.raw_size, 1),
            widths=self.widths,
            activation=self.activation,
        )
        return Ffnn(config, prefix=f"{self.prefix}.net")

    @property
    def is_trainable(self):
        return self.mode in ("constant", "state_dependent") and self.raw_size > 0

    def shapes(self):
        if not self.is_trainable:
            return []
        if self.mode == "constant":
            return [(f"{self.prefix}.raw", (self.raw_size,))]
        return self.net.shapes()

    def init(self, rng):
        if not self.is_trainable:
            return {}
        if self.mode == "state_dependent":
            return self.net.init(rng)
        rows, cols = self.shape
        bound = glorot_bound(rows, cols)
        return {f"{self.prefix}.raw": rng.uniform(-bound, bound, size=self.raw_size)}

    def _from_raw(self, raw):
        n = self.state_dim
        if self.role == "J":
            return skew_from_vec(raw, n)
        if self.role == "R":
            return spd_from_vec(raw, n, self.definiteness)
        return raw.reshape(n, self.input_dim)

    def build(self, tree, x):
        """Matrix value at state x"""
        if self.mode == "zero" or (self.mode != "fixed_symplectic" and self.raw_size == 0):
            return jnp.zeros(self.shape, dtype=jnp.float64)
        if self.mode == "fixed_symplectic":
            return jnp.asarray(symplectic_matrix(self.state_dim))
        if self.mode == "constant":
            return self._from_raw(tree[f"{self.prefix}.raw"])
        return self._from_raw(self.net.apply(tree, x))
