"""
Hamiltonian heads.

sphnn_convex: H(x) = f(x) - f(x*) - grad f(x*)^T (x - x*) + eps ||x - x*||^2
              with f an FICNN, so H(x*) = 0 and grad H(x*) = 0 for any weights.
bphnn_squared: H(x) = sum_i g_i(x)^2 + beta ||x - x*||^2 with g an unconstrained
              FFNN of output size n; positive and radially unbounded.
phnn_plain:   H(x) = g(x) with g an unconstrained scalar FFNN.
"""

from dataclasses import dataclass

import jax
import jax.numpy as jnp
import numpy as np

from sphs.core.errors import ConfigurationError
from sphs.core.nets import DEFAULT_WIDTHS, Ffnn, FfnnConfig, Ficnn, FicnnConfig

VARIANTS = ("sphnn_convex", "bphnn_squared", "phnn_plain")

PREFIX = "H"
X_STAR_SEGMENT = "H.x_star"


@dataclass(frozen=True)
class HamiltonianHead:
    """
    Scalar energy function of the state

    Args:
        variant: One of VARIANTS
        state_dim: n
        widths: Hidden widths of the underlying network
        activation: Hidden activation of the FFNN variants
        x_star: Fixed equilibrium (tuple of n floats); ignored when trainable
        trainable_x_star: Store x* as a trainable parameter segment
        x_star_box: (low, high) of the uniform draw for a trainable x*
        epsilon: Weight of the quadratic regularizer of sphnn_convex
        beta: Weight of the quadratic term of bphnn_squared
    """

    variant: str
    state_dim: int
    widths: tuple = DEFAULT_WIDTHS
    activation: str = "softplus"
    x_star: tuple = None
    trainable_x_star: bool = False
    x_star_box: tuple = (-1.0, 1.0)
    epsilon: float = 0.0
    beta: float = 0.1

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"Unknown Hamiltonian variant: {self.variant}. Choose from: {VARIANTS}")
        if self.x_star is None:
            object.__setattr__(self, "x_star", (0.0,) * self.state_dim)
        object.__setattr__(self, "x_star", tuple(float(v) for v in self.x_star))
        if len(self.x_star) != self.state_dim:
            raise ConfigurationError(
                f"Equilibrium has {len(self.x_star)} entries, state dimension is {self.state_dim}"
            )
        if self.epsilon < 0:
            raise ConfigurationError(f"Regularizer weight epsilon must be >= 0, got {self.epsilon}")
        if self.variant == "bphnn_squared" and self.beta <= 0:
            raise ConfigurationError(f"bPHNN regularizer weight beta must be > 0, got {self.beta}")
        low, high = self.x_star_box
        if not low < high:
            raise ConfigurationError(f"Invalid x* initialization box: {self.x_star_box}")

    @property
    def net(self):
        if self.variant == "sphnn_convex":
            return Ficnn(FicnnConfig(self.state_dim, self.widths), prefix=f"{PREFIX}.ficnn")
        output_dim = self.state_dim if self.variant == "bphnn_squared" else 1
        config = FfnnConfig(self.state_dim, output_dim, self.widths, self.activation)
        return Ffnn(config, prefix=f"{PREFIX}.ffnn")

    def shapes(self):
        shapes = list(self.net.shapes())
        if self.trainable_x_star:
            shapes.append((X_STAR_SEGMENT, (self.state_dim,)))
        return shapes

    def init(self, rng):
        arrays = self.net.init(rng)
        if self.trainable_x_star:
            low, high = self.x_star_box
            arrays[X_STAR_SEGMENT] = rng.uniform(low, high, size=self.state_dim)
        return arrays

    def equilibrium(self, tree):
        if self.trainable_x_star:
            return tree[X_STAR_SEGMENT]
        return jnp.asarray(np.array(self.x_star))

    def energy(self, tree, x):
        net = self.net
        x_star = self.equilibrium(tree)
        d = x - x_star
        if self.variant == "sphnn_convex":
            f = lambda y: net.apply(tree, y)  # noqa: E731
            f_star, grad_star = jax.value_and_grad(f)(x_star)
            return f(x) - f_star - grad_star @ d + self.epsilon * (d @ d)
        if self.variant == "bphnn_squared":
            g = net.apply(tree, x)
            return g @ g + self.beta * (d @ d)
        return net.apply(tree, x)[0]
