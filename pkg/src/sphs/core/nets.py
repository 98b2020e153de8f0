"""
Feed-forward (FFNN) and fully input-convex (FICNN) networks.

Networks are stateless descriptions: they know their shapes and how to map a
parameter tree and an input to an output. Parameters live in the owning
model's ParamVector under the network's ``prefix``.

FICNN recurrence (k = len(widths) + 1 layers)::

    z_1     = softplus(W_0 x + b_0)
    z_{i+1} = softplus(U_i z_i + W_i x + b_i),   i = 1 .. k-2
    f(x)    = U_{k-1} z_{k-1} + W_{k-1} x + b_{k-1}

with effective U_i = softplus(raw U_i) >= 0. The last layer is affine, so
f stays convex for every parameter value.
"""

from dataclasses import dataclass, field

import jax
import jax.numpy as jnp
import numpy as np

from sphs.core.errors import ConfigurationError, StructuralError
from sphs.utils.numerics import softplus_inverse

ACTIVATIONS = {
    "softplus": jax.nn.softplus,
    "tanh": jnp.tanh,
}

# Two hidden layers of 16 neurons
DEFAULT_WIDTHS = (16, 16)

# Smallest effective hidden-to-hidden weight produced at initialization
_MIN_EFFECTIVE_U = 1e-6


def glorot_bound(fan_in, fan_out):
    """
    Glorot-uniform half-width

    a = sqrt(6 / (fan_in + fan_out))
    """
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def _check_dims(input_dim, widths, output_dim):
    if input_dim < 1 or output_dim < 1:
        raise ConfigurationError(
            f"Network dimensions must be >= 1, got input_dim={input_dim}, output_dim={output_dim}"
        )
    if any(w < 1 for w in widths):
        raise ConfigurationError(f"Hidden widths must be >= 1, got {list(widths)}")


@dataclass(frozen=True)
class FfnnConfig:
    """Shape and activation of a feed-forward network"""

    input_dim: int
    output_dim: int
    widths: tuple = DEFAULT_WIDTHS
    activation: str = "softplus"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        _check_dims(self.input_dim, self.widths, self.output_dim)
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError(
                f"Unknown activation: {self.activation}. Choose from: {sorted(ACTIVATIONS)}"
            )


@dataclass(frozen=True)
class FicnnConfig:
    """Shape of a scalar-output input-convex network"""

    input_dim: int
    widths: tuple = DEFAULT_WIDTHS
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        _check_dims(self.input_dim, self.widths, 1)


@dataclass(frozen=True)
class Ffnn:
    """Feed-forward network; hidden layers use the configured activation, output is affine"""

    config: FfnnConfig
    prefix: str = "ffnn"

    def shapes(self):
        """Ordered (segment name, shape) pairs"""
        dims = (self.config.input_dim,) + self.config.widths + (self.config.output_dim,)
        out = []
        for i in range(len(dims) - 1):
            out.append((f"{self.prefix}.W{i}", (dims[i + 1], dims[i])))
            out.append((f"{self.prefix}.b{i}", (dims[i + 1],)))
        return out

    def init(self, rng):
        """Glorot-uniform weights, zero biases"""
        arrays = {}
        for name, shape in self.shapes():
            if name.rsplit(".", 1)[1].startswith("W"):
                fan_out, fan_in = shape
                bound = glorot_bound(fan_in, fan_out)
                arrays[name] = rng.uniform(-bound, bound, size=shape)
            else:
                arrays[name] = np.zeros(shape)
        return arrays

    def apply(self, tree, x):
        act = ACTIVATIONS[self.config.activation]
        n_layers = len(self.config.widths) + 1
        h = x
        for i in range(n_layers):
            h = tree[f"{self.prefix}.W{i}"] @ h + tree[f"{self.prefix}.b{i}"]
            if i < n_layers - 1:
                h = act(h)
        return h


@dataclass(frozen=True)
class Ficnn:
    """Fully input-convex network with scalar output"""

    config: FicnnConfig
    prefix: str = "ficnn"

    def shapes(self):
        n = self.config.input_dim
        widths = self.config.widths + (1,)
        out = [(f"{self.prefix}.W0", (widths[0], n)), (f"{self.prefix}.b0", (widths[0],))]
        for i in range(1, len(widths)):
            out.append((f"{self.prefix}.U{i}_raw", (widths[i], widths[i - 1])))
            out.append((f"{self.prefix}.W{i}", (widths[i], n)))
            out.append((f"{self.prefix}.b{i}", (widths[i],)))
        return out

    def init(self, rng):
        """
        Glorot-uniform pass-through weights, zero biases, raw U chosen so that
        softplus(raw U) equals |w| for a Glorot-uniform draw w
        """
        arrays = {}
        for name, shape in self.shapes():
            kind = name.rsplit(".", 1)[1]
            if kind.startswith("b"):
                arrays[name] = np.zeros(shape)
                continue
            fan_out, fan_in = shape
            bound = glorot_bound(fan_in, fan_out)
            sample = rng.uniform(-bound, bound, size=shape)
            if kind.endswith("_raw"):
                arrays[name] = softplus_inverse(np.maximum(np.abs(sample), _MIN_EFFECTIVE_U))
            else:
                arrays[name] = sample
        return arrays

    def effective_u(self, tree, i):
        """Non-negative hidden-to-hidden weights U_i = softplus(raw U_i)"""
        return jax.nn.softplus(tree[f"{self.prefix}.U{i}_raw"])

    def apply(self, tree, x):
        k = len(self.config.widths) + 1
        z = tree[f"{self.prefix}.W0"] @ x + tree[f"{self.prefix}.b0"]
        if k == 1:
            return z[0]
        z = jax.nn.softplus(z)
        for i in range(1, k):
            z = (
                self.effective_u(tree, i) @ z
                + tree[f"{self.prefix}.W{i}"] @ x
                + tree[f"{self.prefix}.b{i}"]
            )
            if i < k - 1:
                z = jax.nn.softplus(z)
        return z[0]


@dataclass(frozen=True)
class NetworkParams:
    """A network bundled with its own parameter tree, for standalone use"""

    net: object
    tree: dict = field(repr=False)


def init_glorot(config, seed=None, prefix=None):
    """
    Build and initialize a network from its configuration

    Args:
        config: FfnnConfig or FicnnConfig
        seed: Seed for numpy's default_rng (defaults to ``config.seed``)
        prefix: Segment-name prefix (defaults to "ffnn" / "ficnn")

    Returns:
        NetworkParams with numpy arrays
    """
    if seed is None:
        seed = config.seed
    rng = np.random.default_rng(seed)
    if isinstance(config, FicnnConfig):
        net = Ficnn(config, prefix or "ficnn")
    elif isinstance(config, FfnnConfig):
        net = Ffnn(config, prefix or "ffnn")
    else:
        raise ConfigurationError(f"Unsupported network configuration: {type(config).__name__}")
    return NetworkParams(net, net.init(rng))


def _as_input(x, input_dim):
    x = jnp.asarray(x, dtype=jnp.float64)
    if x.shape != (input_dim,):
        raise StructuralError(f"Network input has shape {x.shape}, expected ({input_dim},)")
    return x


def ffnn_forward(network, x):
    """
    Forward pass of a standalone FFNN

    Args:
        network: NetworkParams holding an Ffnn
        x: Input vector of length input_dim

    Returns:
        numpy output vector of length output_dim
    """
    x = _as_input(x, network.net.config.input_dim)
    return np.asarray(network.net.apply(network.tree, x))


def ficnn_forward(network, x):
    """Forward pass of a standalone FICNN; returns a float"""
    x = _as_input(x, network.net.config.input_dim)
    return float(network.net.apply(network.tree, x))
