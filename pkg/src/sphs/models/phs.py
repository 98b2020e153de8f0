"""
Model zoo: sPHNN, sPHNN-LM, bPHNN, PHNN and NODE as right-hand sides x' = f(x, u).

Port-Hamiltonian kinds evaluate

    x' = J(x) dH/dx - R(x) dH/dx + G(x) u

and keep the three contributions (conservative, dissipative, input) apart so
that they can be inspected individually. The NODE baseline is a single FFNN
on the concatenation [x; u].
"""

import logging
from dataclasses import asdict, dataclass, fields
from functools import cached_property

import jax
import jax.numpy as jnp
import numpy as np

from sphs.core.autodiff import ParamLayout, ParamVector, ScalarExpr, eval_expr, grad_input
from sphs.core.errors import ConfigurationError, StructuralError, UnsupportedOperationError
from sphs.core.nets import DEFAULT_WIDTHS, Ffnn, FfnnConfig
from sphs.models.hamiltonian import HamiltonianHead
from sphs.models.matrices import MatrixHead

logger = logging.getLogger(__name__)

KINDS = ("sphnn", "sphnn_lm", "bphnn", "phnn", "node")

HAMILTONIAN_VARIANT = {
    "sphnn": "sphnn_convex",
    "sphnn_lm": "sphnn_convex",
    "bphnn": "bphnn_squared",
    "phnn": "phnn_plain",
}


@dataclass(frozen=True)
class ModelSpec:
    """
    Complete description of a model; JSON-serializable through to_dict/from_dict

    Args:
        kind: One of KINDS
        state_dim: n >= 1 (observed plus augmented dimensions)
        input_dim: m >= 0
        widths: Hidden widths of every network in the model
        activation: Hidden activation of the FFNNs (FICNN always uses softplus)
        j_mode, r_mode, g_mode: Matrix-head modes; g_mode defaults to "constant"
            when m > 0 and "zero" otherwise
        r_definiteness: "strict" (R > 0) or "semi" (R >= 0)
        x_star: Equilibrium for sphnn (fixed) and the quadratic anchor of bphnn;
            defaults to the origin
        x_star_box: Uniform initialization box of the learnable x* of sphnn_lm
        epsilon: f_reg weight of the convex Hamiltonian
        beta: Quadratic weight of the bPHNN Hamiltonian
        seed: Initialization seed
    """

    kind: str
    state_dim: int
    input_dim: int = 0
    widths: tuple = DEFAULT_WIDTHS
    activation: str = "softplus"
    j_mode: str = "constant"
    r_mode: str = "constant"
    g_mode: str = None
    r_definiteness: str = "strict"
    x_star: tuple = None
    x_star_box: tuple = (-1.0, 1.0)
    epsilon: float = 0.0
    beta: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"Unknown model kind: {self.kind}. Choose from: {KINDS}")
        if self.state_dim < 1:
            raise ConfigurationError(f"State dimension must be >= 1, got {self.state_dim}")
        if self.input_dim < 0:
            raise ConfigurationError(f"Input dimension must be >= 0, got {self.input_dim}")
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        object.__setattr__(self, "x_star_box", tuple(float(v) for v in self.x_star_box))
        if self.g_mode is None:
            object.__setattr__(self, "g_mode", "constant" if self.input_dim > 0 else "zero")
        if self.x_star is not None:
            object.__setattr__(self, "x_star", tuple(float(v) for v in self.x_star))

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"Unknown model spec keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self):
        data = asdict(self)
        for key in ("widths", "x_star", "x_star_box"):
            if data[key] is not None:
                data[key] = list(data[key])
        return data


class PhsModel:
    """
    A model instance: static heads plus the ParamVector that owns every trainable scalar

    The pure functions ``energy``, ``gradient``, ``matrices``, ``parts`` and
    ``vector_field`` take a parameter tree and are safe to trace; the public
    module functions below evaluate them with the current ``params``.
    """

    def __init__(self, spec, params=None):
        self.spec = spec
        n, m = spec.state_dim, spec.input_dim
        self.hamiltonian_head = None
        self.heads = {}
        self.node_net = None
        if spec.kind == "node":
            config = FfnnConfig(n + m, n, spec.widths, spec.activation)
            self.node_net = Ffnn(config, prefix="node")
        else:
            self.hamiltonian_head = HamiltonianHead(
                variant=HAMILTONIAN_VARIANT[spec.kind],
                state_dim=n,
                widths=spec.widths,
                activation=spec.activation,
                x_star=spec.x_star,
                trainable_x_star=spec.kind == "sphnn_lm",
                x_star_box=spec.x_star_box,
                epsilon=spec.epsilon,
                beta=spec.beta,
            )
            for role, mode in (("J", spec.j_mode), ("R", spec.r_mode), ("G", spec.g_mode)):
                self.heads[role] = MatrixHead(
                    role=role,
                    mode=mode,
                    state_dim=n,
                    input_dim=m,
                    definiteness=spec.r_definiteness,
                    widths=spec.widths,
                    activation=spec.activation,
                )
        self.layout = ParamLayout.from_shapes(self._components_shapes())
        if params is None:
            params = self._initial_params()
        if params.layout != self.layout:
            raise StructuralError("Parameter vector layout does not match the model specification")
        self.params = params

    def __repr__(self):
        return (
            f"PhsModel(kind={self.kind!r}, n={self.state_dim}, m={self.input_dim}, "
            f"params={len(self.params)})"
        )

    @property
    def kind(self):
        return self.spec.kind

    @property
    def state_dim(self):
        return self.spec.state_dim

    @property
    def input_dim(self):
        return self.spec.input_dim

    @property
    def has_hamiltonian(self):
        return self.hamiltonian_head is not None

    def _components(self):
        if self.node_net is not None:
            return [self.node_net]
        return [self.hamiltonian_head] + [self.heads[role] for role in ("J", "R", "G")]

    def _components_shapes(self):
        shapes = []
        for component in self._components():
            shapes.extend(component.shapes())
        return shapes

    def _initial_params(self):
        rng = np.random.default_rng(self.spec.seed)
        arrays = {}
        for component in self._components():
            arrays.update(component.init(rng))
        return ParamVector(self.layout, self.layout.flatten(arrays))

    # -- pure functions of a parameter tree ---------------------------------

    def energy(self, tree, x):
        return self.hamiltonian_head.energy(tree, x)

    def gradient(self, tree, x):
        return jax.grad(self.energy, argnums=1)(tree, x)

    def matrices(self, tree, x):
        return tuple(self.heads[role].build(tree, x) for role in ("J", "R", "G"))

    def parts(self, tree, x, u):
        dh = self.gradient(tree, x)
        J, R, G = self.matrices(tree, x)
        return J @ dh, -(R @ dh), G @ u

    def vector_field(self, tree, x, u):
        if self.node_net is not None:
            return self.node_net.apply(tree, jnp.concatenate([x, u]))
        conservative, dissipative, inputs = self.parts(tree, x, u)
        return conservative + dissipative + inputs

    def equilibrium_of(self, tree):
        return self.hamiltonian_head.equilibrium(tree)

    # -- compiled evaluators, cached per model --------------------------------

    def _with_theta(self, fn):
        layout = self.layout
        return jax.jit(lambda theta, *args: fn(layout.unflatten(theta), *args))

    @cached_property
    def _parts_jit(self):
        return self._with_theta(self.parts)

    @cached_property
    def _vector_field_jit(self):
        return self._with_theta(self.vector_field)

    @cached_property
    def _matrices_jit(self):
        return self._with_theta(self.matrices)

    @cached_property
    def _energy_batch_jit(self):
        return self._with_theta(lambda tree, X: jax.vmap(lambda x: self.energy(tree, x))(X))

    @cached_property
    def _matrices_batch_jit(self):
        return self._with_theta(lambda tree, X: jax.vmap(lambda x: self.matrices(tree, x))(X))

    @cached_property
    def _power_batch_jit(self):
        def power(tree, x, u):
            dh = self.gradient(tree, x)
            conservative, dissipative, inputs = self.parts(tree, x, u)
            total = conservative + dissipative + inputs
            return self.energy(tree, x), dh @ total, dh @ dissipative, dh @ inputs

        return self._with_theta(lambda tree, X, U: jax.vmap(lambda x, u: power(tree, x, u))(X, U))

    @cached_property
    def hamiltonian_expr(self):
        """The Hamiltonian as a ScalarExpr over the model's parameter layout"""
        self._require_hamiltonian("hamiltonian")
        return ScalarExpr(
            lambda x, tree: self.energy(tree, x),
            layout=self.layout,
            input_dim=self.state_dim,
            name=f"{self.kind}.hamiltonian",
        )

    def _require_hamiltonian(self, operation):
        if not self.has_hamiltonian:
            raise UnsupportedOperationError(f"{operation} is not defined for model kind '{self.kind}'")

    def check_state(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.state_dim,):
            raise StructuralError(f"State has shape {x.shape}, model expects ({self.state_dim},)")
        return x

    def check_input(self, u):
        if u is None:
            return np.zeros(self.input_dim)
        u = np.asarray(u, dtype=np.float64).reshape(-1)
        if u.shape != (self.input_dim,):
            raise StructuralError(f"Input has shape {u.shape}, model expects ({self.input_dim},)")
        return u

    def equilibrium(self):
        """Current x* as a numpy vector"""
        self._require_hamiltonian("equilibrium")
        if self.hamiltonian_head.trainable_x_star:
            return self.params.segment("H.x_star")
        return np.array(self.hamiltonian_head.x_star)

    def numpy_rhs(self):
        """Host-side callable f(x, u) evaluating the model with its current parameters"""
        theta = self.params.values.copy()
        field = self._vector_field_jit

        def f(x, u):
            return np.asarray(field(theta, np.asarray(x, dtype=np.float64), self.check_input(u)))

        return f


def build_model(spec):
    """
    Initialize a model from its specification

    Args:
        spec: ModelSpec or a dict accepted by ModelSpec.from_dict

    Returns:
        PhsModel with Glorot-initialized parameters

    Raises:
        ConfigurationError: If the specification is inconsistent
    """
    if isinstance(spec, dict):
        spec = ModelSpec.from_dict(spec)
    model = PhsModel(spec)
    logger.debug("Built %r", model)
    return model


def hamiltonian(model, x):
    """H(x) for the model's current parameters"""
    model._require_hamiltonian("hamiltonian")
    return eval_expr(model.hamiltonian_expr, model.check_state(x), model.params)


def grad_hamiltonian(model, x):
    """dH/dx at x"""
    model._require_hamiltonian("grad_hamiltonian")
    return grad_input(model.hamiltonian_expr, model.check_state(x), model.params)


def hamiltonian_batch(model, X):
    """H at every row of X (K, n)"""
    model._require_hamiltonian("hamiltonian")
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.state_dim:
        raise StructuralError(f"States have shape {X.shape}, model expects (K, {model.state_dim})")
    return np.asarray(model._energy_batch_jit(model.params.values, X))


def structure_matrices_batch(model, X):
    """(J, R, G) stacked over the rows of X"""
    model._require_hamiltonian("structure_matrices")
    X = np.asarray(X, dtype=np.float64).reshape(-1, model.state_dim)
    J, R, G = model._matrices_batch_jit(model.params.values, X)
    return np.asarray(J), np.asarray(R), np.asarray(G)


def power_terms(model, X, U=None):
    """
    Energy-balance terms at every row of X

    Returns:
        Tuple of (K,) arrays: H, dH/dx^T f, dH/dx^T (-R dH/dx), supply rate
    """
    model._require_hamiltonian("power_terms")
    X = np.asarray(X, dtype=np.float64).reshape(-1, model.state_dim)
    if U is None:
        U = np.zeros((X.shape[0], model.input_dim))
    U = np.asarray(U, dtype=np.float64).reshape(X.shape[0], model.input_dim)
    return tuple(np.asarray(v) for v in model._power_batch_jit(model.params.values, X, U))


def structure_matrices(model, x):
    """(J, R, G) at x as numpy arrays"""
    model._require_hamiltonian("structure_matrices")
    J, R, G = model._matrices_jit(model.params.values, model.check_state(x))
    return np.asarray(J), np.asarray(R), np.asarray(G)


def decompose(model, x, u=None):
    """
    Split the port-Hamiltonian right-hand side into its contributions

    Returns:
        Tuple (conservative J dH, dissipative -R dH, input G u) of numpy vectors
    """
    model._require_hamiltonian("decompose")
    parts = model._parts_jit(model.params.values, model.check_state(x), model.check_input(u))
    return tuple(np.asarray(p) for p in parts)


def rhs(model, x, u=None):
    """
    Right-hand side x' = f(x, u)

    For port-Hamiltonian kinds this is the sum of the three vectors returned
    by ``decompose``, in that order.
    """
    if model.has_hamiltonian:
        conservative, dissipative, inputs = decompose(model, x, u)
        return conservative + dissipative + inputs
    x = model.check_state(x)
    return np.asarray(model._vector_field_jit(model.params.values, x, model.check_input(u)))


def supply_rate(model, x, u=None):
    """s(x, u) = dH/dx^T G(x) u"""
    model._require_hamiltonian("supply_rate")
    x = model.check_state(x)
    _, _, G = structure_matrices(model, x)
    return float(grad_hamiltonian(model, x) @ (G @ model.check_input(u)))
