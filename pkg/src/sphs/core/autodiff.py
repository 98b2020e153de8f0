"""
Reverse-mode differentiation of scalar expressions over a flat parameter vector.

A ScalarExpr wraps a pure function ``fn(inputs, tree) -> scalar`` written with
``jax.numpy``. Tracing it yields the computation graph (a jaxpr) in which
constants, input and parameter variables, sums, products, affine maps,
softplus, squares and dot products are primitives; the graph is acyclic by
construction. Compiled value and gradient functions are built once per
expression and cached on it, so training loops only pay for tracing on the
first call.

All arithmetic is float64: 64-bit mode is switched on when this module is
imported.
"""

import math
from dataclasses import dataclass
from functools import cached_property

import jax
import jax.numpy as jnp
import numpy as np

from sphs.core.errors import StructuralError

jax.config.update("jax_enable_x64", True)

# Central-difference step of the Hessian path
HESSIAN_STEP = 1e-5


@dataclass(frozen=True)
class Segment:
    """One named block of a flat parameter vector"""

    name: str
    offset: int
    shape: tuple

    @property
    def size(self):
        return int(math.prod(self.shape))


class ParamLayout:
    """
    Ordered segment table of a flat parameter vector.

    The order is the insertion order of the shapes handed to ``from_shapes``,
    which model builders keep deterministic for a given configuration.
    """

    def __init__(self, segments=()):
        self.segments = tuple(segments)
        self._index = {segment.name: segment for segment in self.segments}
        if len(self._index) != len(self.segments):
            raise StructuralError("Duplicate segment names in parameter layout")

    @classmethod
    def from_shapes(cls, shapes):
        """
        Build a layout from ``(name, shape)`` pairs

        Args:
            shapes: Iterable of (segment name, shape tuple), in storage order

        Returns:
            ParamLayout with contiguous offsets
        """
        segments = []
        offset = 0
        for name, shape in shapes:
            segment = Segment(name, offset, tuple(int(d) for d in shape))
            segments.append(segment)
            offset += segment.size
        return cls(segments)

    @property
    def size(self):
        return sum(segment.size for segment in self.segments)

    @property
    def names(self):
        return [segment.name for segment in self.segments]

    def __getitem__(self, name):
        try:
            return self._index[name]
        except KeyError:
            raise StructuralError(f"Unknown parameter segment: {name}") from None

    def __contains__(self, name):
        return name in self._index

    def __len__(self):
        return len(self.segments)

    def __eq__(self, other):
        return isinstance(other, ParamLayout) and self.segments == other.segments

    def __hash__(self):
        return hash(self.segments)

    def unflatten(self, flat):
        """
        Split a flat vector into named, reshaped blocks

        Works on numpy arrays and on traced jax arrays alike.
        """
        return {
            segment.name: flat[segment.offset:segment.offset + segment.size].reshape(segment.shape)
            for segment in self.segments
        }

    def flatten(self, arrays):
        """Concatenate named blocks in layout order"""
        if not self.segments:
            return np.zeros(0)
        parts = []
        for segment in self.segments:
            block = np.asarray(arrays[segment.name], dtype=np.float64)
            if block.shape != segment.shape:
                raise StructuralError(
                    f"Segment {segment.name} has shape {block.shape}, expected {segment.shape}"
                )
            parts.append(block.reshape(-1))
        return np.concatenate(parts)


class ParamVector:
    """
    Flat float64 parameter values plus the segment table that names them.

    This is the optimizer's currency: training reads ``values``, computes a
    gradient of the same layout and writes back a new vector.
    """

    def __init__(self, layout, values):
        values = np.array(values, dtype=np.float64).reshape(-1)
        if values.size != layout.size:
            raise StructuralError(
                f"Parameter vector has {values.size} entries, layout expects {layout.size}"
            )
        self.layout = layout
        self.values = values

    @classmethod
    def from_arrays(cls, arrays):
        """Build from an ordered mapping of segment name to array"""
        layout = ParamLayout.from_shapes(
            (name, np.shape(array)) for name, array in arrays.items()
        )
        return cls(layout, layout.flatten(arrays))

    @classmethod
    def empty(cls):
        return cls(ParamLayout(), np.zeros(0))

    def __len__(self):
        return self.values.size

    def __repr__(self):
        return f"ParamVector(size={len(self)}, segments={self.layout.names})"

    def segment(self, name):
        seg = self.layout[name]
        return self.values[seg.offset:seg.offset + seg.size].reshape(seg.shape).copy()

    def as_tree(self):
        return {name: block.copy() for name, block in self.layout.unflatten(self.values).items()}

    def with_values(self, values):
        return ParamVector(self.layout, values)

    def replace_segment(self, name, value):
        seg = self.layout[name]
        value = np.asarray(value, dtype=np.float64)
        if value.shape != seg.shape:
            raise StructuralError(f"Segment {name} expects shape {seg.shape}, got {value.shape}")
        values = self.values.copy()
        values[seg.offset:seg.offset + seg.size] = value.reshape(-1)
        return ParamVector(self.layout, values)

    def copy(self):
        return ParamVector(self.layout, self.values.copy())


class ScalarExpr:
    """
    A scalar function of an input array and a parameter tree.

    Args:
        fn: Pure function ``fn(inputs, tree)`` returning a scalar; ``tree`` maps
            segment names of ``layout`` to arrays
        layout: Parameter layout the expression binds to (empty if none)
        input_dim: Expected trailing dimension of ``inputs``; None disables the
            check (e.g. when ``inputs`` is a tuple of batch arrays)
        name: Label used in error messages
    """

    def __init__(self, fn, layout=None, input_dim=None, name="expr"):
        self.fn = fn
        self.layout = layout if layout is not None else ParamLayout()
        self.input_dim = input_dim
        self.name = name

    def __repr__(self):
        return f"ScalarExpr({self.name!r}, input_dim={self.input_dim}, params={self.layout.size})"

    def _bound(self, inputs, theta):
        out = jnp.asarray(self.fn(inputs, self.layout.unflatten(theta)), dtype=jnp.float64)
        return jnp.reshape(out, ())

    @cached_property
    def _value(self):
        return jax.jit(self._bound)

    @cached_property
    def _grad_inputs(self):
        return jax.jit(jax.grad(self._bound, argnums=0))

    @cached_property
    def _grad_inputs_batched(self):
        return jax.jit(jax.vmap(jax.grad(self._bound, argnums=0), in_axes=(0, None)))

    @cached_property
    def _grad_theta(self):
        return jax.jit(jax.grad(self._bound, argnums=1))

    @cached_property
    def _value_and_grad_theta(self):
        return jax.jit(jax.value_and_grad(self._bound, argnums=1))

    def bind(self, inputs, params):
        """
        Validate and convert arguments

        Returns:
            Tuple (inputs, theta) ready for the compiled functions

        Raises:
            StructuralError: If the parameter layout or input dimension does not match
        """
        if params is None:
            params = ParamVector.empty()
        if params.layout != self.layout:
            raise StructuralError(
                f"{self.name}: parameter vector does not bind the expression's variable slots "
                f"(expected segments {self.layout.names}, got {params.layout.names})"
            )
        if self.input_dim is not None:
            inputs = np.asarray(inputs, dtype=np.float64)
            if inputs.ndim == 0 or inputs.shape[-1] != self.input_dim:
                raise StructuralError(
                    f"{self.name}: input has shape {inputs.shape}, expected trailing dimension "
                    f"{self.input_dim}"
                )
        return inputs, params.values


def eval_expr(expr, inputs, params=None):
    """
    Evaluate a scalar expression

    Args:
        expr: ScalarExpr
        inputs: Input array (or pytree when ``expr.input_dim`` is None)
        params: ParamVector bound to ``expr.layout`` (None for parameter-free expressions)

    Returns:
        float value
    """
    inputs, theta = expr.bind(inputs, params)
    return float(expr._value(inputs, theta))


def grad_input(expr, inputs, params=None):
    """Exact reverse-mode gradient with respect to the input vector"""
    inputs, theta = expr.bind(inputs, params)
    return np.asarray(expr._grad_inputs(inputs, theta))


def grad_params(expr, inputs, params=None):
    """Exact reverse-mode gradient with respect to every parameter slot"""
    inputs, theta = expr.bind(inputs, params)
    return ParamVector(expr.layout, np.asarray(expr._grad_theta(inputs, theta)))


def value_and_grad_params(expr, inputs, params=None):
    """
    Value and parameter gradient in one sweep

    Returns:
        Tuple (float value, ParamVector gradient)
    """
    inputs, theta = expr.bind(inputs, params)
    value, grad = expr._value_and_grad_theta(inputs, theta)
    return float(value), ParamVector(expr.layout, np.asarray(grad))


def hessian(expr, x, params=None, step=HESSIAN_STEP):
    """
    Hessian of a scalar expression with respect to its input vector

    Column j is the central difference (g(x + h e_j) - g(x - h e_j)) / 2h of
    the exact input gradient g; the result is symmetrized.

    Args:
        expr: ScalarExpr with a vector input
        x: Evaluation point (n,)
        params: ParamVector bound to ``expr.layout``
        step: Difference step h

    Returns:
        Symmetric (n, n) numpy array
    """
    x, theta = expr.bind(x, params)
    if x.ndim != 1:
        raise StructuralError(f"{expr.name}: Hessian needs a vector input, got shape {x.shape}")
    n = x.size
    offsets = step * np.eye(n)
    points = np.concatenate([x + offsets, x - offsets])
    grads = np.asarray(expr._grad_inputs_batched(points, theta))
    columns = (grads[:n] - grads[n:]) / (2.0 * step)
    # row j of `columns` holds the derivative of the gradient along e_j
    return 0.5 * (columns + columns.T)
