"""Tests for parameter layouts, scalar expressions and their derivatives"""

import jax
import jax.numpy as jnp
import numpy as np
import pytest

from sphs.core.autodiff import (
    ParamLayout,
    ParamVector,
    ScalarExpr,
    eval_expr,
    grad_input,
    grad_params,
    hessian,
    value_and_grad_params,
)
from sphs.core.errors import StructuralError
from sphs.core.nets import Ffnn, FfnnConfig
from sphs.utils.numerics import central_difference_gradient, relative_error


def _quadratic_form(A):
    params = ParamVector.from_arrays({"A": np.asarray(A, dtype=np.float64)})
    expr = ScalarExpr(lambda x, tree: x @ tree["A"] @ x, params.layout, input_dim=2, name="xAx")
    return expr, params


def _small_net(seed=0):
    net = Ffnn(FfnnConfig(input_dim=3, output_dim=1, widths=(8, 8)), prefix="net")
    params = ParamVector.from_arrays(net.init(np.random.default_rng(seed)))
    expr = ScalarExpr(lambda x, tree: net.apply(tree, x)[0], params.layout, input_dim=3, name="net")
    return expr, params


class TestParamLayout:
    """Test segment tables of flat parameter vectors"""

    def test_offsets_are_contiguous(self):
        """Offsets follow insertion order without gaps"""
        layout = ParamLayout.from_shapes([("a", (2, 3)), ("b", (4,)), ("c", ())])
        assert [s.offset for s in layout.segments] == [0, 6, 10]
        assert layout.size == 11

    def test_duplicate_names_rejected(self):
        """Two segments may not share a name"""
        with pytest.raises(StructuralError, match="Duplicate"):
            ParamLayout.from_shapes([("a", (1,)), ("a", (2,))])

    def test_unknown_segment(self):
        """Looking up a missing segment is a structural error"""
        layout = ParamLayout.from_shapes([("a", (1,))])
        with pytest.raises(StructuralError, match="Unknown parameter segment"):
            layout["b"]

    def test_unflatten_matches_flatten(self):
        """Blocks come back in the shapes they were stored with"""
        arrays = {"w": np.arange(6.0).reshape(2, 3), "b": np.array([7.0, 8.0])}
        vector = ParamVector.from_arrays(arrays)
        tree = vector.as_tree()
        np.testing.assert_array_equal(tree["w"], arrays["w"])
        np.testing.assert_array_equal(tree["b"], arrays["b"])

    def test_wrong_vector_length(self):
        """A vector must fill its layout exactly"""
        layout = ParamLayout.from_shapes([("a", (3,))])
        with pytest.raises(StructuralError, match="layout expects 3"):
            ParamVector(layout, np.zeros(4))

    def test_replace_segment_shape_checked(self):
        """Replacing a block with a different shape fails"""
        vector = ParamVector.from_arrays({"a": np.zeros(3)})
        with pytest.raises(StructuralError):
            vector.replace_segment("a", np.zeros(2))


class TestEvaluation:
    """Test values and exact gradients"""

    def test_dot_product_value(self):
        """f(x) = x.x at (1, 2) is 5"""
        expr = ScalarExpr(lambda x, tree: x @ x, input_dim=2)
        assert eval_expr(expr, [1.0, 2.0]) == 5.0

    def test_softplus_at_zero(self):
        """softplus(0) = ln 2"""
        expr = ScalarExpr(lambda x, tree: jax.nn.softplus(x[0]), input_dim=1)
        assert eval_expr(expr, [0.0]) == pytest.approx(np.log(2.0), abs=1e-15)

    def test_constant_expression(self):
        """A constant has value 3.5 and zero gradient"""
        expr = ScalarExpr(lambda x, tree: 3.5 + 0.0 * jnp.sum(x), input_dim=2)
        assert eval_expr(expr, [4.0, -1.0]) == 3.5
        np.testing.assert_array_equal(grad_input(expr, [4.0, -1.0]), [0.0, 0.0])

    def test_dot_product_gradient(self):
        """grad of x.x at (1, 2) is (2, 4)"""
        expr = ScalarExpr(lambda x, tree: x @ x, input_dim=2)
        np.testing.assert_allclose(grad_input(expr, [1.0, 2.0]), [2.0, 4.0])

    def test_affine_neuron_parameter_gradient(self):
        """d/dw (w.x + b - y)² = 2 (w.x + b - y) x"""
        x = np.array([0.3, -1.2])
        y = 0.7
        params = ParamVector.from_arrays({"w": np.array([1.5, 0.5]), "b": np.array(0.2)})
        expr = ScalarExpr(lambda v, tree: (tree["w"] @ v + tree["b"] - y) ** 2, params.layout, input_dim=2)
        residual = 1.5 * 0.3 + 0.5 * -1.2 + 0.2 - y
        grad = grad_params(expr, x, params)
        np.testing.assert_allclose(grad.segment("w"), 2.0 * residual * x, rtol=1e-14)
        assert float(grad.segment("b")) == pytest.approx(2.0 * residual, rel=1e-14)

    def test_unused_segment_has_zero_gradient(self):
        """A loss independent of a segment leaves its gradient at zero"""
        params = ParamVector.from_arrays({"used": np.ones(2), "unused": np.ones(3)})
        expr = ScalarExpr(lambda x, tree: jnp.sum(tree["used"] * x), params.layout, input_dim=2)
        np.testing.assert_array_equal(grad_params(expr, [1.0, 2.0], params).segment("unused"), np.zeros(3))

    def test_value_and_grad_agree(self):
        """The fused sweep equals separate value and gradient calls"""
        expr, params = _small_net()
        x = np.array([0.1, -0.4, 0.9])
        value, grad = value_and_grad_params(expr, x, params)
        assert value == eval_expr(expr, x, params)
        np.testing.assert_allclose(grad.values, grad_params(expr, x, params).values, rtol=1e-14)

    def test_wrong_layout_rejected(self):
        """Parameters must bind the expression's own layout"""
        expr, _ = _small_net()
        with pytest.raises(StructuralError, match="does not bind"):
            eval_expr(expr, np.zeros(3), ParamVector.from_arrays({"other": np.zeros(2)}))

    def test_wrong_input_dimension(self):
        """Input length is checked against input_dim"""
        expr, params = _small_net()
        with pytest.raises(StructuralError, match="trailing dimension 3"):
            eval_expr(expr, np.zeros(2), params)


class TestFiniteDifferenceAgreement:
    """Reverse-mode gradients against central differences"""

    @pytest.mark.parametrize("seed", range(5))
    def test_input_gradient(self, seed):
        """Input gradients of a softplus network match central differences"""
        expr, params = _small_net(seed)
        rng = np.random.default_rng(seed)
        for _ in range(20):
            x = rng.normal(size=3)
            exact = grad_input(expr, x, params)
            approx = central_difference_gradient(lambda y: eval_expr(expr, y, params), x)
            assert np.max(relative_error(exact, approx, floor=1e-6)) <= 1e-5

    @pytest.mark.parametrize("seed", range(5))
    def test_parameter_gradient(self, seed):
        """Parameter gradients match central differences on random slots"""
        expr, params = _small_net(seed)
        rng = np.random.default_rng(100 + seed)
        x = rng.normal(size=3)
        exact = grad_params(expr, x, params).values
        for slot in rng.choice(len(params), size=20, replace=False):

            def f(value, slot=slot):
                values = params.values.copy()
                values[slot] = value[0]
                return eval_expr(expr, x, params.with_values(values))

            approx = central_difference_gradient(f, params.values[slot:slot + 1])[0]
            assert relative_error(exact[slot], approx, floor=1e-6) <= 1e-5


class TestHessian:
    """Test the finite-difference Hessian of the exact gradient"""

    def test_half_squared_norm(self):
        """Hessian of 1/2 |x|² is the identity"""
        expr = ScalarExpr(lambda x, tree: 0.5 * x @ x, input_dim=3)
        np.testing.assert_allclose(hessian(expr, np.array([0.3, -2.0, 1.0])), np.eye(3), atol=1e-9)

    def test_non_symmetric_quadratic_form(self):
        """x^T A x with A = [[1, 2], [0, 1]] has Hessian A + A^T"""
        expr, params = _quadratic_form([[1.0, 2.0], [0.0, 1.0]])
        np.testing.assert_allclose(hessian(expr, np.array([0.5, 0.5]), params), [[2.0, 2.0], [2.0, 2.0]], atol=1e-8)

    def test_symmetric_for_networks(self):
        """Hessians of random networks are symmetric"""
        expr, params = _small_net(3)
        H = hessian(expr, np.array([0.2, 0.1, -0.3]), params)
        assert np.max(np.abs(H - H.T)) <= 1e-8

    def test_needs_vector_input(self):
        """A batch of points is rejected"""
        expr = ScalarExpr(lambda x, tree: jnp.sum(x), input_dim=2)
        with pytest.raises(StructuralError, match="vector input"):
            hessian(expr, np.zeros((2, 2)))
