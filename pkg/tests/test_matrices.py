"""Tests for the J, R and G matrix parametrizations"""

import numpy as np
import pytest

from sphs.core.errors import ConfigurationError, StructuralError
from sphs.models.matrices import MatrixHead, skew_from_vec, spd_from_vec, symplectic_matrix
from sphs.utils.linalg import cholesky_succeeds, min_eigenvalue


class TestSkewFromVec:
    """Test skew-symmetric matrices from vectors"""

    def test_two_by_two(self):
        """n=2, v=(a) gives [[0, -a], [a, 0]]"""
        np.testing.assert_array_equal(np.asarray(skew_from_vec([2.5], 2)), [[0.0, -2.5], [2.5, 0.0]])

    def test_fill_convention(self):
        """n=3, v=(a, b, c) gives [[0, -a, -b], [a, 0, -c], [b, c, 0]]"""
        J = np.asarray(skew_from_vec([1.0, 2.0, 3.0], 3))
        np.testing.assert_array_equal(J, [[0.0, -1.0, -2.0], [1.0, 0.0, -3.0], [2.0, 3.0, 0.0]])

    def test_exactly_skew(self, rng):
        """J + J^T is exactly zero for random entries"""
        for n in (2, 4, 7):
            J = np.asarray(skew_from_vec(rng.normal(size=n * (n - 1) // 2), n))
            assert np.max(np.abs(J + J.T)) == 0.0

    def test_wrong_length(self):
        """Length must be n(n-1)/2"""
        with pytest.raises(StructuralError):
            skew_from_vec([1.0, 2.0], 3)


class TestSpdFromVec:
    """Test R = L L^T"""

    def test_zero_raw_strict(self):
        """All raw zero in strict mode: L = ln2 I, R = (ln 2)² I"""
        R = np.asarray(spd_from_vec(np.zeros(3), 2, "strict"))
        np.testing.assert_allclose(R, np.log(2.0) ** 2 * np.eye(2), rtol=1e-14)
        assert R[0, 0] == pytest.approx(0.480453, abs=1e-6)

    def test_identity_factor(self):
        """Semi mode with L = I gives R = I"""
        np.testing.assert_array_equal(np.asarray(spd_from_vec([1.0, 0.0, 1.0], 2, "semi")), np.eye(2))

    def test_random_strict_is_positive_definite(self, rng):
        """Strict mode passes Cholesky with eigenvalues >= 1e-12"""
        for n in (1, 3, 5):
            R = np.asarray(spd_from_vec(rng.normal(size=n * (n + 1) // 2), n, "strict"))
            assert cholesky_succeeds(R)
            assert min_eigenvalue(R) >= 1e-12

    def test_random_semi_is_positive_semidefinite(self, rng):
        """Semi mode never produces negative eigenvalues"""
        R = np.asarray(spd_from_vec(rng.normal(size=10), 4, "semi"))
        assert min_eigenvalue(R) >= -1e-12
        np.testing.assert_array_equal(R, R.T)

    def test_unknown_mode(self):
        """Only strict and semi are accepted"""
        with pytest.raises(ConfigurationError):
            spd_from_vec(np.zeros(3), 2, "definite")


class TestSymplectic:
    """Test the canonical symplectic matrix"""

    def test_block_structure(self):
        """[[0, -I], [I, 0]] for n = 4"""
        S = symplectic_matrix(4)
        np.testing.assert_array_equal(S[:2, 2:], -np.eye(2))
        np.testing.assert_array_equal(S[2:, :2], np.eye(2))
        np.testing.assert_array_equal(S + S.T, np.zeros((4, 4)))

    def test_odd_dimension(self):
        """Odd n is a configuration error"""
        with pytest.raises(ConfigurationError, match="even"):
            symplectic_matrix(3)


class TestMatrixHead:
    """Test matrix heads"""

    def test_g_without_inputs(self):
        """G needs mode zero when m = 0"""
        with pytest.raises(ConfigurationError, match="no inputs"):
            MatrixHead(role="G", mode="constant", state_dim=2, input_dim=0)

    def test_symplectic_only_for_j(self):
        """R cannot be fixed to the symplectic matrix"""
        with pytest.raises(ConfigurationError):
            MatrixHead(role="R", mode="fixed_symplectic", state_dim=2)

    def test_constant_head_segment(self):
        """A constant head stores one raw block"""
        head = MatrixHead(role="R", mode="constant", state_dim=3)
        assert head.shapes() == [("R.raw", (6,))]

    def test_state_dependent_j_is_skew(self, rng):
        """A state-dependent J stays skew-symmetric at every state"""
        head = MatrixHead(role="J", mode="state_dependent", state_dim=3, widths=(8,))
        tree = head.init(rng)
        for _ in range(5):
            J = np.asarray(head.build(tree, rng.normal(size=3)))
            assert np.max(np.abs(J + J.T)) == 0.0

    def test_zero_mode(self):
        """Zero mode has no parameters and builds a zero matrix"""
        head = MatrixHead(role="G", mode="zero", state_dim=2, input_dim=3)
        assert head.shapes() == []
        np.testing.assert_array_equal(np.asarray(head.build({}, np.zeros(2))), np.zeros((2, 3)))
