"""Tests for reference dynamics and synthetic data generators"""

import numpy as np
import pytest

from sphs.calculators.generators import gen_linear_phs, gen_spinning_body, sample_times, square_wave
from sphs.calculators.ode import signal_eval
from sphs.core.equations import euler_rhs, linear_phs_matrices, linear_rhs, rigid_energy
from sphs.core.errors import ConfigurationError, StructuralError


class TestEulerRhs:
    """Test the damped rigid-body equations"""

    def test_gyroscopic_term(self):
        """ω = (0, 1, 1), I = diag(1, 2, 3), μ = 0 gives ω' = (-1, 0, 0)"""
        np.testing.assert_allclose(euler_rhs([0.0, 1.0, 1.0], mu=0.0), [-1.0, 0.0, 0.0], atol=1e-15)

    def test_pure_damping(self):
        """ω = (1, 0, 0) with μ = 0.01 gives ω' = (-0.01, 0, 0)"""
        np.testing.assert_allclose(euler_rhs([1.0, 0.0, 0.0], mu=0.01), [-0.01, 0.0, 0.0], atol=1e-15)

    def test_inertia_matrix_accepted(self):
        """A diagonal inertia matrix works like its principal moments"""
        omega = [0.3, -0.2, 0.7]
        np.testing.assert_array_equal(euler_rhs(omega, np.diag([1.0, 2.0, 3.0])), euler_rhs(omega))

    def test_invalid_inertia(self):
        """Moments must be three positive numbers"""
        with pytest.raises(ConfigurationError):
            euler_rhs([1.0, 0.0, 0.0], inertia=(1.0, 0.0, 3.0))
        with pytest.raises(StructuralError):
            euler_rhs([1.0, 0.0, 0.0], inertia=(1.0, 2.0))

    def test_negative_damping(self):
        """μ must be non-negative"""
        with pytest.raises(ConfigurationError, match="Damping"):
            euler_rhs([1.0, 0.0, 0.0], mu=-0.1)


class TestRigidEnergy:
    """Test the kinetic energy"""

    def test_value(self):
        """ω = (1, 1, 1) with I = diag(1, 2, 3) gives 3"""
        assert rigid_energy([1.0, 1.0, 1.0]) == pytest.approx(3.0)

    def test_batch(self):
        """Rows of a batch are evaluated independently"""
        np.testing.assert_allclose(rigid_energy([[1.0, 0.0, 0.0], [0.0, 0.0, 2.0]]), [0.5, 6.0])

    def test_dissipation(self):
        """Energy decreases along the damped flow"""
        omega = np.array([0.4, 0.5, 0.6])
        rate = np.array([1.0, 2.0, 3.0]) * omega @ euler_rhs(omega, mu=0.05)
        assert rate == pytest.approx(-0.05 * omega @ omega)


class TestLinearSystem:
    """Test the linear port-Hamiltonian reference"""

    def test_matrices(self):
        """A = J - R, B = (0, 1)^T"""
        A, B = linear_phs_matrices(0.2)
        np.testing.assert_allclose(A, [[-0.2, -1.0], [1.0, -0.2]])
        np.testing.assert_array_equal(B, [[0.0], [1.0]])

    def test_rhs(self):
        """x' = A x + B u"""
        A, B = linear_phs_matrices()
        np.testing.assert_allclose(linear_rhs([1.0, 0.0], [2.0], A, B), [-0.1, 3.0])
        np.testing.assert_allclose(linear_rhs([1.0, 0.0], [], A, B), [-0.1, 1.0])


class TestSampling:
    """Test time grids and square waves"""

    def test_sample_times(self):
        """duration 1, dt 0.25 gives five samples"""
        np.testing.assert_allclose(sample_times(1.0, 0.25), [0.0, 0.25, 0.5, 0.75, 1.0])
        assert sample_times(50.0, 0.1).size == 501

    def test_invalid_grid(self):
        """dt must be positive"""
        with pytest.raises(ConfigurationError):
            sample_times(1.0, 0.0)

    def test_square_wave_levels(self):
        """Levels alternate every half period"""
        u = square_wave(period=2.0, amplitude=0.5, duration=4.0)
        values = [signal_eval(u, t)[0] for t in (0.0, 0.5, 1.0, 1.5, 2.5, 3.5)]
        assert values == [0.5, 0.5, -0.5, -0.5, 0.5, -0.5]

    def test_square_wave_phase(self):
        """A half-period phase starts on the negative level"""
        u = square_wave(period=2.0, amplitude=1.0, duration=4.0, phase=1.0)
        assert signal_eval(u, 0.2)[0] == -1.0


class TestGenerators:
    """Test synthetic trajectory generation"""

    def test_spinning_body_shapes(self):
        """n_traj trajectories of floor(T / dt) + 1 samples"""
        data = gen_spinning_body(n_traj=3, duration=2.0, dt=0.1, seed=0)
        assert len(data) == 3
        for traj in data:
            assert traj.states.shape == (21, 3)
            assert traj.inputs is None
            assert traj.derivatives.shape == (21, 3)

    def test_initial_conditions_in_unit_cube(self):
        """ω(0) is drawn from U[0, 1]³"""
        for traj in gen_spinning_body(n_traj=5, duration=0.5, dt=0.1, seed=7):
            assert np.all((traj.states[0] >= 0.0) & (traj.states[0] <= 1.0))

    def test_seed_determinism(self):
        """Equal seeds give identical data, different seeds differ"""
        a = gen_spinning_body(n_traj=2, duration=1.0, seed=5)
        b = gen_spinning_body(n_traj=2, duration=1.0, seed=5)
        c = gen_spinning_body(n_traj=2, duration=1.0, seed=6)
        np.testing.assert_array_equal(a[1].states, b[1].states)
        assert not np.array_equal(a[0].states, c[0].states)

    def test_undamped_energy_conserved(self):
        """μ = 0 keeps the kinetic energy of every trajectory"""
        for traj in gen_spinning_body(mu=0.0, n_traj=2, duration=20.0, seed=1):
            energy = rigid_energy(traj.states)
            assert np.max(np.abs(energy - energy[0])) <= 1e-8 * energy[0]

    def test_derivatives_match_dynamics(self):
        """Stored derivatives are the exact right-hand side"""
        traj = gen_spinning_body(n_traj=1, duration=1.0, seed=2)[0]
        np.testing.assert_array_equal(traj.derivatives[4], euler_rhs(traj.states[4]))

    def test_linear_phs(self):
        """Forced linear trajectories carry a square-wave input and exact derivatives"""
        data = gen_linear_phs(n_traj=3, duration=8.0, dt=0.1, seed=2)
        A, B = linear_phs_matrices()
        for traj in data:
            assert traj.states.shape == (81, 2)
            assert traj.inputs.shape == (81, 1)
            assert set(np.unique(traj.inputs)) <= {-0.5, 0.5}
            np.testing.assert_allclose(traj.derivatives[10], linear_rhs(traj.states[10], traj.inputs[10], A, B))
