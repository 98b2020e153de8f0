"""Tests for the RK4 and Tsit5 integrators and input signals"""

import warnings

import jax.numpy as jnp
import numpy as np
import pytest

from sphs.calculators.generators import square_wave
from sphs.calculators.ode import (
    InputSignal,
    IntegrationConfig,
    integrate,
    rk4_rollout,
    rk4_step,
    signal_eval,
    stage_inputs,
)
from sphs.core.equations import euler_rhs, linear_phs_matrices, rigid_energy
from sphs.core.errors import ConfigurationError, DivergenceError


def decay(x, u):
    return -x


def oscillator(x, u):
    return np.array([x[1], -x[0]])


class TestSignalEval:
    """Test input interpolation"""

    def test_linear_interpolation(self):
        """Linear mode interpolates between samples"""
        u = InputSignal([0.0, 1.0, 2.0], [0.0, 2.0, 0.0])
        np.testing.assert_allclose(signal_eval(u, 0.5), [1.0])
        np.testing.assert_allclose(signal_eval(u, 1.5), [1.0])

    def test_clamped_outside(self):
        """Values outside the sampled range are held"""
        u = InputSignal([0.0, 1.0], [3.0, 4.0])
        np.testing.assert_array_equal(signal_eval(u, -1.0), [3.0])
        np.testing.assert_array_equal(signal_eval(u, 5.0), [4.0])

    def test_zero_order_hold_sides(self):
        """At a switching time the right value is the new level and the left value the old one"""
        u = InputSignal([0.0, 1.0, 2.0], [1.0, -1.0, 1.0], mode="zero_order_hold")
        np.testing.assert_array_equal(signal_eval(u, 1.0), [-1.0])
        np.testing.assert_array_equal(signal_eval(u, 1.0, side="left"), [1.0])
        np.testing.assert_array_equal(signal_eval(u, 0.4), [1.0])

    def test_no_signal(self):
        """An unforced system has an empty input"""
        assert signal_eval(None, 1.0).shape == (0,)

    def test_rejects_non_increasing_times(self):
        """Sample times must increase strictly"""
        with pytest.raises(ConfigurationError):
            InputSignal([0.0, 0.0, 1.0], [1.0, 2.0, 3.0])

    def test_unknown_mode(self):
        """Only linear and zero_order_hold are accepted"""
        with pytest.raises(ConfigurationError, match="interpolation"):
            InputSignal([0.0, 1.0], [1.0, 2.0], mode="cubic")


class TestIntegrationConfig:
    """Test solver configuration"""

    def test_defaults(self):
        """Tsit5 at rtol 1e-6 and atol 1e-8"""
        cfg = IntegrationConfig()
        assert (cfg.method, cfg.rtol, cfg.atol) == ("tsit5_adaptive", 1e-6, 1e-8)

    def test_unknown_key(self):
        """Unknown keys are rejected"""
        with pytest.raises(ConfigurationError, match="Unknown integration keys"):
            IntegrationConfig.from_dict({"method": "rk4_fixed", "order": 4})

    def test_invalid_values(self):
        """Non-positive tolerances and steps are rejected"""
        with pytest.raises(ConfigurationError):
            IntegrationConfig(rtol=0.0)
        with pytest.raises(ConfigurationError):
            IntegrationConfig(method="rk4_fixed", step=-0.1)
        with pytest.raises(ConfigurationError):
            IntegrationConfig(method="euler")


class TestRk4:
    """Test the fixed-step integrator"""

    def test_single_step_decay(self):
        """x' = -x, x0 = 1, h = 0.1 gives 0.9048375"""
        assert rk4_step(decay, 0.0, np.array([1.0]), 0.1)[0] == pytest.approx(0.9048375, abs=1e-12)

    def test_zero_field(self):
        """f = 0 leaves the state unchanged"""
        x = np.array([0.3, -2.0])
        np.testing.assert_array_equal(rk4_step(lambda x, u: np.zeros(2), 0.0, x, 0.5), x)

    def test_constant_rate(self):
        """f = c advances by c h exactly"""
        x = rk4_step(lambda x, u: np.array([2.0, -1.0]), 0.0, np.zeros(2), 0.25)
        np.testing.assert_allclose(x, [0.5, -0.25], rtol=1e-15)

    def test_fourth_order_convergence(self):
        """Halving h divides the global error by about 16"""
        errors = []
        for step in (0.1, 0.05):
            cfg = IntegrationConfig(method="rk4_fixed", step=step)
            traj = integrate(decay, [1.0], [0.0, 1.0], cfg=cfg)
            errors.append(abs(traj.states[-1, 0] - np.exp(-1.0)))
        assert 14.0 <= errors[0] / errors[1] <= 18.0

    def test_step_must_divide_spacing(self):
        """Output spacing must be a whole number of fixed steps"""
        cfg = IntegrationConfig(method="rk4_fixed", step=0.3)
        with pytest.raises(ConfigurationError, match="integer multiple"):
            integrate(decay, [1.0], [0.0, 1.0], cfg=cfg)

    def test_non_positive_step(self):
        """rk4_step needs h > 0"""
        with pytest.raises(ConfigurationError):
            rk4_step(decay, 0.0, np.array([1.0]), 0.0)

    def test_blow_up(self):
        """x' = x² from x0 = 1 is non-finite before t = 2"""
        cfg = IntegrationConfig(method="rk4_fixed", step=0.1)
        with np.errstate(over="ignore", invalid="ignore"):
            with pytest.raises(DivergenceError):
                integrate(lambda x, u: x * x, [1.0], np.linspace(0.0, 2.0, 21), cfg=cfg)

    def test_rollout_matches_host_path(self):
        """The traced rollout reproduces the numpy integrator"""
        A, B = linear_phs_matrices()
        times = np.linspace(0.0, 3.0, 31)
        u = InputSignal(times, np.sin(times))
        x0 = np.array([0.5, -0.2])
        host = integrate(
            lambda x, v: A @ x + B @ v, x0, times, u, IntegrationConfig(method="rk4_fixed", step=0.05)
        )
        inputs = stage_inputs(u, 0.0, 0.1, 30, 2, 1)
        A_j, B_j = jnp.asarray(A), jnp.asarray(B)
        traced = rk4_rollout(lambda x, v: A_j @ x + B_j @ v, jnp.asarray(x0), 0.05, jnp.asarray(inputs))
        np.testing.assert_allclose(np.asarray(traced), host.states, atol=1e-12)


class TestTsit5:
    """Test the adaptive integrator"""

    def test_harmonic_oscillator_closes(self):
        """One period of x'' = -x returns to the start"""
        cfg = IntegrationConfig(rtol=1e-8, atol=1e-10)
        traj = integrate(oscillator, [1.0, 0.0], [0.0, np.pi, 2.0 * np.pi], cfg=cfg)
        np.testing.assert_allclose(traj.states[-1], [1.0, 0.0], atol=1e-7)
        np.testing.assert_allclose(traj.states[1], [-1.0, 0.0], atol=1e-7)

    def test_exact_output_times(self):
        """Samples are returned at exactly the requested times"""
        t_eval = np.array([0.0, 0.013, 0.5, 1.7, 3.14159])
        traj = integrate(decay, [1.0], t_eval)
        np.testing.assert_array_equal(traj.times, t_eval)
        np.testing.assert_allclose(traj.states[:, 0], np.exp(-t_eval), rtol=1e-5)

    def test_single_output_time(self):
        """A single time returns the initial state"""
        traj = integrate(decay, [2.0], [0.0])
        np.testing.assert_array_equal(traj.states, [[2.0]])

    def test_rigid_body_energy_conserved(self):
        """The undamped spinning body keeps its kinetic energy"""
        cfg = IntegrationConfig(rtol=1e-9, atol=1e-11)
        traj = integrate(
            lambda w, u: euler_rhs(w, mu=0.0), [0.3, 0.9, 0.1], np.linspace(0.0, 50.0, 501), cfg=cfg
        )
        energy = rigid_energy(traj.states)
        assert np.max(np.abs(energy - energy[0])) / energy[0] <= 1e-6

    def test_square_wave_input(self):
        """x' = u under a unit square wave of period 2 is a triangle wave"""
        u = square_wave(period=2.0, amplitude=1.0, duration=4.0)
        t_eval = np.arange(0.0, 4.01, 0.5)
        traj = integrate(lambda x, v: v.copy(), [0.0], t_eval, u)
        expected = [0.0, 0.5, 1.0, 0.5, 0.0, 0.5, 1.0, 0.5, 0.0]
        np.testing.assert_allclose(traj.states[:, 0], expected, atol=1e-9)
        np.testing.assert_array_equal(traj.inputs[:3, 0], [1.0, 1.0, -1.0])

    def test_non_increasing_times(self):
        """t_eval must increase strictly"""
        with pytest.raises(ConfigurationError, match="strictly increasing"):
            integrate(decay, [1.0], [0.0, 1.0, 1.0])

    def test_finite_time_blow_up(self):
        """x' = x² from x0 = 1 cannot be integrated past t = 1"""
        with np.errstate(over="ignore", invalid="ignore"):
            with pytest.raises(DivergenceError):
                integrate(lambda x, u: x * x, [1.0], [0.0, 2.0])

    def test_minimum_factor_warns(self):
        """An oversized first step on a stiff decay clamps the controller and warns"""
        cfg = IntegrationConfig(first_step=1.0)
        with pytest.warns(UserWarning, match="minimum factor"):
            traj = integrate(lambda x, u: -50.0 * x, [1.0], [0.0, 1.0], cfg=cfg)
        assert abs(traj.states[-1, 0]) <= 1e-4

    def test_smooth_problem_does_not_warn(self):
        """A well-resolved problem integrates without controller warnings"""
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            integrate(decay, [1.0], [0.0, 1.0, 2.0])

    def test_max_steps(self):
        """Exceeding the step budget is a divergence"""
        cfg = IntegrationConfig(rtol=1e-10, atol=1e-12, max_steps=5)
        with pytest.raises(DivergenceError, match="max_steps"):
            integrate(oscillator, [1.0, 0.0], [0.0, 100.0], cfg=cfg)
