"""Tests for losses, ADAM and both fitting regimes"""

import numpy as np
import pytest

from sphs.calculators.generators import gen_linear_phs
from sphs.calculators.train import (
    AdamState,
    TrainConfig,
    _pair_arrays,
    _windows,
    adam_step,
    derivative_loss_expr,
    fit,
    fit_derivative,
    fit_trajectory,
    mse,
    trajectory_loss_expr,
    trajectory_windows,
)
from sphs.core.autodiff import ParamVector, eval_expr, grad_params
from sphs.core.errors import ConfigurationError, DataError, DivergenceError, StructuralError
from sphs.io.trajectory import DerivativePairs, Trajectory
from sphs.models.phs import ModelSpec, build_model
from sphs.utils.numerics import relative_error


def small_model(kind="sphnn", state_dim=2, input_dim=1, seed=0):
    return build_model(ModelSpec(kind=kind, state_dim=state_dim, input_dim=input_dim, widths=(8,), seed=seed))


def assert_gradient_matches(expr, batch, params, count=10, step=1e-5, tolerance=1e-4):
    """Compare the autodiff gradient with central differences on random slots"""
    exact = grad_params(expr, batch, params).values
    rng = np.random.default_rng(0)
    for slot in rng.choice(len(params), size=count, replace=False):
        up = params.values.copy()
        down = params.values.copy()
        up[slot] += step
        down[slot] -= step
        approx = (
            eval_expr(expr, batch, params.with_values(up)) - eval_expr(expr, batch, params.with_values(down))
        ) / (2.0 * step)
        assert relative_error(exact[slot], approx, floor=1e-4) <= tolerance, f"slot {slot}"


class TestMse:
    """Test the mean squared error"""

    def test_value(self):
        """Mean over every entry"""
        assert mse([[1.0, 2.0], [3.0, 4.0]], [[0.0, 0.0], [3.0, 2.0]]) == pytest.approx(9.0 / 4.0)

    def test_selected_dims(self):
        """Only the listed columns are compared"""
        assert mse([[1.0, 5.0]], [[0.0, 0.0]], dims=[0]) == 1.0

    def test_shape_mismatch(self):
        """Shapes must agree"""
        with pytest.raises(StructuralError):
            mse(np.zeros((2, 2)), np.zeros((2, 3)))


class TestAdam:
    """Test the ADAM update"""

    def test_first_step_magnitude(self):
        """The first bias-corrected step moves every slot by about -lr sign(g)"""
        params = ParamVector.from_arrays({"w": np.array([1.0, -2.0, 0.5])})
        new, state = adam_step(params, np.array([0.3, -4.0, 1e-3]), AdamState.zeros(3), lr=0.01)
        np.testing.assert_allclose(new.values - params.values, [-0.01, 0.01, -0.01], rtol=1e-4)
        assert state.t == 1

    def test_zero_gradient(self):
        """A zero gradient leaves parameters unchanged"""
        params = ParamVector.from_arrays({"w": np.array([1.0, 2.0])})
        new, _ = adam_step(params, np.zeros(2), AdamState.zeros(2), lr=0.1)
        np.testing.assert_array_equal(new.values, params.values)

    def test_state_not_mutated(self):
        """The incoming state is left untouched"""
        params = ParamVector.from_arrays({"w": np.zeros(2)})
        state = AdamState.zeros(2)
        adam_step(params, np.ones(2), state, lr=0.1)
        assert state.t == 0
        np.testing.assert_array_equal(state.m, 0.0)

    def test_length_mismatch(self):
        """Gradient and parameters must have equal length"""
        params = ParamVector.from_arrays({"w": np.zeros(2)})
        with pytest.raises(StructuralError):
            adam_step(params, np.zeros(3), AdamState.zeros(2), lr=0.1)


class TestTrainConfig:
    """Test training configuration"""

    def test_defaults(self):
        """Derivative regime with minibatches of 128"""
        cfg = TrainConfig()
        assert cfg.regime == "derivative"
        assert cfg.batch_size == 128

    def test_invalid_values(self):
        """Invalid settings are rejected"""
        for bad in ({"regime": "hybrid"}, {"learning_rate": 0.0}, {"rollout_length": 1}, {"substeps": 0}):
            with pytest.raises(ConfigurationError):
                TrainConfig(**bad)

    def test_unknown_key(self):
        """Unknown keys are rejected"""
        with pytest.raises(ConfigurationError, match="Unknown training keys"):
            TrainConfig.from_dict({"epochs": 3})

    def test_observed_indices(self):
        """Augmented states are excluded from the comparison"""
        assert TrainConfig(augmented_dims=2).observed_indices(5) == (0, 1, 2)
        assert TrainConfig(observed_dims=[2]).observed_indices(3) == (2,)
        with pytest.raises(ConfigurationError):
            TrainConfig(observed_dims=[3]).observed_indices(3)

    def test_constant_learning_rate(self):
        """Without a final rate every step uses learning_rate"""
        cfg = TrainConfig(steps=10, learning_rate=1e-3)
        assert cfg.learning_rate_at(0) == cfg.learning_rate_at(9) == 1e-3

    def test_geometric_decay(self):
        """The step size decays geometrically from the first to the last step"""
        cfg = TrainConfig(steps=11, learning_rate=1e-3, final_learning_rate=1e-5)
        assert cfg.learning_rate_at(0) == pytest.approx(1e-3)
        assert cfg.learning_rate_at(5) == pytest.approx(1e-4)
        assert cfg.learning_rate_at(10) == pytest.approx(1e-5)

    def test_final_rate_above_initial(self):
        """The final rate cannot exceed the initial one"""
        with pytest.raises(ConfigurationError, match="Final learning rate"):
            TrainConfig(learning_rate=1e-3, final_learning_rate=1e-2)
        with pytest.raises(ConfigurationError, match="Final learning rate"):
            TrainConfig(final_learning_rate=0.0)


class TestWindows:
    """Test trajectory window tiling"""

    def test_exact_tiling(self):
        """Consecutive windows share their boundary sample"""
        assert _windows(9, 5) == [0, 4]

    def test_tail_window(self):
        """A final window is anchored at the end when the tiling falls short"""
        assert _windows(10, 5) == [0, 4, 5]

    def test_whole_trajectory(self):
        """A rollout as long as the trajectory gives one window"""
        assert _windows(7, 7) == [0]
        assert _windows(7, 20) == [0]

    def test_stacked_windows(self, linear_dataset):
        """Every window has the configured length and starts from the data"""
        model = small_model()
        x0, inputs, targets, owners, h = trajectory_windows(
            model, linear_dataset, TrainConfig(regime="trajectory", rollout_length=11, substeps=2)
        )
        assert targets.shape[1:] == (11, 2)
        assert inputs.shape[1:] == (10, 2, 3, 1)
        assert h == pytest.approx(0.05)
        np.testing.assert_array_equal(x0, targets[:, 0])
        assert owners[0] == 0 and owners[-1] == 1

    def test_augmented_states_start_at_zero(self, linear_dataset):
        """Augmented initial states are zero"""
        model = small_model(state_dim=3)
        x0, _, targets, _, _ = trajectory_windows(
            model, linear_dataset, TrainConfig(regime="trajectory", rollout_length=5, augmented_dims=1)
        )
        np.testing.assert_array_equal(x0[:, 2], 0.0)
        np.testing.assert_array_equal(x0[:, :2], targets[:, 0])

    def test_rollout_longer_than_data(self, linear_dataset):
        """Windows cannot exceed the shortest trajectory"""
        with pytest.raises(DataError, match="exceeds the shortest"):
            trajectory_windows(small_model(), linear_dataset, TrainConfig(regime="trajectory", rollout_length=500))

    def test_missing_inputs(self):
        """A forced model needs input columns in the data"""
        traj = Trajectory(np.arange(5) * 0.1, np.zeros((5, 2)))
        with pytest.raises(DataError, match="input channels"):
            trajectory_windows(small_model(), [traj], TrainConfig(regime="trajectory"))

    def test_shifted_start_times(self, linear_dataset):
        """Trajectories with the same interval but different start times are accepted"""
        first, second = linear_dataset
        shifted = Trajectory(second.times + 0.3, second.states, second.inputs, second.derivatives)
        _, _, targets, owners, h = trajectory_windows(
            small_model(), [first, shifted], TrainConfig(regime="trajectory", rollout_length=11)
        )
        assert h == pytest.approx(0.1)
        assert set(owners) == {0, 1}
        np.testing.assert_array_equal(targets[owners.index(1)], second.states[:11])

    def test_different_intervals(self, linear_dataset):
        """Trajectories sampled at different intervals are rejected"""
        second = linear_dataset[1]
        coarse = Trajectory(second.times * 2.0, second.states, second.inputs)
        with pytest.raises(DataError, match="sharing one interval"):
            trajectory_windows(small_model(), [linear_dataset[0], coarse], TrainConfig(regime="trajectory"))

    def test_no_trajectories(self):
        """An empty trajectory list is a data error"""
        with pytest.raises(DataError, match="at least one trajectory"):
            fit_trajectory(small_model(), [], TrainConfig(regime="trajectory"))


class TestFitDerivative:
    """Test derivative fitting"""

    def test_loss_decreases(self, linear_dataset):
        """Fitting the linear system lowers the loss"""
        model = small_model()
        pairs = DerivativePairs.from_trajectories(linear_dataset)
        history = fit_derivative(model, pairs, TrainConfig(steps=200, learning_rate=1e-2, batch_size=32))
        assert len(history) == 200
        assert np.mean(history.losses[-20:]) < 0.5 * np.mean(history.losses[:20])
        np.testing.assert_array_equal(history.final_params.values, model.params.values)

    def test_gradient_matches_finite_differences(self, linear_dataset):
        """The batch-loss gradient agrees with central differences"""
        model = small_model(seed=2)
        states, inputs, targets = _pair_arrays(model, DerivativePairs.from_trajectories(linear_dataset))
        expr = derivative_loss_expr(model)
        assert_gradient_matches(expr, (states[:32], inputs[:32], targets[:32]), model.params)

    def test_unforced_batch_gradient(self, random_sphnn, rng):
        """Without inputs the batch carries an empty input column block"""
        pairs = DerivativePairs(rng.normal(size=(16, 3)), rng.normal(size=(16, 3)), None)
        batch = _pair_arrays(random_sphnn, pairs)
        assert batch[1].shape == (16, 0)
        assert_gradient_matches(derivative_loss_expr(random_sphnn), batch, random_sphnn.params)

    def test_zero_steps(self, linear_dataset):
        """steps = 0 returns an empty history and leaves the model unchanged"""
        model = small_model()
        before = model.params.values.copy()
        history = fit(model, DerivativePairs.from_trajectories(linear_dataset), TrainConfig(steps=0))
        assert len(history) == 0
        np.testing.assert_array_equal(model.params.values, before)

    def test_reproducible(self, linear_dataset):
        """Same seeds give bit-identical parameters"""
        pairs = DerivativePairs.from_trajectories(linear_dataset)
        results = []
        for _ in range(2):
            model = small_model(seed=4)
            fit_derivative(model, pairs, TrainConfig(steps=30, batch_size=16, seed=2))
            results.append(model.params.values)
        np.testing.assert_array_equal(results[0], results[1])

    def test_augmented_not_applicable(self, linear_dataset):
        """Derivative fitting rejects augmented states"""
        with pytest.raises(ConfigurationError, match="augmented"):
            fit_derivative(
                small_model(), DerivativePairs.from_trajectories(linear_dataset), TrainConfig(augmented_dims=1)
            )

    def test_non_finite_target(self):
        """An infinite derivative diverges at step 0"""
        pairs = DerivativePairs(np.zeros((4, 2)), np.array([[np.inf, 0.0]] * 4), np.zeros((4, 1)))
        with pytest.raises(DivergenceError) as info:
            fit_derivative(small_model(), pairs, TrainConfig(steps=5))
        assert info.value.step == 0

    def test_node_baseline_trains(self, linear_dataset):
        """The NODE baseline uses the same loop"""
        model = small_model(kind="node")
        history = fit_derivative(model, DerivativePairs.from_trajectories(linear_dataset), TrainConfig(steps=20))
        assert np.all(np.isfinite(history.losses))


class TestFitTrajectory:
    """Test trajectory fitting"""

    def test_loss_decreases(self, linear_dataset):
        """Rollout fitting lowers the loss"""
        model = small_model()
        cfg = TrainConfig(regime="trajectory", steps=60, learning_rate=1e-2, rollout_length=11)
        history = fit_trajectory(model, linear_dataset, cfg)
        assert len(history) == 60
        assert history.losses[-1] < history.losses[0]

    def test_divergence_names_trajectory(self, linear_dataset):
        """A huge trajectory diverges and is reported by index"""
        blown = Trajectory(
            linear_dataset[0].times, 1e200 * np.ones_like(linear_dataset[0].states), linear_dataset[0].inputs
        )
        cfg = TrainConfig(regime="trajectory", steps=3, rollout_length=5)
        with np.errstate(over="ignore", invalid="ignore"):
            with pytest.raises(DivergenceError) as info:
                fit_trajectory(small_model(), [linear_dataset[1], blown], cfg)
        assert info.value.step == 0
        assert info.value.trajectory == 1

    def test_gradient_matches_finite_differences(self, linear_dataset):
        """The rollout gradient agrees with central differences of the rollout loss"""
        model = small_model(seed=3)
        cfg = TrainConfig(regime="trajectory", rollout_length=6, substeps=2)
        x0, inputs, targets, _, h = trajectory_windows(model, linear_dataset, cfg)
        expr = trajectory_loss_expr(model, cfg.observed_indices(2), h)
        assert_gradient_matches(expr, (x0[:3], inputs[:3], targets[:3]), model.params)

    def test_long_rollout_gradient(self):
        """The gradient of a 50-step rollout agrees with central differences"""
        model = small_model(seed=5)
        data = gen_linear_phs(n_traj=1, duration=6.0, dt=0.1, seed=7)
        cfg = TrainConfig(regime="trajectory", rollout_length=51)
        x0, inputs, targets, _, h = trajectory_windows(model, data, cfg)
        assert targets.shape[1] == 51
        expr = trajectory_loss_expr(model, cfg.observed_indices(2), h)
        assert_gradient_matches(expr, (x0[:1], inputs[:1], targets[:1]), model.params)
