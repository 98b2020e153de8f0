"""
Training: MSE losses, ADAM, derivative fitting and trajectory fitting.

Derivative fitting regresses the model right-hand side on (x, x') pairs.
Trajectory fitting integrates the model with fixed-step RK4 from each
window's initial state and regresses the observed state components on the
data; gradients are those of the discrete rollout (discretize, then
differentiate).
"""

import logging
import time
from dataclasses import asdict, dataclass, field, fields

import jax
import jax.numpy as jnp
import numpy as np

from sphs.calculators.ode import INTERPOLATION_MODES, InputSignal, rk4_rollout, stage_inputs
from sphs.core.autodiff import ParamVector, ScalarExpr, value_and_grad_params
from sphs.core.errors import ConfigurationError, DataError, DivergenceError, StructuralError

logger = logging.getLogger(__name__)

REGIMES = ("derivative", "trajectory")


@dataclass(frozen=True)
class TrainConfig:
    """
    Optimization settings

    Args:
        regime: "derivative" or "trajectory"
        steps: Number of ADAM steps
        learning_rate: ADAM step size at the first step
        final_learning_rate: Step size at the last step, reached by geometric
            decay; None keeps the step size constant
        batch_size: Minibatch size of derivative fitting
        rollout_length: Samples per trajectory window (>= 2); None uses whole trajectories
        substeps: RK4 steps per sampling interval in trajectory fitting
        augmented_dims: n_A extra model states, started at zero
        observed_dims: Model state indices compared with the data; defaults to
            the first n - n_A
        interpolation: Input interpolation between samples
        seed: Minibatch shuffling seed
        beta1, beta2, eps: ADAM constants
        log_every: Loss logging period in steps
    """

    regime: str = "derivative"
    steps: int = 1000
    learning_rate: float = 1e-3
    final_learning_rate: float = None
    batch_size: int = 128
    rollout_length: int = None
    substeps: int = 1
    augmented_dims: int = 0
    observed_dims: tuple = None
    interpolation: str = "linear"
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    log_every: int = 1000

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ConfigurationError(f"Unknown training regime: {self.regime}. Choose from: {REGIMES}")
        if self.steps < 0:
            raise ConfigurationError(f"Training steps must be >= 0, got {self.steps}")
        if self.learning_rate <= 0:
            raise ConfigurationError(f"Learning rate must be > 0, got {self.learning_rate}")
        if self.final_learning_rate is not None and not 0 < self.final_learning_rate <= self.learning_rate:
            raise ConfigurationError(
                f"Final learning rate must lie in (0, {self.learning_rate}], got {self.final_learning_rate}"
            )
        if self.batch_size < 1:
            raise ConfigurationError(f"Batch size must be >= 1, got {self.batch_size}")
        if self.rollout_length is not None and self.rollout_length < 2:
            raise ConfigurationError(f"Rollout length must be >= 2 samples, got {self.rollout_length}")
        if self.substeps < 1:
            raise ConfigurationError(f"Substeps must be >= 1, got {self.substeps}")
        if self.augmented_dims < 0:
            raise ConfigurationError(f"Augmented dimensions must be >= 0, got {self.augmented_dims}")
        if self.interpolation not in INTERPOLATION_MODES:
            raise ConfigurationError(
                f"Unknown interpolation mode: {self.interpolation}. Choose from: {INTERPOLATION_MODES}"
            )
        if self.observed_dims is not None:
            object.__setattr__(self, "observed_dims", tuple(int(i) for i in self.observed_dims))

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"Unknown training keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self):
        data = asdict(self)
        if data["observed_dims"] is not None:
            data["observed_dims"] = list(data["observed_dims"])
        return data

    def learning_rate_at(self, step):
        """Step size of 0-based ``step``: lr * (lr_final / lr)^(step / (steps - 1))"""
        if self.final_learning_rate is None or self.steps < 2:
            return self.learning_rate
        ratio = self.final_learning_rate / self.learning_rate
        return self.learning_rate * ratio ** (step / (self.steps - 1))

    def observed_indices(self, state_dim):
        """Model state indices compared with data"""
        if self.observed_dims is None:
            observed = tuple(range(state_dim - self.augmented_dims))
        else:
            observed = self.observed_dims
        if not observed or any(i < 0 or i >= state_dim for i in observed):
            raise ConfigurationError(
                f"Observed dimensions {list(observed)} do not fit a model with {state_dim} states"
            )
        if len(set(observed)) != len(observed):
            raise ConfigurationError(f"Observed dimensions repeat: {list(observed)}")
        return observed


@dataclass
class TrainHistory:
    """Per-step loss and wall-clock time, plus the parameters after the last step"""

    losses: list = field(default_factory=list)
    step_times: list = field(default_factory=list)
    final_params: ParamVector = None

    def __len__(self):
        return len(self.losses)

    def record(self, loss, seconds):
        self.losses.append(float(loss))
        self.step_times.append(float(seconds))

    def rows(self):
        """(step, loss, seconds) rows, 1-based steps"""
        return [(i + 1, loss, dt) for i, (loss, dt) in enumerate(zip(self.losses, self.step_times))]


@dataclass
class AdamState:
    """First and second moment estimates and the step counter"""

    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, size):
        return cls(np.zeros(size), np.zeros(size), 0)


def mse(pred, target, dims=None):
    """
    Mean squared error over all entries

    Args:
        pred, target: Arrays of equal shape (..., n)
        dims: Optional indices of the last axis to compare

    Returns:
        float
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise StructuralError(f"Prediction {pred.shape} and target {target.shape} differ in shape")
    if dims is not None:
        pred = pred[..., list(dims)]
        target = target[..., list(dims)]
    diff = pred - target
    return float(np.mean(diff * diff))


def adam_step(params, grads, state, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """
    One bias-corrected ADAM update

    Args:
        params: ParamVector
        grads: ParamVector or array of the same length
        state: AdamState (not modified)
        lr: Learning rate

    Returns:
        Tuple (new ParamVector, new AdamState)
    """
    g = grads.values if isinstance(grads, ParamVector) else np.asarray(grads, dtype=np.float64)
    if g.shape != params.values.shape or state.m.shape != params.values.shape:
        raise StructuralError(
            f"ADAM needs matching lengths, got params {params.values.size}, grads {g.size}, "
            f"state {state.m.size}"
        )
    t = state.t + 1
    m = beta1 * state.m + (1.0 - beta1) * g
    v = beta2 * state.v + (1.0 - beta2) * (g * g)
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    values = params.values - lr * m_hat / (np.sqrt(v_hat) + eps)
    return params.with_values(values), AdamState(m, v, t)


def derivative_loss_expr(model):
    """Batch MSE of the right-hand side: inputs are (X, U, X') arrays"""
    field_fn = model.vector_field

    def loss(batch, tree):
        states, inputs, targets = batch
        pred = jax.vmap(lambda x, u: field_fn(tree, x, u))(states, inputs)
        return jnp.mean((pred - targets) ** 2)

    return ScalarExpr(loss, layout=model.layout, name=f"{model.kind}.derivative_loss")


def _rollout_errors(model, observed, h):
    field_fn = model.vector_field
    observed = np.asarray(observed)

    def errors(tree, x0, inputs, targets):
        states = rk4_rollout(lambda x, u: field_fn(tree, x, u), x0, h, inputs)
        diff = states[:, observed] - targets
        return jnp.mean(diff * diff)

    return errors


def trajectory_loss_expr(model, observed, h):
    """
    Rollout MSE on the observed dimensions

    Inputs are (X0, U, Y): initial states (B, n), stage inputs
    (B, K-1, substeps, 3, m) and targets (B, K, len(observed)). Every window
    has the same length, so the mean of per-window errors is the MSE over all
    compared entries.
    """
    errors = _rollout_errors(model, observed, h)

    def loss(batch, tree):
        x0, inputs, targets = batch
        per_window = jax.vmap(errors, in_axes=(None, 0, 0, 0))(tree, x0, inputs, targets)
        return jnp.mean(per_window)

    return ScalarExpr(loss, layout=model.layout, name=f"{model.kind}.trajectory_loss")


def _pair_arrays(model, pairs):
    if pairs.state_dim != model.state_dim:
        raise StructuralError(
            f"Derivative pairs have {pairs.state_dim} states, model has {model.state_dim}"
        )
    if model.input_dim and pairs.input_dim != model.input_dim:
        raise DataError(f"Model expects {model.input_dim} input channels, data has {pairs.input_dim}")
    inputs = pairs.inputs if model.input_dim else np.zeros((len(pairs), 0))
    return pairs.states, inputs, pairs.derivatives


def _run(model, expr, cfg, batches, on_divergence):
    """Shared ADAM loop; ``batches(step)`` returns the expression inputs of a step"""
    history = TrainHistory()
    params = model.params
    state = AdamState.zeros(len(params))
    for step in range(cfg.steps):
        start = time.perf_counter()
        batch = batches(step)
        loss, grad = value_and_grad_params(expr, batch, params)
        if not np.isfinite(loss) or not np.all(np.isfinite(grad.values)):
            on_divergence(step, batch, params)
        lr = cfg.learning_rate_at(step)
        params, state = adam_step(params, grad, state, lr, cfg.beta1, cfg.beta2, cfg.eps)
        history.record(loss, time.perf_counter() - start)
        if (step + 1) % cfg.log_every == 0 or step + 1 == cfg.steps:
            logger.info("step %d/%d  loss %.6e  lr %.3e", step + 1, cfg.steps, loss, lr)
    model.params = params
    history.final_params = params.copy()
    return history


def fit_derivative(model, pairs, cfg):
    """
    Derivative fitting with shuffled minibatches

    Args:
        model: PhsModel (updated in place)
        pairs: DerivativePairs in model coordinates
        cfg: TrainConfig

    Returns:
        TrainHistory

    Raises:
        ConfigurationError: If augmented states are configured
        DivergenceError: On a non-finite loss or gradient
    """
    if cfg.augmented_dims > 0:
        raise ConfigurationError("Derivative fitting is not applicable with augmented states")
    states, inputs, targets = _pair_arrays(model, pairs)
    expr = derivative_loss_expr(model)
    rng = np.random.default_rng(cfg.seed)
    count = len(pairs)
    batch_size = min(cfg.batch_size, count)
    per_epoch = -(-count // batch_size)
    order = np.arange(count)

    def batches(step):
        nonlocal order
        position = step % per_epoch
        if position == 0:
            order = rng.permutation(count)
        idx = order[position * batch_size:(position + 1) * batch_size]
        return states[idx], inputs[idx], targets[idx]

    def on_divergence(step, batch, params):
        raise DivergenceError("Non-finite derivative-fitting loss", step=step)

    logger.info(
        "Derivative fitting: %d pairs, batch %d, %d steps @ lr %g", count, batch_size, cfg.steps, cfg.learning_rate
    )
    return _run(model, expr, cfg, batches, on_divergence)


def _windows(length, rollout_length):
    if rollout_length >= length:
        return [0]
    starts = list(range(0, length - rollout_length + 1, rollout_length - 1))
    if starts[-1] + rollout_length < length:
        starts.append(length - rollout_length)
    return starts


def trajectory_windows(model, trajectories, cfg):
    """
    Stack equal-length windows of the training trajectories

    Returns:
        Tuple (X0, U, Y, owners, h) where owners[i] is the trajectory index of window i
    """
    if not trajectories:
        raise DataError("Trajectory fitting needs at least one trajectory")
    n = model.state_dim
    observed = cfg.observed_indices(n)
    intervals = [traj.sample_interval for traj in trajectories]
    dt = intervals[0]
    if any(interval is None or not np.isclose(interval, dt, rtol=1e-9, atol=0.0) for interval in intervals):
        raise DataError("Trajectory fitting needs uniformly sampled trajectories sharing one interval")
    shortest = min(len(traj) for traj in trajectories)
    length = cfg.rollout_length or shortest
    if length > shortest:
        raise DataError(f"Rollout length {length} exceeds the shortest trajectory ({shortest} samples)")
    if cfg.rollout_length is None and any(len(traj) != shortest for traj in trajectories):
        logger.info("Trajectories differ in length; fitting windows of %d samples", shortest)
    x0s, inputs, targets, owners = [], [], [], []
    for index, traj in enumerate(trajectories):
        if traj.state_dim != len(observed):
            raise StructuralError(
                f"Trajectory {index} has {traj.state_dim} states, {len(observed)} are observed"
            )
        if model.input_dim and traj.input_dim != model.input_dim:
            raise DataError(
                f"Trajectory {index} has {traj.input_dim} input channels, model expects {model.input_dim}"
            )
        signal = InputSignal.from_trajectory(traj, cfg.interpolation) if model.input_dim else None
        for start in _windows(len(traj), length):
            piece = traj.window(start, start + length)
            x0 = np.zeros(n)
            x0[list(observed)] = piece.states[0]
            x0s.append(x0)
            inputs.append(stage_inputs(signal, piece.times[0], dt, length - 1, cfg.substeps, model.input_dim))
            targets.append(piece.states)
            owners.append(index)
    return np.array(x0s), np.array(inputs), np.array(targets), owners, dt / cfg.substeps


def fit_trajectory(model, trajectories, cfg):
    """
    Trajectory fitting through differentiable RK4 rollouts

    Every step rolls out all windows, takes the MSE on the observed dimensions
    and applies one ADAM update.

    Args:
        model: PhsModel (updated in place)
        trajectories: Training trajectories in model coordinates
        cfg: TrainConfig with regime "trajectory"

    Returns:
        TrainHistory

    Raises:
        DivergenceError: On a non-finite loss, naming the step and the first
            offending trajectory
    """
    observed = cfg.observed_indices(model.state_dim)
    x0, inputs, targets, owners, h = trajectory_windows(model, trajectories, cfg)
    expr = trajectory_loss_expr(model, observed, h)
    batch = (x0, inputs, targets)
    per_window = jax.jit(
        jax.vmap(
            lambda theta, a, b, c: _rollout_errors(model, observed, h)(model.layout.unflatten(theta), a, b, c),
            in_axes=(None, 0, 0, 0),
        )
    )

    def on_divergence(step, batch, params):
        losses = np.asarray(per_window(params.values, *batch))
        bad = np.nonzero(~np.isfinite(losses))[0]
        offender = owners[int(bad[0])] if bad.size else None
        raise DivergenceError("Non-finite trajectory-fitting loss", step=step, trajectory=offender)

    logger.info(
        "Trajectory fitting: %d windows of %d samples, h=%g, %d steps @ lr %g",
        len(owners),
        targets.shape[1],
        h,
        cfg.steps,
        cfg.learning_rate,
    )
    return _run(model, expr, cfg, lambda step: batch, on_divergence)


def fit(model, data, cfg):
    """Dispatch on ``cfg.regime``: DerivativePairs or a list of Trajectory"""
    if cfg.regime == "derivative":
        return fit_derivative(model, data, cfg)
    return fit_trajectory(model, data, cfg)
