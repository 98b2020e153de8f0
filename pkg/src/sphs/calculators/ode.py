"""
Time integration: fixed-step RK4 and adaptive Tsitouras 5(4).

Right-hand sides are callables ``f(x, u) -> x'``; time enters only through the
input signal u(t). RK4 has a host (numpy) path and a traceable rollout used by
trajectory fitting. Tsit5 is host-only and hits every requested output time
exactly by clipping the step.
"""

import logging
import warnings
from dataclasses import asdict, dataclass, fields

import jax
import numpy as np

from sphs.core.errors import ConfigurationError, DivergenceError, StructuralError
from sphs.io.trajectory import Trajectory

logger = logging.getLogger(__name__)

METHODS = ("rk4_fixed", "tsit5_adaptive")
INTERPOLATION_MODES = ("linear", "zero_order_hold")

# Tsitouras 5(4), FSAL: the last row of A equals the propagating weights
TSIT5_TABLEAU = {
    "c": (0.0, 0.161, 0.327, 0.9, 0.9800255409045097, 1.0, 1.0),
    "a": (
        (),
        (0.161,),
        (-0.008480655492356989, 0.335480655492357),
        (2.897153057105493, -6.359448489975075, 4.3622954328695815),
        (5.325864828439257, -11.748883564062828, 7.4955393428898365, -0.09249506636175525),
        (
            5.86145544294642,
            -12.92096931784711,
            8.159367898576159,
            -0.071584973281401,
            -0.028269050394068383,
        ),
        (
            0.09646076681806523,
            0.01,
            0.4798896504144996,
            1.379008574103742,
            -3.290069515436081,
            2.324710524099774,
        ),
    ),
    # b - b_hat, applied to all seven stages
    "btilde": (
        -0.00178001105222577714,
        -0.0008164344596567469,
        0.007880878010261995,
        -0.1447110071732629,
        0.5823571654525552,
        -0.45808210592918697,
        1.0 / 66.0,
    ),
}

# PI step-size controller
SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0
BETA_1 = 0.7 / 5.0
BETA_2 = 0.4 / 5.0


@dataclass(frozen=True, eq=False)
class InputSignal:
    """
    Sampled input u(t), interpolated between samples and clamped outside them

    Args:
        times: Strictly increasing sample times (K,)
        values: Samples (K, m)
        mode: "linear" or "zero_order_hold"
    """

    times: np.ndarray
    values: np.ndarray
    mode: str = "linear"

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64).reshape(-1)
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values.reshape(-1, 1)
        if self.mode not in INTERPOLATION_MODES:
            raise ConfigurationError(
                f"Unknown interpolation mode: {self.mode}. Choose from: {INTERPOLATION_MODES}"
            )
        if times.size == 0 or values.shape[0] != times.size:
            raise StructuralError(
                f"Input signal needs one value row per sample time, got {values.shape[0]} rows "
                f"for {times.size} times"
            )
        if np.any(np.diff(times) <= 0):
            raise ConfigurationError("Input signal sample times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def dim(self):
        return self.values.shape[1]

    @classmethod
    def from_trajectory(cls, trajectory, mode="linear"):
        """Signal built from a trajectory's input columns, or None if it has none"""
        if trajectory.inputs is None:
            return None
        return cls(trajectory.times, trajectory.inputs, mode)


def signal_eval(u, t, side="right"):
    """
    Value of an input signal at time t

    Args:
        u: InputSignal, or None for an unforced system
        t: Time (clamped into the sampled range)
        side: "right" takes the held value starting at a sample time, "left"
            the value held up to it; only zero-order hold distinguishes them

    Returns:
        numpy vector of length m (empty when u is None)
    """
    if u is None:
        return np.zeros(0)
    times = u.times
    if u.mode == "zero_order_hold":
        index = int(np.searchsorted(times, t, side=side)) - 1
        return u.values[min(max(index, 0), times.size - 1)].copy()
    return np.array([np.interp(t, times, column) for column in u.values.T])


@dataclass(frozen=True)
class IntegrationConfig:
    """
    Solver selection and tolerances

    Args:
        method: "rk4_fixed" or "tsit5_adaptive"
        step: Fixed step h (rk4_fixed); None means one step per output interval
        rtol: Relative tolerance (tsit5_adaptive)
        atol: Absolute tolerance (tsit5_adaptive)
        max_steps: Cap on attempted steps over the whole integration
        first_step: Initial adaptive step; None selects it automatically
    """

    method: str = "tsit5_adaptive"
    step: float = None
    rtol: float = 1e-6
    atol: float = 1e-8
    max_steps: int = 1_000_000
    first_step: float = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigurationError(f"Unknown integration method: {self.method}. Choose from: {METHODS}")
        if self.step is not None and self.step <= 0:
            raise ConfigurationError(f"Fixed step must be > 0, got {self.step}")
        if self.rtol <= 0 or self.atol <= 0:
            raise ConfigurationError(f"Tolerances must be > 0, got rtol={self.rtol}, atol={self.atol}")
        if self.max_steps < 1:
            raise ConfigurationError(f"max_steps must be >= 1, got {self.max_steps}")
        if self.first_step is not None and self.first_step <= 0:
            raise ConfigurationError(f"first_step must be > 0, got {self.first_step}")

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"Unknown integration keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self):
        return asdict(self)


def _rk4_update(f, x, h, u0, u_mid, u1):
    # shared by the numpy step and the traced rollout
    k1 = f(x, u0)
    k2 = f(x + (0.5 * h) * k1, u_mid)
    k3 = f(x + (0.5 * h) * k2, u_mid)
    k4 = f(x + h * k3, u1)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_step(f, t, x, h, u=None):
    """
    One classical Runge-Kutta step

    Args:
        f: Right-hand side f(x, u)
        t: Current time
        x: Current state
        h: Step size (> 0)
        u: InputSignal or None

    Returns:
        numpy state at t + h

    Raises:
        DivergenceError: If the new state is not finite
    """
    if h <= 0:
        raise ConfigurationError(f"RK4 step must be > 0, got {h}")
    x = np.asarray(x, dtype=np.float64)
    x_new = _rk4_update(
        lambda y, v: np.asarray(f(y, v), dtype=np.float64),
        x,
        h,
        signal_eval(u, t),
        signal_eval(u, t + 0.5 * h, side="left"),
        signal_eval(u, t + h, side="left"),
    )
    if not np.all(np.isfinite(x_new)):
        raise DivergenceError(f"Non-finite state after RK4 step at t={t:g}")
    return x_new


def stage_inputs(u, t0, dt, intervals, substeps, input_dim):
    """
    Input values at every RK4 stage time of a uniform rollout

    Returns:
        Array (intervals, substeps, 3, m) holding u at the start, midpoint and
        end of each substep; the end value is the limit from inside the substep
    """
    h = dt / substeps
    grid = np.zeros((intervals, substeps, 3, input_dim))
    if u is None or input_dim == 0:
        return grid
    for k in range(intervals):
        for s in range(substeps):
            t = t0 + k * dt + s * h
            grid[k, s, 0] = signal_eval(u, t)
            grid[k, s, 1] = signal_eval(u, t + 0.5 * h, side="left")
            grid[k, s, 2] = signal_eval(u, t + h, side="left")
    return grid


def rk4_rollout(f, x0, h, inputs):
    """
    Traceable fixed-step RK4 rollout

    Args:
        f: Traceable right-hand side f(x, u)
        x0: Initial state (n,)
        h: Substep size
        inputs: Stage inputs (intervals, substeps, 3, m) from ``stage_inputs``

    Returns:
        States (intervals + 1, n) at the interval boundaries, x0 first
    """

    def substep(x, u):
        return _rk4_update(f, x, h, u[0], u[1], u[2]), None

    def interval(x, u_interval):
        x, _ = jax.lax.scan(substep, x, u_interval)
        return x, x

    _, states = jax.lax.scan(interval, x0, inputs)
    return jax.numpy.concatenate([x0[None, :], states], axis=0)


def _rms(values):
    return float(np.sqrt(np.mean(values * values))) if values.size else 0.0


def _initial_step(f, t0, x0, k0, u, rtol, atol, span):
    scale = atol + rtol * np.abs(x0)
    d0 = _rms(x0 / scale)
    d1 = _rms(k0 / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    k1 = f(x0 + h0 * k0, signal_eval(u, t0 + h0))
    d2 = _rms((k1 - k0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / 5.0)
    return min(100.0 * h0, h1, span)


class _Tsit5:
    """Adaptive stepper state carried across output intervals"""

    def __init__(self, f, u, cfg):
        self.f = f
        self.u = u
        self.cfg = cfg
        self.h = None
        self.k_first = None
        self.previous_norm = 1e-4
        self.accepted = 0
        self.rejected = 0
        self.clamped = False

    def attempt(self, t, x, h):
        a = TSIT5_TABLEAU["a"]
        c = TSIT5_TABLEAU["c"]
        stages = [self.k_first]
        for i in range(1, 7):
            y = x + h * sum(coef * k for coef, k in zip(a[i], stages))
            stages.append(self.f(y, signal_eval(self.u, t + c[i] * h, side="left")))
        x_new = y
        error = h * sum(coef * k for coef, k in zip(TSIT5_TABLEAU["btilde"], stages))
        scale = self.cfg.atol + self.cfg.rtol * np.maximum(np.abs(x), np.abs(x_new))
        norm = _rms(error / scale) if np.all(np.isfinite(x_new)) else np.inf
        return x_new, stages[-1], norm

    def advance(self, t, x, t_end):
        """Integrate from t to exactly t_end"""
        while t < t_end:
            if self.accepted + self.rejected >= self.cfg.max_steps:
                raise DivergenceError(
                    f"Adaptive integration exceeded max_steps={self.cfg.max_steps} at t={t:g}"
                )
            remaining = t_end - t
            h = min(self.h, remaining)
            last = h >= remaining
            x_new, k_last, norm = self.attempt(t, x, h)
            if norm <= 1.0:
                if norm == 0.0:
                    factor = MAX_FACTOR
                else:
                    factor = SAFETY * norm ** (-BETA_1) * self.previous_norm ** BETA_2
                    factor = min(MAX_FACTOR, max(MIN_FACTOR, factor))
                self.previous_norm = max(norm, 1e-4)
                t = t_end if last else t + h
                x = x_new
                self.k_first = k_last
                if self.u is not None and self.u.mode == "zero_order_hold":
                    held = signal_eval(self.u, t)
                    if not np.array_equal(held, signal_eval(self.u, t, side="left")):
                        # input switched at t: the FSAL stage saw the old level
                        self.k_first = self.f(x, held)
                self.accepted += 1
                if not last or h == self.h:
                    self.h = h * factor
            else:
                raw = SAFETY * norm ** (-BETA_1) if np.isfinite(norm) else 0.0
                if raw <= MIN_FACTOR and not self.clamped:
                    # once per integration
                    self.clamped = True
                    warnings.warn(
                        f"Step size controller hit its minimum factor {MIN_FACTOR:g} at t={t:g} "
                        f"(error norm {norm:.3g}, step {h:.3g})",
                        UserWarning,
                    )
                factor = max(MIN_FACTOR, raw)
                self.h = h * min(1.0, factor)
                self.rejected += 1
                if self.h <= 1e-14 * max(1.0, abs(t)):
                    raise DivergenceError(f"Adaptive step size underflow at t={t:g}")
        return x


def _integrate_rk4(f, x0, times, u, cfg):
    states = [x0]
    x = x0
    total = 0
    for t0, t1 in zip(times[:-1], times[1:]):
        interval = t1 - t0
        if cfg.step is None:
            count = 1
        else:
            ratio = interval / cfg.step
            count = int(round(ratio))
            if count < 1 or abs(ratio - count) > 1e-9 * max(1.0, ratio):
                raise ConfigurationError(
                    f"Output spacing {interval:g} is not an integer multiple of the fixed step {cfg.step:g}"
                )
        h = interval / count
        total += count
        if total > cfg.max_steps:
            raise DivergenceError(f"Fixed-step integration exceeded max_steps={cfg.max_steps}")
        for k in range(count):
            x = rk4_step(f, t0 + k * h, x, h, u)
        states.append(x)
    return np.array(states)


def _integrate_tsit5(f, x0, times, u, cfg):
    stepper = _Tsit5(f, u, cfg)
    if times.size == 1:
        return x0[None, :]
    stepper.k_first = f(x0, signal_eval(u, times[0]))
    span = times[-1] - times[0]
    stepper.h = cfg.first_step or _initial_step(f, times[0], x0, stepper.k_first, u, cfg.rtol, cfg.atol, span)
    states = [x0]
    x = x0
    for t0, t1 in zip(times[:-1], times[1:]):
        x = stepper.advance(t0, x, t1)
        states.append(x)
    logger.debug("Tsit5: %d accepted, %d rejected steps", stepper.accepted, stepper.rejected)
    return np.array(states)


def integrate(f, x0, t_eval, u=None, cfg=None):
    """
    Integrate x' = f(x, u(t)) and sample the solution at t_eval

    Args:
        f: Right-hand side f(x, u) returning a numpy-compatible vector
        x0: Initial state at t_eval[0]
        t_eval: Strictly increasing output times
        u: InputSignal or None
        cfg: IntegrationConfig (defaults to Tsit5 at rtol 1e-6, atol 1e-8)

    Returns:
        Trajectory with one state per output time (and the input samples when u is given)

    Raises:
        ConfigurationError: Non-increasing t_eval, or spacing that is not a multiple of the fixed step
        DivergenceError: Non-finite state or max_steps exceeded
    """
    cfg = cfg or IntegrationConfig()
    times = np.asarray(t_eval, dtype=np.float64).reshape(-1)
    if times.size == 0 or np.any(np.diff(times) <= 0):
        raise ConfigurationError("Output times must be non-empty and strictly increasing")
    x0 = np.array(x0, dtype=np.float64).reshape(-1)

    def field(x, v):
        return np.asarray(f(x, v), dtype=np.float64)

    if cfg.method == "rk4_fixed":
        states = _integrate_rk4(field, x0, times, u, cfg)
    else:
        states = _integrate_tsit5(field, x0, times, u, cfg)
    if not np.all(np.isfinite(states)):
        raise DivergenceError("Integration produced a non-finite state")
    inputs = None if u is None else np.array([signal_eval(u, t) for t in times])
    return Trajectory(times, states, inputs)
