"""Channelwise normalization and measurement-noise injection"""

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from sphs.core.errors import ConfigurationError, StructuralError
from sphs.io.trajectory import DerivativePairs, Trajectory

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Normalizer:
    """
    Affine map x_norm = (x - shift) / scale per state channel

    Inputs are only scaled, so u = 0 keeps its meaning of "no excitation".
    """

    shift: np.ndarray
    scale: np.ndarray
    input_scale: np.ndarray = None

    def __post_init__(self):
        shift = np.asarray(self.shift, dtype=np.float64).reshape(-1)
        scale = np.asarray(self.scale, dtype=np.float64).reshape(-1)
        if shift.shape != scale.shape:
            raise StructuralError(f"Shift {shift.shape} and scale {scale.shape} differ in length")
        if np.any(scale <= 0):
            raise ConfigurationError(f"Normalizer scales must be > 0, got {scale.tolist()}")
        object.__setattr__(self, "shift", shift)
        object.__setattr__(self, "scale", scale)
        if self.input_scale is not None:
            object.__setattr__(self, "input_scale", np.asarray(self.input_scale, dtype=np.float64).reshape(-1))

    @property
    def dim(self):
        return self.shift.size

    def apply(self, x):
        """Normalize states (..., n)"""
        return (np.asarray(x, dtype=np.float64) - self.shift) / self.scale

    def invert(self, x):
        return np.asarray(x, dtype=np.float64) * self.scale + self.shift

    def apply_inputs(self, u):
        if u is None or self.input_scale is None:
            return u
        return np.asarray(u, dtype=np.float64) / self.input_scale

    def invert_inputs(self, u):
        if u is None or self.input_scale is None:
            return u
        return np.asarray(u, dtype=np.float64) * self.input_scale

    def apply_trajectory(self, traj):
        derivatives = None if traj.derivatives is None else traj.derivatives / self.scale
        return Trajectory(traj.times, self.apply(traj.states), self.apply_inputs(traj.inputs), derivatives)

    def invert_trajectory(self, traj):
        derivatives = None if traj.derivatives is None else traj.derivatives * self.scale
        return Trajectory(traj.times, self.invert(traj.states), self.invert_inputs(traj.inputs), derivatives)

    def apply_pairs(self, pairs):
        return DerivativePairs(
            self.apply(pairs.states), pairs.derivatives / self.scale, self.apply_inputs(pairs.inputs)
        )

    def to_dict(self):
        return {
            "shift": self.shift.tolist(),
            "scale": self.scale.tolist(),
            "input_scale": None if self.input_scale is None else self.input_scale.tolist(),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(data["shift"], data["scale"], data.get("input_scale"))


def fit_normalizer(trajs, equilibrium_values=None):
    """
    Shift the equilibrium to zero and scale every state channel to unit variance

    The variance is the population variance over all samples of the training
    trajectories. Input channels are scaled by their standard deviation
    (constant input channels keep scale 1).

    Args:
        trajs: Training trajectories
        equilibrium_values: Physical equilibrium state; defaults to the origin

    Returns:
        Normalizer

    Raises:
        ConfigurationError: If a state channel has zero variance
    """
    states = np.concatenate([traj.states for traj in trajs])
    n = states.shape[1]
    shift = np.zeros(n) if equilibrium_values is None else np.asarray(equilibrium_values, dtype=np.float64)
    if shift.shape != (n,):
        raise StructuralError(f"Equilibrium has {shift.size} entries, data has {n} state channels")
    scale = np.std(states, axis=0)
    flat = scale <= 1e-12 * np.maximum(1.0, np.abs(np.mean(states, axis=0)))
    if np.any(flat):
        raise ConfigurationError(f"State channels {np.nonzero(flat)[0].tolist()} have zero variance")
    outside = (shift < states.min(axis=0)) | (shift > states.max(axis=0))
    if np.any(outside):
        warnings.warn(
            f"Equilibrium lies outside the data range in channels {np.nonzero(outside)[0].tolist()}",
            UserWarning,
        )
    input_scale = None
    if trajs[0].inputs is not None:
        inputs = np.concatenate([traj.inputs for traj in trajs])
        input_scale = np.std(inputs, axis=0)
        input_scale[input_scale <= 0] = 1.0
    logger.debug("Normalizer fitted: shift=%s scale=%s", shift, scale)
    return Normalizer(shift, scale, input_scale)


def add_noise(traj, percent, seed=0):
    """
    Add zero-mean Gaussian noise to every state and input channel

    The standard deviation of the noise on a channel is ``percent`` percent of
    that channel's standard deviation in the clean trajectory. Exact
    derivative samples, if present, are carried over unchanged.
    """
    if percent < 0:
        raise ConfigurationError(f"Noise level must be >= 0 percent, got {percent}")
    rng = np.random.default_rng(seed)
    fraction = percent / 100.0

    def noisy(values):
        if values is None:
            return None
        sigma = fraction * np.std(values, axis=0)
        return values + sigma * rng.standard_normal(values.shape)

    return Trajectory(traj.times.copy(), noisy(traj.states), noisy(traj.inputs), traj.derivatives)
