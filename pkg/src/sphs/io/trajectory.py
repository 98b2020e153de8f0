"""Trajectory and derivative-pair containers with their CSV formats"""

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from sphs.core.errors import DataError, StructuralError
from sphs.utils.numerics import format_float

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class Trajectory:
    """
    Sampled states x(t) and, optionally, inputs u(t)

    Args:
        times: Strictly increasing sample times (K,)
        states: (K, n)
        inputs: (K, m) or None
        derivatives: Exact x'(t) at the samples (K, n) or None
    """

    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray = None
    derivatives: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64).reshape(-1)
        self.states = np.asarray(self.states, dtype=np.float64)
        if self.states.ndim == 1:
            self.states = self.states.reshape(-1, 1)
        k = self.times.size
        if self.states.shape[0] != k:
            raise StructuralError(f"Trajectory has {k} times but {self.states.shape[0]} state rows")
        if k > 1 and np.any(np.diff(self.times) <= 0):
            raise StructuralError("Trajectory times must be strictly increasing")
        if self.inputs is not None:
            self.inputs = np.asarray(self.inputs, dtype=np.float64).reshape(k, -1)
            if self.inputs.shape[1] == 0:
                self.inputs = None
        if self.derivatives is not None:
            self.derivatives = np.asarray(self.derivatives, dtype=np.float64).reshape(self.states.shape)

    def __len__(self):
        return self.times.size

    @property
    def state_dim(self):
        return self.states.shape[1]

    @property
    def input_dim(self):
        return 0 if self.inputs is None else self.inputs.shape[1]

    @property
    def sample_interval(self):
        """Uniform spacing of the time grid, or None if the grid is not uniform"""
        if len(self) < 2:
            return None
        steps = np.diff(self.times)
        if np.max(np.abs(steps - steps[0])) > 1e-9 * max(1.0, abs(steps[0])):
            return None
        return float(steps[0])

    def column_names(self):
        names = ["t"] + [f"x{i + 1}" for i in range(self.state_dim)]
        return names + [f"u{i + 1}" for i in range(self.input_dim)]

    def window(self, start, stop):
        """Samples start..stop-1 as a new trajectory"""
        return Trajectory(
            self.times[start:stop],
            self.states[start:stop],
            None if self.inputs is None else self.inputs[start:stop],
            None if self.derivatives is None else self.derivatives[start:stop],
        )

    def allclose(self, other, atol=0.0, rtol=0.0):
        if self.input_dim != other.input_dim or len(self) != len(other):
            return False
        same = np.allclose(self.times, other.times, atol=atol, rtol=rtol)
        same = same and np.allclose(self.states, other.states, atol=atol, rtol=rtol)
        if self.inputs is not None:
            same = same and np.allclose(self.inputs, other.inputs, atol=atol, rtol=rtol)
        return bool(same)


@dataclass(eq=False)
class DerivativePairs:
    """Samples (x, x') for derivative fitting, with the inputs u active at each sample"""

    states: np.ndarray
    derivatives: np.ndarray
    inputs: np.ndarray = None

    def __post_init__(self):
        self.states = np.atleast_2d(np.asarray(self.states, dtype=np.float64))
        self.derivatives = np.atleast_2d(np.asarray(self.derivatives, dtype=np.float64))
        if self.states.shape != self.derivatives.shape:
            raise StructuralError(
                f"States {self.states.shape} and derivatives {self.derivatives.shape} differ in shape"
            )
        if self.inputs is not None:
            self.inputs = np.asarray(self.inputs, dtype=np.float64).reshape(self.states.shape[0], -1)
            if self.inputs.shape[1] == 0:
                self.inputs = None

    def __len__(self):
        return self.states.shape[0]

    @property
    def state_dim(self):
        return self.states.shape[1]

    @property
    def input_dim(self):
        return 0 if self.inputs is None else self.inputs.shape[1]

    @classmethod
    def from_trajectories(cls, trajectories):
        """Stack the exact derivatives carried by generated trajectories"""
        missing = [i for i, traj in enumerate(trajectories) if traj.derivatives is None]
        if missing:
            raise DataError(f"Trajectories {missing} carry no derivative samples")
        inputs = None
        if trajectories[0].inputs is not None:
            inputs = np.concatenate([traj.inputs for traj in trajectories])
        return cls(
            np.concatenate([traj.states for traj in trajectories]),
            np.concatenate([traj.derivatives for traj in trajectories]),
            inputs,
        )


def _write_rows(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_float(v) for v in row])


def _read_rows(path):
    """Header plus float rows; every malformed line is reported with its number"""
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        try:
            header = [name.strip() for name in next(reader)]
        except StopIteration:
            raise DataError("empty file", path=path, line=1) from None
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(
                    f"expected {len(header)} columns, found {len(row)}", path=path, line=line_no
                )
            try:
                values = [float(v) for v in row]
            except ValueError as e:
                raise DataError(f"not a number ({e})", path=path, line=line_no) from None
            if not all(math.isfinite(v) for v in values):
                raise DataError("non-finite value", path=path, line=line_no)
            rows.append(values)
    if not rows:
        raise DataError("no data rows", path=path)
    return header, np.array(rows)


def _indexed_columns(header, prefix, path):
    """Positions of prefix1, prefix2, ... in order; gaps are an error"""
    indices = []
    while f"{prefix}{len(indices) + 1}" in header:
        indices.append(header.index(f"{prefix}{len(indices) + 1}"))
    extra = [
        name for name in header
        if name.startswith(prefix) and name[len(prefix):].isdigit() and header.index(name) not in indices
    ]
    if extra:
        raise DataError(f"unexpected columns {extra} in header", path=path, line=1)
    return indices


def save_csv(traj, path):
    """Write ``t,x1..xn[,u1..um]`` with 17 significant digits"""
    columns = [traj.times[:, None], traj.states]
    if traj.inputs is not None:
        columns.append(traj.inputs)
    _write_rows(path, traj.column_names(), np.hstack(columns))
    logger.debug("Wrote %d samples to %s", len(traj), path)


def load_csv(path):
    """
    Read a trajectory CSV

    Raises:
        DataError: Missing ``t`` or state columns, ragged rows, non-numeric or
            non-finite values, non-increasing times
    """
    header, data = _read_rows(path)
    if "t" not in header:
        raise DataError("missing 't' column in header", path=path, line=1)
    state_cols = _indexed_columns(header, "x", path)
    if not state_cols:
        raise DataError("no state columns x1..xn in header", path=path, line=1)
    input_cols = _indexed_columns(header, "u", path)
    times = data[:, header.index("t")]
    bad = np.nonzero(np.diff(times) <= 0)[0]
    if bad.size:
        raise DataError("times must be strictly increasing", path=path, line=int(bad[0]) + 3)
    inputs = data[:, input_cols] if input_cols else None
    return Trajectory(times, data[:, state_cols], inputs)


def load_table(path):
    """
    Read a numeric CSV with one header row

    Returns:
        Tuple (column names, (rows, columns) array)
    """
    return _read_rows(path)


def save_pairs(pairs, path):
    """Write ``x1..xn,dx1..dxn[,u1..um]``"""
    n = pairs.state_dim
    header = [f"x{i + 1}" for i in range(n)] + [f"dx{i + 1}" for i in range(n)]
    columns = [pairs.states, pairs.derivatives]
    if pairs.inputs is not None:
        header += [f"u{i + 1}" for i in range(pairs.input_dim)]
        columns.append(pairs.inputs)
    _write_rows(path, header, np.hstack(columns))
    logger.debug("Wrote %d derivative pairs to %s", len(pairs), path)


def load_pairs(path):
    """Read a derivative-pair CSV written by ``save_pairs``"""
    header, data = _read_rows(path)
    state_cols = _indexed_columns(header, "x", path)
    derivative_cols = _indexed_columns(header, "dx", path)
    if not state_cols or len(state_cols) != len(derivative_cols):
        raise DataError("header needs x1..xn and dx1..dxn columns", path=path, line=1)
    input_cols = _indexed_columns(header, "u", path)
    inputs = data[:, input_cols] if input_cols else None
    return DerivativePairs(data[:, state_cols], data[:, derivative_cols], inputs)
