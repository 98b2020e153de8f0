"""Small numerical helpers shared by several modules"""

import numpy as np

from sphs.core.errors import ConfigurationError


def softplus(x):
    """Numerically stable softplus ln(1 + e^x) on numpy arrays"""
    x = np.asarray(x, dtype=np.float64)
    return np.logaddexp(0.0, x)


def softplus_inverse(y):
    """
    Inverse of softplus for y > 0

    x = ln(e^y - 1), evaluated as y + ln(1 - e^-y) for large y
    """
    y = np.asarray(y, dtype=np.float64)
    if np.any(y <= 0):
        raise ConfigurationError("softplus_inverse requires strictly positive values")
    return y + np.log(-np.expm1(-y))


def central_difference_gradient(f, x, step=1e-5):
    """
    Central finite-difference gradient of a scalar function

    Args:
        f: Callable mapping a numpy vector to a float
        x: Evaluation point
        step: Difference step

    Returns:
        numpy gradient estimate
    """
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e.flat[i] = step
        grad.flat[i] = (f(x + e) - f(x - e)) / (2.0 * step)
    return grad


def relative_error(a, b, floor=1e-12):
    """Elementwise |a - b| / max(|a|, |b|, floor)"""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def format_float(value):
    """17-significant-digit decimal text; round-trips every float64"""
    return f"{float(value):.17g}"


def interquartile_summary(values, axis=0):
    """
    Interquartile mean and range along an axis

    The interquartile mean averages the values lying between the 25th and 75th
    percentile (inclusive).

    Args:
        values: Array of samples
        axis: Axis holding the instances

    Returns:
        Tuple (iqm, q25, q75)
    """
    values = np.asarray(values, dtype=np.float64)
    q25, q75 = np.percentile(values, [25.0, 75.0], axis=axis, keepdims=True)
    inside = (values >= q25) & (values <= q75)
    iqm = np.sum(np.where(inside, values, 0.0), axis=axis) / np.sum(inside, axis=axis)
    return iqm, np.squeeze(q25, axis=axis), np.squeeze(q75, axis=axis)
