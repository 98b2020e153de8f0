"""Exception types raised across the package"""


class SphsError(Exception):
    """Base class for all package errors"""


class StructuralError(SphsError, ValueError):
    """Dimension, shape or parameter-layout mismatch"""


class ConfigurationError(SphsError, ValueError):
    """Inconsistent model, training or run configuration"""


class DataError(SphsError, ValueError):
    """
    Malformed or inconsistent input data.

    Args:
        message: Human-readable description
        path: Offending file, if any
        line: 1-based line number inside ``path``, if any
    """

    def __init__(self, message, path=None, line=None):
        location = ""
        if path is not None:
            location = f"{path}"
            if line is not None:
                location += f":{line}"
            location += ": "
        super().__init__(location + message)
        self.path = path
        self.line = line


class DivergenceError(SphsError, ArithmeticError):
    """
    Non-finite state or loss during integration or training.

    Args:
        message: Human-readable description
        step: Training step or integration step index, if known
        trajectory: Index of the offending trajectory, if known
    """

    def __init__(self, message, step=None, trajectory=None):
        details = []
        if step is not None:
            details.append(f"step {step}")
        if trajectory is not None:
            details.append(f"trajectory {trajectory}")
        suffix = f" ({', '.join(details)})" if details else ""
        super().__init__(message + suffix)
        self.step = step
        self.trajectory = trajectory


class UnsupportedOperationError(SphsError, TypeError):
    """Operation not defined for this model kind (e.g. a Hamiltonian of a NODE)"""
