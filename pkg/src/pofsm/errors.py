"""
Exception hierarchy for pofsm.

The CLI maps ConfigError to exit code 1 and DataError to exit code 2.
"""


class PofsmError(Exception):
    """Base exception for all pofsm errors."""
    pass


class ConfigError(PofsmError, ValueError):
    """Invalid configuration or parameters."""
    pass


class IncompatibleArchitectureError(ConfigError):
    """Weights file was written for a different network architecture."""
    pass


class DataError(PofsmError):
    """Invalid input data (labels, manifests, images)."""
    pass


class ShapeError(DataError):
    """Tensor dimensions do not match what a layer expects."""

    def __init__(self, layer: str, expected, actual):
        self.layer = layer
        self.expected = expected
        self.actual = actual
        super().__init__(
            f"Dimension mismatch at layer '{layer}': expected {expected}, got {actual}"
        )


class CorruptFileError(DataError):
    """File is truncated or does not have the expected layout."""
    pass


class StateError(PofsmError):
    """Operation invoked in the wrong state (e.g. backward before forward)."""
    pass
