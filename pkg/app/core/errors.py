"""
Exception hierarchy for the geodesic CNN kernel.
Every error carries a stable machine-readable code used by the command line layer.
"""
from typing import Optional


class GCNNError(Exception):
    """Base class for all kernel errors."""

    code = "gcnn_error"

    def __init__(self, message: str, hint: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.hint = hint

    def to_dict(self) -> dict:
        payload = {"error": self.code, "message": self.message}
        if self.hint:
            payload["hint"] = self.hint
        return payload


class ConfigError(GCNNError):
    code = "config_error"


class MeshParseError(GCNNError):
    code = "mesh_parse_error"

    def __init__(self, message: str, line: int, column: int = 1, path: Optional[str] = None):
        location = f"{path}:" if path else ""
        super().__init__(f"{location}{line}:{column}: {message}")
        self.line = line
        self.column = column


class MeshValidationError(GCNNError):
    code = "mesh_validation_error"


class DisconnectedMeshError(GCNNError):
    code = "disconnected_mesh"


class ConvergenceError(GCNNError):
    code = "convergence_error"

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (achieved residual {residual:.3e})")
        self.residual = residual


class DimensionError(GCNNError):
    code = "dimension_error"


class StaleActivationError(GCNNError):
    code = "stale_activation"


class InsufficientDataError(GCNNError):
    code = "insufficient_data"


class TaskMismatchError(GCNNError):
    code = "task_mismatch"


class CacheFormatError(GCNNError):
    code = "cache_format_error"


class MissingCacheError(GCNNError):
    code = "missing_cache"

    def __init__(self, message: str, step: str = "precompute"):
        super().__init__(message, hint=f"run `python run.py {step} --config <path>` first")
        self.step = step


class CacheLockedError(GCNNError):
    code = "cache_locked"


class ExternalIOError(GCNNError):
    """File system failure outside the cache layer (missing mesh, unwritable output)."""

    code = "io_error"


class InvalidValueError(GCNNError):
    code = "invalid_value"
