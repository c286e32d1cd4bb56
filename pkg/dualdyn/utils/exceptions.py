"""
Error hierarchy for dualdyn.

Every error carries an ``exit_code`` (like a status code on an HTTP error) so the
command router can map failures to the process exit status without inspecting
messages.
"""
from typing import Optional


class DualDynError(Exception):
    """Base error. ``detail`` is the human-readable message."""

    exit_code = 1

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


# --- Input / configuration problems (exit 3) ---

class InvalidInputError(DualDynError, ValueError):
    exit_code = 3


class InvalidGameError(DualDynError, ValueError):
    exit_code = 3


class PreconditionError(DualDynError, ValueError):
    exit_code = 3


class BoundMismatchError(DualDynError, ValueError):
    exit_code = 3


class ConfigError(DualDynError, ValueError):
    exit_code = 3

    def __init__(self, detail: str, field: Optional[str] = None):
        message = f"{field}: {detail}" if field else detail
        super().__init__(message)
        self.field = field


# --- Numerical failures (exit 4) ---

class DomainError(DualDynError, ValueError):
    exit_code = 4


class SolverError(DualDynError, RuntimeError):
    exit_code = 4

    def __init__(self, detail: str, last_residual: Optional[float] = None):
        if last_residual is not None:
            detail = f"{detail} (last residual {last_residual:.3e})"
        super().__init__(detail)
        self.last_residual = last_residual


class IntegratorError(DualDynError, RuntimeError):
    exit_code = 4

    def __init__(self, detail: str, index: Optional[int] = None):
        super().__init__(detail)
        self.index = index


class DivergenceError(IntegratorError):
    def __init__(self, time: float, norm: float):
        super().__init__(
            f"state diverged at t={time:.6g}: |z|_inf={norm:.3e} exceeds threshold"
        )
        self.time = time
        self.norm = norm


BOUND_VIOLATION_EXIT_CODE = 2
