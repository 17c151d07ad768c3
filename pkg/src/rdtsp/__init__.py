"""Solvers, local policies and instance generators for the reward-discounted TSP."""

from .errors import GuardError, RdtspError, ValidationError
from .instance import (
    RdtspInstance, Tour, Violation, from_points, scale_instance, tour_value, validate_instance,
)

__all__ = [
    "GuardError", "RdtspError", "ValidationError",
    "RdtspInstance", "Tour", "Violation",
    "from_points", "scale_instance", "tour_value", "validate_instance",
]
__version__ = "0.1.0"
