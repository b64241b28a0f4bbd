"""Two-scale shuffle toolkit: mixed-radix shuffles, martingale coarse-graining
of nested two-scale limits and the multilayer heat application."""

from .kernels import BACKEND
from .schedule import PeriodSchedule, ScheduleError, dyadic_schedule, make_schedule
from .shuffle import compose_shuffle, layer_reversal, neighbor_maps_finite, neighbor_maps_limit
from .mgrid import CellFunction, coarse_grain, is_martingale, recover_two_scale, to_shuffled

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "PeriodSchedule",
    "ScheduleError",
    "dyadic_schedule",
    "make_schedule",
    "compose_shuffle",
    "layer_reversal",
    "neighbor_maps_finite",
    "neighbor_maps_limit",
    "CellFunction",
    "coarse_grain",
    "is_martingale",
    "recover_two_scale",
    "to_shuffled",
]
