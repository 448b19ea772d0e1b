"""Log-linear norm diffusion on networks under general schedulers."""

__version__ = "0.1.0"

from ._accel import NUMBA_ENABLED, backend_name
from .dynamics import Absorption, FractionA, Rounds, Steps, run, run_restricted, step
from .errors import CapacityError, CensoredError, ReducibleChainError
from .graphs import WeightedGraph, close_knit_ratio, complete, cycle, grid, is_rk_close_knit, line
from .model import ModelParams, PayoffMatrix, Strategy, potential, update_distribution
from .schedulers import (AdversarialScheduler, ContagionScheduler, PeriodicScheduler,
                         RandomScheduler)

__all__ = [
    "__version__", "NUMBA_ENABLED", "backend_name",
    "Absorption", "FractionA", "Rounds", "Steps", "run", "run_restricted", "step",
    "CapacityError", "CensoredError", "ReducibleChainError",
    "WeightedGraph", "close_knit_ratio", "complete", "cycle", "grid", "is_rk_close_knit", "line",
    "ModelParams", "PayoffMatrix", "Strategy", "potential", "update_distribution",
    "AdversarialScheduler", "ContagionScheduler", "PeriodicScheduler", "RandomScheduler",
]
