"""Entanglement generation rates of quantum repeaters with optimised buffer times."""

from .core import (
    BellMixture,
    DomainError,
    LevelIndex,
    LinkParams,
    UsageError,
    binary_entropy,
    dephase,
    distillable_entanglement,
    expected_waiting_steps,
    swap_merge,
)
from .optimize import InfeasibleScheduleError, OptResult, hierarchical_optimize, optimal_n_level1
from .rates import (
    ChainReport,
    LevelReport,
    LevelSchedule,
    chain_cp,
    chain_obp,
    gamma_can,
    gamma_can_level,
    gamma_opt,
    gamma_opt_level,
    memory_count,
    rate_cp_level1,
    rate_obp_level1,
)

__version__ = "0.1.0"

__all__ = [
    "BellMixture",
    "ChainReport",
    "DomainError",
    "InfeasibleScheduleError",
    "LevelIndex",
    "LevelReport",
    "LevelSchedule",
    "LinkParams",
    "OptResult",
    "UsageError",
    "binary_entropy",
    "chain_cp",
    "chain_obp",
    "dephase",
    "distillable_entanglement",
    "expected_waiting_steps",
    "gamma_can",
    "gamma_can_level",
    "gamma_opt",
    "gamma_opt_level",
    "hierarchical_optimize",
    "memory_count",
    "optimal_n_level1",
    "rate_cp_level1",
    "rate_obp_level1",
    "swap_merge",
]
