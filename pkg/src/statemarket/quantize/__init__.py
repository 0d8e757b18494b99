"""Minimal-size state partitions of a scenario measure.

Builds Voronoi partitions whose generating points minimize the
probability-weighted squared distance of scenarios to their nearest center,
with exact solvers at desk scale, a weighted Lloyd heuristic for production
use, and a neutral problem-file export for external MIQP solvers.
"""

from .partition import (
    StatePartition,
    QuantizationSolution,
    classify,
    partition_objective,
    size_of_state,
)
from .solvers import solve_dp_1d, solve_exact, solve_lloyd
from .miqp import auto_big_m, evaluate_miqp, export_miqp, parse_miqp
from .report import StateDescription, describe_states, state_descriptions
from .svg import export_partition_svg

__all__ = [
    "StatePartition",
    "QuantizationSolution",
    "classify",
    "partition_objective",
    "size_of_state",
    "solve_exact",
    "solve_dp_1d",
    "solve_lloyd",
    "export_miqp",
    "evaluate_miqp",
    "parse_miqp",
    "auto_big_m",
    "describe_states",
    "state_descriptions",
    "StateDescription",
    "export_partition_svg",
]
