"""Human-readable state descriptions for a solved partition."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .partition import QuantizationSolution


@dataclass(frozen=True)
class StateDescription:
    index: int  # 1-based, for display
    center: np.ndarray
    center_text: str
    probability: float
    sentence: str


def _center_text(center: np.ndarray) -> str:
    return "(" + ", ".join(f"{c:.1f}" for c in center) + ")"


def state_descriptions(solution: QuantizationSolution) -> list[StateDescription]:
    """One record per state: defining point (1-decimal), mass, and the
    closest-point sentence that defines when the state occurs."""
    masses = solution.state_masses()
    records = []
    for s in range(solution.num_states):
        center = solution.partition.centers[s]
        text = _center_text(center)
        sentence = (
            f"State {s + 1} occurs when the realization is closer to "
            f"{text} than to any other defining point."
        )
        records.append(
            StateDescription(
                index=s + 1,
                center=center,
                center_text=text,
                probability=float(masses[s]),
                sentence=sentence,
            )
        )
    return records


def describe_states(solution: QuantizationSolution) -> str:
    lines = []
    for record in state_descriptions(solution):
        lines.append(
            f"State {record.index}: defining point {record.center_text}, "
            f"probability mass {record.probability:.6g}"
        )
        lines.append(record.sentence)
    return "\n".join(lines) + "\n"
