"""State partitions: Voronoi cells with smallest-index tie-breaking.

A partition is represented by its generating centers; the cell of center s
is the set of realizations at least as close to it as to any other center,
with boundary points assigned to the smallest index. Cells therefore cover
the sample space and are pairwise disjoint by construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import DimensionMismatch, EmptyState, EmptySubset
from ..scenarios import ScenarioSet, barycentre

# Centers closer than this are considered coincident and rejected.
MIN_CENTER_SEPARATION = 1e-12


def _squared_distances(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, shape (len(points), len(centers))."""
    diff = points[:, None, :] - centers[None, :, :]
    return np.einsum("lsk,lsk->ls", diff, diff)


def nearest_center(points: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Assign each point to its nearest center (ties to the smallest index).

    Returns (assignment, squared distance to the assigned center).
    """
    d2 = _squared_distances(points, centers)
    assignment = np.argmin(d2, axis=1)
    return assignment, d2[np.arange(points.shape[0]), assignment]


@dataclass(frozen=True)
class StatePartition:
    """S pairwise-distinct centers over the scenario space, smallest-index ties."""

    centers: np.ndarray
    scenarios: ScenarioSet

    def __post_init__(self) -> None:
        centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        object.__setattr__(self, "centers", centers)
        if centers.shape[1] != self.scenarios.dimension:
            raise DimensionMismatch(
                f"centers have dimension {centers.shape[1]}, "
                f"scenarios have {self.scenarios.dimension}"
            )
        if not np.all(np.isfinite(centers)):
            raise ValueError("centers must be finite")
        d2 = _squared_distances(centers, centers)
        np.fill_diagonal(d2, np.inf)
        if np.min(d2) <= MIN_CENTER_SEPARATION**2:
            raise ValueError("centers must be pairwise distinct")
        owned = np.unique(nearest_center(self.scenarios.points, centers)[0])
        if owned.size != centers.shape[0]:
            empty = sorted(set(range(centers.shape[0])) - set(owned.tolist()))
            raise EmptyState(f"state(s) {empty} own no scenario point")

    @property
    def num_states(self) -> int:
        return self.centers.shape[0]

    @property
    def dimension(self) -> int:
        return self.centers.shape[1]

    def to_dict(self) -> dict:
        return {
            "tie_rule": "smallest-index",
            "centers": self.centers.tolist(),
            "scenarios": {
                "points": self.scenarios.points.tolist(),
                "weights": self.scenarios.weights.tolist(),
            },
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "StatePartition":
        scen = ScenarioSet(
            np.asarray(payload["scenarios"]["points"], dtype=float),
            np.asarray(payload["scenarios"]["weights"], dtype=float),
        )
        return cls(np.asarray(payload["centers"], dtype=float), scen)


def classify(partition: StatePartition, xi: Sequence[float]) -> int:
    """State index (0-based) whose center is nearest to ``xi``.

    Boundary points go to the smallest index, so exactly one state occurs for
    every realization.
    """
    point = np.asarray(xi, dtype=float).ravel()
    if point.shape[0] != partition.dimension:
        raise DimensionMismatch(
            f"point has dimension {point.shape[0]}, partition has {partition.dimension}"
        )
    d2 = np.sum((partition.centers - point) ** 2, axis=1)
    return int(np.argmin(d2))


def size_of_state(scenarios: ScenarioSet, subset: Sequence[int]) -> float:
    """Variance-weighted probability mass of a state over the given scenarios.

    Sum of ``weight * squared distance to the subset barycentre`` over the
    subset; zero for singletons, the total variance for the full set.
    """
    idx = np.asarray(list(subset), dtype=int)
    if idx.size == 0:
        raise EmptySubset("size of an empty state is undefined")
    omega = barycentre(scenarios, idx)
    dev = scenarios.points[idx] - omega
    return float(scenarios.weights[idx] @ np.einsum("lk,lk->l", dev, dev))


def partition_objective(scenarios: ScenarioSet, partition: StatePartition) -> float:
    """Total size of the partition: sum of state sizes over the induced cells.

    Recomputes each cell's barycentre, so this equals the nearest-center cost
    only when the partition is centroidal.
    """
    assignment, _ = nearest_center(scenarios.points, partition.centers)
    total = 0.0
    for s in range(partition.num_states):
        members = np.flatnonzero(assignment == s)
        if members.size == 0:
            raise EmptyState(f"state {s} owns no scenario point")
        total += size_of_state(scenarios, members)
    return total


@dataclass(frozen=True)
class QuantizationSolution:
    """A solved partition: centers, point assignment, distances, and objective.

    ``lower_bound`` equals the objective for certified-optimal solvers and is
    None for heuristics. ``provenance`` is one of oracle | dp1d | lloyd |
    external.
    """

    partition: StatePartition
    assignment: np.ndarray
    distances: np.ndarray
    objective: float
    lower_bound: float | None
    provenance: str

    def __post_init__(self) -> None:
        assignment = np.asarray(self.assignment, dtype=int)
        distances = np.asarray(self.distances, dtype=float)
        object.__setattr__(self, "assignment", assignment)
        object.__setattr__(self, "distances", distances)
        scen = self.partition.scenarios
        if assignment.shape != (scen.num_scenarios,):
            raise DimensionMismatch("assignment must map every scenario to one state")
        if assignment.min() < 0 or assignment.max() >= self.partition.num_states:
            raise ValueError("assignment indices out of range")
        _, nearest = nearest_center(scen.points, self.partition.centers)
        if np.max(np.abs(distances - nearest)) > 1e-9:
            raise ValueError("stored distances disagree with nearest-center distances")
        if abs(self.objective - float(scen.weights @ distances)) > 1e-9:
            raise ValueError("objective disagrees with weighted distances")

    @property
    def num_states(self) -> int:
        return self.partition.num_states

    def state_masses(self) -> np.ndarray:
        w = self.partition.scenarios.weights
        return np.bincount(self.assignment, weights=w, minlength=self.num_states)

    def to_dict(self) -> dict:
        scen = self.partition.scenarios
        return {
            "num_states": self.num_states,
            "tie_rule": "smallest-index",
            "centers": self.partition.centers.tolist(),
            "assignment": self.assignment.tolist(),
            "distances": self.distances.tolist(),
            "objective": self.objective,
            "lower_bound": self.lower_bound,
            "provenance": self.provenance,
            "scenarios": {
                "points": scen.points.tolist(),
                "weights": scen.weights.tolist(),
            },
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "QuantizationSolution":
        scen = ScenarioSet(
            np.asarray(payload["scenarios"]["points"], dtype=float),
            np.asarray(payload["scenarios"]["weights"], dtype=float),
        )
        partition = StatePartition(np.asarray(payload["centers"], dtype=float), scen)
        return cls(
            partition=partition,
            assignment=np.asarray(payload["assignment"], dtype=int),
            distances=np.asarray(payload["distances"], dtype=float),
            objective=float(payload["objective"]),
            lower_bound=None if payload.get("lower_bound") is None else float(payload["lower_bound"]),
            provenance=str(payload["provenance"]),
        )

    def dump_json(self, path: str | Path, *, metadata: dict | None = None) -> None:
        payload = self.to_dict()
        if metadata:
            payload["metadata"] = metadata
        Path(path).write_text(
            json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
