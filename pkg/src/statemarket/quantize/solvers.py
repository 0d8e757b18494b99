"""Solvers for the minimal-size partitioning (location) problem.

Three routes, all minimizing the probability-weighted squared distance of
scenario points to their nearest center:

* ``solve_exact`` — globally optimal at desk scale via dynamic programming
  over point subsets; examines every set partition into exactly S blocks,
  with each block's center placed at its barycentre (optimal for squared
  Euclidean cost).
* ``solve_dp_1d`` — exact for one-dimensional measures at any scale; optimal
  1-D clusters are contiguous in sorted order, so an O(S L^2) DP suffices.
* ``solve_lloyd`` — weighted k-means++ seeding plus Lloyd iterations, best of
  a fixed number of restarts; the production path for larger instances.

All solvers are deterministic and order returned states lexicographically by
center coordinates, so equal optima produce identical partitions.
"""

from __future__ import annotations

import numpy as np

from ..errors import DimensionNotOne, InstanceTooLarge, SExceedsSupport
from ..scenarios import ScenarioSet
from .partition import QuantizationSolution, StatePartition, nearest_center

# Bell-number growth caps the subset DP; beyond this use lloyd (or dp1d in 1-D).
EXACT_LIMIT = 12
LLOYD_MAX_ITERATIONS = 1000


def _distinct_support(points: np.ndarray) -> int:
    return np.unique(points, axis=0).shape[0]


def _check_states(scenarios: ScenarioSet, num_states: int) -> None:
    if num_states < 1:
        raise ValueError(f"number of states must be >= 1, got {num_states}")
    support = _distinct_support(scenarios.points)
    if num_states > support:
        raise SExceedsSupport(
            f"requested {num_states} states but support has only {support} distinct points"
        )


def _finalize(
    scenarios: ScenarioSet,
    centers: np.ndarray,
    assignment: np.ndarray,
    provenance: str,
    *,
    certified: bool,
) -> QuantizationSolution:
    """Order states lexicographically by center and package the solution."""
    order = np.lexsort(centers.T[::-1])
    centers = centers[order]
    relabel = np.empty(order.shape[0], dtype=int)
    relabel[order] = np.arange(order.shape[0])
    assignment = relabel[assignment]
    diff = scenarios.points - centers[assignment]
    distances = np.einsum("lk,lk->l", diff, diff)
    objective = float(scenarios.weights @ distances)
    partition = StatePartition(centers=centers, scenarios=scenarios)
    return QuantizationSolution(
        partition=partition,
        assignment=assignment,
        distances=distances,
        objective=objective,
        lower_bound=objective if certified else None,
        provenance=provenance,
    )


def _cell_barycentres(points, weights, assignment, num_states):
    centers = np.empty((num_states, points.shape[1]))
    for s in range(num_states):
        members = assignment == s
        w = weights[members]
        centers[s] = (w @ points[members]) / w.sum()
    return centers


# --- exact solver: DP over point subsets -----------------------------------

def _subset_costs(points: np.ndarray, weights: np.ndarray) -> list[float]:
    """Weighted SSE around the barycentre for every subset bitmask."""
    total_w = np.zeros(1)
    moment = np.zeros((1, points.shape[1]))
    sumsq = np.zeros(1)
    for l in range(points.shape[0]):
        w = weights[l]
        total_w = np.concatenate([total_w, total_w + w])
        moment = np.vstack([moment, moment + w * points[l]])
        sumsq = np.concatenate([sumsq, sumsq + w * float(points[l] @ points[l])])
    safe_w = np.where(total_w > 0, total_w, 1.0)
    cost = sumsq - np.einsum("mk,mk->m", moment, moment) / safe_w
    np.maximum(cost, 0.0, out=cost)  # guard cancellation noise
    cost[0] = np.inf
    return cost.tolist()


def _optimal_blocks(points: np.ndarray, weights: np.ndarray, num_states: int) -> list[int]:
    """Minimum-cost partition of all points into exactly ``num_states`` blocks.

    f[s][mask] is the best cost of splitting ``mask`` into s non-empty blocks;
    the block containing the lowest set bit is enumerated explicitly, which
    visits every set partition exactly once. Returns the blocks as bitmasks.
    """
    length = points.shape[0]
    full = (1 << length) - 1
    cost = _subset_costs(points, weights)
    if num_states == 1:
        return [full]
    popcount = [bin(m).count("1") for m in range(full + 1)]
    inf = float("inf")
    f_prev = cost[:]
    choices: list[list[int]] = []
    for s in range(2, num_states + 1):
        f_cur = [inf] * (full + 1)
        choice = [0] * (full + 1)
        for mask in range(1, full + 1):
            if popcount[mask] < s:
                continue
            low = mask & (-mask)
            rest = mask ^ low
            best = inf
            best_block = 0
            sub = rest
            while True:
                block = sub | low
                remainder_cost = f_prev[mask ^ block]
                if remainder_cost < inf:
                    cand = remainder_cost + cost[block]
                    if cand < best:
                        best = cand
                        best_block = block
                if sub == 0:
                    break
                sub = (sub - 1) & rest
            f_cur[mask] = best
            choice[mask] = best_block
        choices.append(choice)
        f_prev = f_cur

    blocks = []
    mask = full
    for level in range(num_states - 2, -1, -1):
        block = choices[level][mask]
        blocks.append(block)
        mask ^= block
    blocks.append(mask)
    return blocks


def solve_exact(
    scenarios: ScenarioSet, num_states: int, *, exact_limit: int = EXACT_LIMIT
) -> QuantizationSolution:
    """Globally optimal partition by exhaustive-equivalent subset DP.

    Guaranteed optimal for L <= ``exact_limit``; one-dimensional measures of
    any size delegate to the 1-D DP, which is also exact. The reported lower
    bound equals the objective.
    """
    _check_states(scenarios, num_states)
    length = scenarios.num_scenarios
    if length > exact_limit:
        if scenarios.dimension == 1:
            return solve_dp_1d(scenarios, num_states)
        raise InstanceTooLarge(
            f"L={length} exceeds the exact-solver limit {exact_limit} for k>=2"
        )
    blocks = _optimal_blocks(scenarios.points, scenarios.weights, num_states)
    assignment = np.empty(length, dtype=int)
    for index, block in enumerate(blocks):
        for l in range(length):
            if block >> l & 1:
                assignment[l] = index
    centers = _cell_barycentres(
        scenarios.points, scenarios.weights, assignment, num_states
    )
    return _finalize(scenarios, centers, assignment, "oracle", certified=True)


# --- exact 1-D solver: contiguous-cluster DP --------------------------------

def solve_dp_1d(scenarios: ScenarioSet, num_states: int) -> QuantizationSolution:
    """Exact optimum for k=1 via DP over sorted points, O(S L^2).

    Optimal 1-D clusters under squared Euclidean cost are contiguous once
    points are sorted, so it suffices to choose S-1 split positions.
    """
    if scenarios.dimension != 1:
        raise DimensionNotOne(f"dp1d requires k=1, got k={scenarios.dimension}")
    _check_states(scenarios, num_states)
    values = scenarios.points[:, 0]
    order = np.argsort(values, kind="stable")
    x = values[order]
    w = scenarios.weights[order]

    cum_w = np.concatenate([[0.0], np.cumsum(w)])
    cum_wx = np.concatenate([[0.0], np.cumsum(w * x)])
    cum_wx2 = np.concatenate([[0.0], np.cumsum(w * x * x)])

    def range_cost(i: np.ndarray, j: int) -> np.ndarray:
        # weighted SSE of sorted slice [i, j)
        weight = cum_w[j] - cum_w[i]
        mean_term = (cum_wx[j] - cum_wx[i]) ** 2 / weight
        return np.maximum(cum_wx2[j] - cum_wx2[i] - mean_term, 0.0)

    length = x.shape[0]
    inf = float("inf")
    best = np.full((num_states + 1, length + 1), inf)
    split = np.zeros((num_states + 1, length + 1), dtype=int)
    best[0, 0] = 0.0
    for s in range(1, num_states + 1):
        for j in range(s, length + 1):
            i = np.arange(s - 1, j)
            candidates = best[s - 1, i] + range_cost(i, j)
            pick = int(np.argmin(candidates))  # smallest split index on ties
            best[s, j] = candidates[pick]
            split[s, j] = i[pick]

    assignment_sorted = np.empty(length, dtype=int)
    j = length
    for s in range(num_states, 0, -1):
        i = split[s, j]
        assignment_sorted[i:j] = s - 1
        j = i
    assignment = np.empty(length, dtype=int)
    assignment[order] = assignment_sorted
    centers = _cell_barycentres(
        scenarios.points, scenarios.weights, assignment, num_states
    )
    return _finalize(scenarios, centers, assignment, "dp1d", certified=True)


# --- Lloyd heuristic ---------------------------------------------------------

def _weighted_draw(rng: np.random.Generator, mass: np.ndarray) -> int:
    cumulative = np.cumsum(mass)
    u = rng.random() * cumulative[-1]
    return min(int(np.searchsorted(cumulative, u, side="right")), mass.shape[0] - 1)


def _seed_centers(
    points: np.ndarray, weights: np.ndarray, num_states: int, rng: np.random.Generator
) -> np.ndarray:
    """Weighted k-means++ seeding: sampling mass = weight * distance^2."""
    chosen = [_weighted_draw(rng, weights)]
    d2 = np.einsum("lk,lk->l", points - points[chosen[0]], points - points[chosen[0]])
    while len(chosen) < num_states:
        index = _weighted_draw(rng, weights * d2)
        chosen.append(index)
        diff = points - points[index]
        d2 = np.minimum(d2, np.einsum("lk,lk->l", diff, diff))
    return points[chosen].astype(float).copy()


def _assign_with_repair(points, weights, centers, num_states):
    """Nearest-center assignment; empty states are repaired by relocating the
    center onto the worst-served point, which strictly lowers the objective."""
    while True:
        assignment, d2 = nearest_center(points, centers)
        occupied = np.bincount(assignment, minlength=num_states) > 0
        if occupied.all():
            return assignment, d2, centers
        empty = int(np.flatnonzero(~occupied)[0])
        centers = centers.copy()
        centers[empty] = points[int(np.argmax(d2))]


def _lloyd_single_run(points, weights, num_states, rng):
    """One seeded Lloyd run; returns (centers, assignment, objective history).

    Terminates on an assignment fixed point, which exists because the
    objective strictly decreases until the assignment repeats.
    """
    centers = _seed_centers(points, weights, num_states, rng)
    assignment, d2, centers = _assign_with_repair(points, weights, centers, num_states)
    history = [float(weights @ d2)]
    for _ in range(LLOYD_MAX_ITERATIONS):
        centers = _cell_barycentres(points, weights, assignment, num_states)
        new_assignment, d2, centers = _assign_with_repair(
            points, weights, centers, num_states
        )
        history.append(float(weights @ d2))
        if np.array_equal(new_assignment, assignment):
            break
        assignment = new_assignment
    return centers, assignment, history


def solve_lloyd(
    scenarios: ScenarioSet,
    num_states: int,
    restarts: int = 64,
    seed: int = 0,
) -> QuantizationSolution:
    """Best of ``restarts`` independent Lloyd runs; deterministic for a seed.

    Restart r uses the child stream (seed, r), so runs are independent and
    could execute in parallel; ties go to the lowest restart index.
    """
    _check_states(scenarios, num_states)
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    points, weights = scenarios.points, scenarios.weights
    best = None
    for restart in range(restarts):
        rng = np.random.default_rng([seed, restart])
        centers, assignment, history = _lloyd_single_run(
            points, weights, num_states, rng
        )
        if best is None or history[-1] < best[0]:
            best = (history[-1], centers, assignment)
    _, centers, assignment = best
    return _finalize(scenarios, centers, assignment, "lloyd", certified=False)
