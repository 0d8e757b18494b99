"""Independent oracles used to cross-check the solvers.

Deliberately written with different algorithms (and mostly plain Python
arithmetic) than the package paths they verify: literal set-partition
enumeration against the subset-DP exact solver, and basic-solution
enumeration against the simplex.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


# --- set-partition enumeration ------------------------------------------------

def iter_set_partitions(count: int, max_blocks: int):
    """All partitions of range(count) into at most max_blocks blocks,
    generated via restricted growth strings."""
    labels = [0] * count

    def rec(position: int, used: int):
        if position == count:
            blocks = [[] for _ in range(used)]
            for index in range(count):
                blocks[labels[index]].append(index)
            yield [tuple(b) for b in blocks]
            return
        for label in range(used):
            labels[position] = label
            yield from rec(position + 1, used)
        if used < max_blocks:
            labels[position] = used
            yield from rec(position + 1, used + 1)

    yield from rec(0, 0)


def blocks_cost(points, weights, blocks) -> float:
    """Two-pass partition cost: barycentre per block, then weighted squared
    deviations. Pure Python on purpose."""
    dim = len(points[0])
    total = 0.0
    for block in blocks:
        mass = sum(weights[l] for l in block)
        centre = [
            sum(weights[l] * points[l][j] for l in block) / mass for j in range(dim)
        ]
        total += sum(
            weights[l] * sum((points[l][j] - centre[j]) ** 2 for j in range(dim))
            for l in block
        )
    return total


def best_partition_bruteforce(points, weights, max_blocks):
    """Exhaustive minimum over all set partitions with <= max_blocks blocks."""
    points = [list(map(float, p)) for p in points]
    weights = [float(w) for w in weights]
    best = math.inf
    best_blocks = None
    for blocks in iter_set_partitions(len(points), max_blocks):
        cost = blocks_cost(points, weights, blocks)
        if cost < best:
            best = cost
            best_blocks = blocks
    return best, best_blocks


def weighted_mean(points, weights, subset) -> list[float]:
    """Spreadsheet-style weighted average over a subset of rows."""
    dim = len(points[0])
    mass = sum(weights[l] for l in subset)
    return [sum(weights[l] * points[l][j] for l in subset) / mass for j in range(dim)]


# --- LP oracle: enumerate basic solutions -------------------------------------

def lp_vertex_oracle(lp) -> float:
    """Optimal objective of a bounded LP by enumerating basic solutions.

    Collects every row and finite bound as a hyperplane, forces equality rows
    active, and scans all choices of active sets of size n. Exponential, for
    tiny test instances only.
    """
    n = lp.num_vars
    planes = []  # (coeff vector, rhs, kind) with kind in {"eq", "ineq"}
    for row in lp.rows:
        a = np.zeros(n)
        for j, c in zip(row.indices, row.coeffs):
            a[j] += c
        planes.append((a, row.rhs, "eq" if row.sense == "=" else "ineq"))
    for j in range(n):
        unit = np.zeros(n)
        unit[j] = 1.0
        if np.isfinite(lp.lower[j]):
            planes.append((unit.copy(), lp.lower[j], "ineq"))
        if np.isfinite(lp.upper[j]):
            planes.append((unit.copy(), lp.upper[j], "ineq"))

    forced = [i for i, p in enumerate(planes) if p[2] == "eq"]
    optional = [i for i, p in enumerate(planes) if p[2] == "ineq"]
    need = n - len(forced)
    if need < 0:
        raise ValueError("oracle expects at most n equality rows")

    def feasible(x) -> bool:
        if np.any(x < lp.lower - 1e-7) or np.any(x > lp.upper + 1e-7):
            return False
        for row in lp.rows:
            activity = sum(c * x[j] for j, c in zip(row.indices, row.coeffs))
            if row.sense == "=" and abs(activity - row.rhs) > 1e-7:
                return False
            if row.sense == "<=" and activity > row.rhs + 1e-7:
                return False
            if row.sense == ">=" and activity < row.rhs - 1e-7:
                return False
        return True

    best = None
    for combo in itertools.combinations(optional, need):
        active = forced + list(combo)
        matrix = np.vstack([planes[i][0] for i in active])
        rhs = np.array([planes[i][1] for i in active])
        try:
            x = np.linalg.solve(matrix, rhs)
        except np.linalg.LinAlgError:
            continue
        if not feasible(x):
            continue
        value = float(lp.objective @ x)
        if best is None:
            best = value
        elif lp.sense == "max":
            best = max(best, value)
        else:
            best = min(best, value)
    if best is None:
        raise ValueError("oracle found no feasible vertex")
    return best
