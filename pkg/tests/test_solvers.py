"""Quantization solvers against independent oracles and solver properties."""

import numpy as np
import pytest

from statemarket.errors import DimensionNotOne, InstanceTooLarge
from statemarket.quantize import (
    partition_objective,
    size_of_state,
    solve_dp_1d,
    solve_exact,
    solve_lloyd,
)
from statemarket.quantize.solvers import _lloyd_single_run
from statemarket.scenarios import ScenarioSet, barycentre

from oracles import best_partition_bruteforce, blocks_cost


def equal_weight_set(points) -> ScenarioSet:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    count = points.shape[0]
    return ScenarioSet(points, np.full(count, 1.0 / count))


def random_set(rng, count, dim) -> ScenarioSet:
    points = rng.uniform(0.0, 10.0, (count, dim))
    raw = rng.random(count) + 0.1
    return ScenarioSet(points, raw / raw.sum())


def assert_centroidal(solution, tol=1e-9):
    scen = solution.partition.scenarios
    for s in range(solution.num_states):
        members = np.flatnonzero(solution.assignment == s)
        assert members.size > 0
        cell_centre = barycentre(scen, members)
        assert np.max(np.abs(cell_centre - solution.partition.centers[s])) <= tol


# --- solve_exact ---------------------------------------------------------------

def test_exact_single_state_is_mean_and_variance():
    rng = np.random.default_rng(2)
    scen = random_set(rng, 7, 2)
    solution = solve_exact(scen, 1)
    assert np.allclose(solution.partition.centers[0], scen.mean(), atol=1e-12)
    assert solution.objective == pytest.approx(
        size_of_state(scen, range(7)), abs=1e-12
    )
    assert solution.lower_bound == solution.objective


def test_exact_unit_square_two_states():
    scen = equal_weight_set([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    solution = solve_exact(scen, 2)
    assert solution.objective == pytest.approx(0.25, abs=1e-12)
    centers = {tuple(c) for c in solution.partition.centers}
    assert centers in (
        {(0.5, 0.0), (0.5, 1.0)},  # split along horizontal sides
        {(0.0, 0.5), (1.0, 0.5)},  # split along vertical sides
    )
    # verified against all 7 bipartitions
    best, _ = best_partition_bruteforce(
        scen.points.tolist(), scen.weights.tolist(), 2
    )
    assert best == pytest.approx(0.25, abs=1e-12)


def test_exact_perfect_quantization():
    rng = np.random.default_rng(4)
    scen = random_set(rng, 6, 2)
    solution = solve_exact(scen, 6)
    assert solution.objective == pytest.approx(0.0, abs=1e-12)


def test_exact_matches_bruteforce_on_random_instances():
    rng = np.random.default_rng(40)
    for _ in range(25):
        count = int(rng.integers(3, 9))
        dim = int(rng.integers(1, 4))
        states = int(rng.integers(1, min(count, 4) + 1))
        scen = random_set(rng, count, dim)
        solution = solve_exact(scen, states)
        best, _ = best_partition_bruteforce(
            scen.points.tolist(), scen.weights.tolist(), states
        )
        assert solution.objective == pytest.approx(best, abs=1e-9)
        # the returned blocks are themselves optimal under the oracle's formula
        blocks = [
            tuple(np.flatnonzero(solution.assignment == s))
            for s in range(solution.num_states)
        ]
        assert blocks_cost(
            scen.points.tolist(), scen.weights.tolist(), blocks
        ) == pytest.approx(best, abs=1e-9)
        assert_centroidal(solution)


def test_exact_instance_too_large():
    rng = np.random.default_rng(6)
    scen = random_set(rng, 13, 2)
    with pytest.raises(InstanceTooLarge):
        solve_exact(scen, 3)


def test_exact_delegates_to_dp_for_large_1d():
    rng = np.random.default_rng(7)
    scen = random_set(rng, 40, 1)
    solution = solve_exact(scen, 3)
    assert solution.provenance == "dp1d"
    assert solution.lower_bound == solution.objective


# --- solve_dp_1d ---------------------------------------------------------------

def test_dp1d_perfect_quantization():
    scen = equal_weight_set([[float(v)] for v in range(10)])
    solution = solve_dp_1d(scen, 10)
    assert solution.objective == pytest.approx(0.0, abs=1e-15)


def test_dp1d_two_cluster_example():
    scen = equal_weight_set([[0.0], [1.0], [8.0], [9.0]])
    solution = solve_dp_1d(scen, 2)
    assert solution.objective == pytest.approx(0.25, abs=1e-12)
    assert np.array_equal(solution.assignment, [0, 0, 1, 1])
    assert np.allclose(solution.partition.centers.ravel(), [0.5, 8.5])
    cross = solve_exact(scen, 2)
    assert cross.objective == pytest.approx(solution.objective, abs=1e-12)


def test_dp1d_single_state_is_variance():
    rng = np.random.default_rng(9)
    scen = random_set(rng, 12, 1)
    solution = solve_dp_1d(scen, 1)
    assert solution.objective == pytest.approx(
        size_of_state(scen, range(12)), abs=1e-12
    )


def test_dp1d_rejects_multidimensional():
    rng = np.random.default_rng(10)
    with pytest.raises(DimensionNotOne):
        solve_dp_1d(random_set(rng, 5, 2), 2)


def test_dp1d_agrees_with_exact_on_random_instances():
    rng = np.random.default_rng(41)
    for _ in range(20):
        count = int(rng.integers(3, 11))
        states = int(rng.integers(1, min(count, 4) + 1))
        scen = random_set(rng, count, 1)
        a = solve_dp_1d(scen, states)
        b = solve_exact(scen, states)
        assert a.objective == pytest.approx(b.objective, abs=1e-9)
        assert_centroidal(a)


def test_dp1d_handles_duplicate_points():
    scen = ScenarioSet(
        np.array([[1.0], [1.0], [5.0], [9.0]]), np.array([0.3, 0.3, 0.2, 0.2])
    )
    solution = solve_dp_1d(scen, 2)
    best, _ = best_partition_bruteforce(
        scen.points.tolist(), scen.weights.tolist(), 2
    )
    assert solution.objective == pytest.approx(best, abs=1e-12)


# --- solve_lloyd ---------------------------------------------------------------

def test_lloyd_single_state_is_mean():
    rng = np.random.default_rng(12)
    scen = random_set(rng, 9, 2)
    solution = solve_lloyd(scen, 1, restarts=1, seed=0)
    assert np.allclose(solution.partition.centers[0], scen.mean(), atol=1e-12)


def test_lloyd_deterministic_for_fixed_seed():
    rng = np.random.default_rng(13)
    scen = random_set(rng, 20, 2)
    a = solve_lloyd(scen, 4, restarts=8, seed=5)
    b = solve_lloyd(scen, 4, restarts=8, seed=5)
    assert np.array_equal(a.partition.centers, b.partition.centers)
    assert np.array_equal(a.assignment, b.assignment)
    assert a.objective == b.objective


def test_lloyd_never_beats_exact_and_usually_matches():
    rng = np.random.default_rng(42)
    hits = 0
    trials = 20
    for _ in range(trials):
        count = int(rng.integers(4, 11))
        states = int(rng.integers(2, min(count, 4) + 1))
        scen = random_set(rng, count, 2)
        exact = solve_exact(scen, states)
        heuristic = solve_lloyd(scen, states, restarts=64, seed=1)
        assert heuristic.objective >= exact.objective - 1e-9
        assert heuristic.objective <= 1.05 * exact.objective + 1e-9
        if heuristic.objective <= exact.objective + 1e-9:
            hits += 1
    assert hits >= 0.9 * trials


def test_lloyd_objective_monotone_within_run():
    rng = np.random.default_rng(14)
    scen = random_set(rng, 30, 2)
    for restart in range(5):
        gen = np.random.default_rng([3, restart])
        _, _, history = _lloyd_single_run(scen.points, scen.weights, 4, gen)
        assert all(b <= a + 1e-12 for a, b in zip(history, history[1:]))


def test_lloyd_converged_solution_is_centroidal():
    rng = np.random.default_rng(15)
    scen = random_set(rng, 25, 2)
    solution = solve_lloyd(scen, 3, restarts=16, seed=2)
    assert_centroidal(solution, tol=1e-9)
    assert solution.lower_bound is None
    assert solution.provenance == "lloyd"


# --- cross-solver properties ----------------------------------------------------

def test_objective_monotone_in_state_count():
    rng = np.random.default_rng(43)
    scen = random_set(rng, 9, 2)
    values = [solve_exact(scen, s).objective for s in range(1, 6)]
    assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))
    scen1 = random_set(rng, 30, 1)
    values1 = [solve_dp_1d(scen1, s).objective for s in range(1, 8)]
    assert all(b <= a + 1e-12 for a, b in zip(values1, values1[1:]))


def test_scale_equivariance():
    rng = np.random.default_rng(44)
    scen = random_set(rng, 8, 2)
    base = solve_exact(scen, 3)
    for factor in (0.5, 3.0):
        scaled = ScenarioSet(scen.points * factor, scen.weights)
        solution = solve_exact(scaled, 3)
        assert solution.objective == pytest.approx(
            factor**2 * base.objective, rel=1e-9
        )
        assert np.allclose(
            solution.partition.centers, factor * base.partition.centers, atol=1e-9
        )


def test_partition_objective_consistent_with_solver_objective():
    rng = np.random.default_rng(45)
    scen = random_set(rng, 10, 2)
    for solver in (lambda: solve_exact(scen, 3), lambda: solve_lloyd(scen, 3, 16, 0)):
        solution = solver()
        assert partition_objective(scen, solution.partition) == pytest.approx(
            solution.objective, abs=1e-9
        )
