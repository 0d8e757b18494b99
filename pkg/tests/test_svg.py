"""SVG rendering of 2-D partitions."""

import numpy as np
import pytest

from statemarket.errors import DimensionNotTwo
from statemarket.quantize import classify, export_partition_svg, solve_exact, solve_lloyd
from statemarket.scenarios import ScenarioSet


def random_set(seed, count, dim=2) -> ScenarioSet:
    rng = np.random.default_rng(seed)
    return ScenarioSet(rng.uniform(0, 10, (count, dim)), np.full(count, 1.0 / count))


def test_two_states_render_exactly_one_bisector(tmp_path):
    scen = random_set(60, 8)
    solution = solve_exact(scen, 2)
    out = tmp_path / "two.svg"
    export_partition_svg(solution, out)
    text = out.read_text()
    assert text.count('class="voronoi-edge"') == 1
    assert text.count('class="scenario"') == 8
    assert text.count('class="center"') == 2


def test_four_state_cells_contain_their_centers(tmp_path):
    scen = random_set(61, 12)
    solution = solve_lloyd(scen, 4, restarts=32, seed=0)
    export_partition_svg(solution, tmp_path / "four.svg")
    # every center classifies into its own cell, and a probe grid covers all 4
    seen = set()
    for s, center in enumerate(solution.partition.centers):
        assert classify(solution.partition, center) == s
    for gx in np.linspace(0, 10, 30):
        for gy in np.linspace(0, 10, 30):
            seen.add(classify(solution.partition, [gx, gy]))
    assert seen == set(range(4))
    assert (tmp_path / "four.svg").read_text().count('class="voronoi-edge"') >= 3


def test_rejects_non_planar_input(tmp_path):
    scen = random_set(62, 6, dim=3)
    solution = solve_exact(scen, 2)
    with pytest.raises(DimensionNotTwo):
        export_partition_svg(solution, tmp_path / "nope.svg")


def test_svg_deterministic(tmp_path):
    scen = random_set(63, 10)
    solution = solve_lloyd(scen, 3, restarts=8, seed=4)
    export_partition_svg(solution, tmp_path / "a.svg")
    export_partition_svg(solution, tmp_path / "b.svg")
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()
