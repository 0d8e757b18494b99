"""Welfare maximization, equilibrium prices, and property verification.

Binary commitments are cleared by exhaustive enumeration (hard cap, no
branch and bound): each assignment yields an LP whose balance-row duals are
the candidate contract prices. The welfare-maximal cell wins, ties going to
the lexicographically smallest binary vector. For purely convex programs the
outcome is a Walrasian equilibrium; with binaries the verification report
surfaces any agent that could deviate profitably at the posted prices.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ..errors import Infeasible, TooManyBinaries
from ..market import (
    AgentBid,
    ContractGrid,
    MarketDimensions,
    WelfareProgram,
    assemble_welfare,
    payment,
    valuation,
)
from .simplex import LinearProgram, LPResult, LPRow, solve_lp

MAX_BINARIES = 20
DEFAULT_TOL = 1e-6


@dataclass(frozen=True)
class VerificationReport:
    """Equilibrium diagnostics: residuals and per-agent best-response gaps."""

    balance_residual: float
    budget_residual: float
    gaps: dict[str, float]
    best_responses: dict[str, float]
    achieved: dict[str, float]
    negative_surplus_agents: tuple[str, ...]
    tolerance: float
    confirmed: bool

    def to_dict(self) -> dict:
        return {
            "balance_residual": self.balance_residual,
            "budget_residual": self.budget_residual,
            "gaps": dict(self.gaps),
            "best_responses": dict(self.best_responses),
            "achieved": dict(self.achieved),
            "negative_surplus_agents": list(self.negative_surplus_agents),
            "tolerance": self.tolerance,
            "confirmed": self.confirmed,
        }


@dataclass(frozen=True)
class ClearingResult:
    """Equilibrium allocation, prices, decisions, welfare, and verification."""

    dims: MarketDimensions
    agent_ids: tuple[str, ...]
    allocations: dict[str, ContractGrid]
    decisions: dict[str, dict[str, float]]
    prices: ContractGrid
    welfare: float
    surplus: dict[str, float]
    verification: VerificationReport

    def to_dict(self) -> dict:
        return {
            "dimensions": {
                "nodes": self.dims.nodes,
                "periods": self.dims.periods,
                "states": self.dims.states,
            },
            "agents": list(self.agent_ids),
            "allocations": {a: g.values.tolist() for a, g in self.allocations.items()},
            "decisions": {a: dict(z) for a, z in self.decisions.items()},
            "prices": self.prices.values.tolist(),
            "welfare": self.welfare,
            "surplus": dict(self.surplus),
            "verification": self.verification.to_dict(),
        }

    def dump_json(self, path: str | Path, *, metadata: dict | None = None) -> None:
        payload = self.to_dict()
        if metadata:
            payload["metadata"] = metadata
        Path(path).write_text(
            json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )


def build_lp(program: WelfareProgram, binary_values: Sequence[int]) -> LinearProgram:
    """LP for one enumeration cell: binaries substituted into row rhs."""
    lower = np.array([v.lower for v in program.variables])
    upper = np.array([v.upper for v in program.variables])
    objective = np.array([v.objective for v in program.variables])
    rows = []
    for row in program.rows:
        rhs = row.rhs
        for b_index, coeff in row.binary_terms:
            rhs -= coeff * binary_values[b_index]
        indices, coeffs = zip(*row.terms) if row.terms else ((), ())
        rows.append(LPRow(tuple(indices), tuple(coeffs), row.sense, rhs))
    return LinearProgram(
        objective=objective,
        lower=lower,
        upper=upper,
        rows=tuple(rows),
        sense="max",
    )


def _cell_constant(program: WelfareProgram, binary_values: Sequence[int]) -> float:
    extra = sum(c * binary_values[b] for b, c in program.binary_objective)
    return program.objective_constant + extra


def _maximize_welfare(
    program: WelfareProgram,
) -> tuple[float, tuple[int, ...], LPResult]:
    """Best (welfare, binary cell, LP solution); ties keep the lex-smallest cell.

    Cells are independent and could be solved in parallel; selection is a
    deterministic reduction either way.
    """
    if len(program.binaries) > MAX_BINARIES:
        raise TooManyBinaries(
            f"{len(program.binaries)} binary decisions exceed the enumeration cap "
            f"of {MAX_BINARIES}"
        )
    best = None
    for cell in itertools.product((0, 1), repeat=len(program.binaries)):
        outcome = solve_lp(build_lp(program, cell))
        if outcome.status != "optimal":
            continue
        welfare = outcome.objective + _cell_constant(program, cell)
        if best is None or welfare > best[0]:
            best = (welfare, cell, outcome)
    if best is None:
        raise Infeasible("no binary assignment admits a feasible allocation")
    return best


def clear(program: WelfareProgram, tol: float = DEFAULT_TOL) -> ClearingResult:
    """Clear the market: welfare-optimal allocation, dual prices, verification.

    Prices are the balance-row duals of the winning fixed-commitment LP;
    contracts nobody can trade are priced at zero. The verification report is
    populated by re-solving each agent's best response at the posted prices.
    """
    welfare, cell, outcome = _maximize_welfare(program)
    dims = program.dims

    prices_grid = np.zeros(dims.shape)
    for coord, row_index in program.balance_rows.items():
        prices_grid[coord] = outcome.duals[row_index] + 0.0  # drop negative zeros
    prices = ContractGrid(prices_grid)

    allocations: dict[str, ContractGrid] = {}
    decisions: dict[str, dict[str, float]] = {}
    surplus: dict[str, float] = {}
    for a, bid in enumerate(program.bids):
        grid = np.zeros(dims.shape)
        for coord in bid.utilities:
            grid[coord] = outcome.x[program.x_index[(a, coord)]]
        allocation = ContractGrid(grid)
        z: dict[str, float] = {}
        for d in bid.decisions:
            if d.kind == "binary":
                z[d.name] = float(cell[program.binaries.index((a, d.name))])
            else:
                z[d.name] = float(outcome.x[program.decision_index[(a, d.name)]])
        allocations[bid.agent_id] = allocation
        decisions[bid.agent_id] = z
        surplus[bid.agent_id] = valuation(bid, allocation, z) - payment(prices, allocation)

    verification = _verify(program, allocations, prices, surplus, tol)
    return ClearingResult(
        dims=dims,
        agent_ids=tuple(b.agent_id for b in program.bids),
        allocations=allocations,
        decisions=decisions,
        prices=prices,
        welfare=welfare,
        surplus=surplus,
        verification=verification,
    )


def _agent_binary_positions(program: WelfareProgram, agent: int) -> list[int]:
    return [i for i, (a, _) in enumerate(program.binaries) if a == agent]


def best_response_value(
    program: WelfareProgram, agent: int, prices: ContractGrid
) -> float:
    """max valuation - payment for one agent at fixed prices.

    Enumerates the agent's own binaries; each cell is a small LP over the
    agent's block only (no balance rows).
    """
    bid = program.bids[agent]
    local_vars = [
        i for i, v in enumerate(program.variables) if v.agent_index == agent
    ]
    remap = {global_i: local_i for local_i, global_i in enumerate(local_vars)}
    lower = np.array([program.variables[i].lower for i in local_vars])
    upper = np.array([program.variables[i].upper for i in local_vars])
    objective = np.array([program.variables[i].objective for i in local_vars])
    for coord in bid.utilities:
        objective[remap[program.x_index[(agent, coord)]]] -= prices.values[coord]

    own_rows = [row for row in program.rows if row.agent_index == agent]
    own_positions = _agent_binary_positions(program, agent)
    own_constant = {
        b: c for b, c in program.binary_objective if program.binaries[b][0] == agent
    }

    best = None
    for values in itertools.product((0, 1), repeat=len(own_positions)):
        assignment = dict(zip(own_positions, values))
        rows = []
        for row in own_rows:
            rhs = row.rhs - sum(
                c * assignment[b] for b, c in row.binary_terms
            )
            indices = tuple(remap[i] for i, _ in row.terms)
            coeffs = tuple(c for _, c in row.terms)
            rows.append(LPRow(indices, coeffs, row.sense, rhs))
        lp = LinearProgram(objective, lower, upper, tuple(rows), sense="max")
        outcome = solve_lp(lp)
        if outcome.status != "optimal":
            continue
        value = (
            outcome.objective
            + program.agent_constants[agent]
            + sum(c * assignment[b] for b, c in own_constant.items())
        )
        if best is None or value > best:
            best = value
    if best is None:
        raise Infeasible(f"agent {bid.agent_id!r} has no feasible position")
    return best


def _verify(
    program: WelfareProgram,
    allocations: Mapping[str, ContractGrid],
    prices: ContractGrid,
    surplus: Mapping[str, float],
    tol: float,
) -> VerificationReport:
    dims = program.dims
    net = np.zeros(dims.shape)
    payments_total = 0.0
    for grid in allocations.values():
        net += grid.values
    for bid in program.bids:
        payments_total += payment(prices, allocations[bid.agent_id])

    gaps: dict[str, float] = {}
    best_responses: dict[str, float] = {}
    achieved: dict[str, float] = {}
    for a, bid in enumerate(program.bids):
        best = best_response_value(program, a, prices)
        got = surplus[bid.agent_id]
        gaps[bid.agent_id] = best - got
        best_responses[bid.agent_id] = best
        achieved[bid.agent_id] = got

    negative = tuple(a for a, s in surplus.items() if s < -tol)
    return VerificationReport(
        balance_residual=float(np.max(np.abs(net))),
        budget_residual=abs(payments_total),
        gaps=gaps,
        best_responses=best_responses,
        achieved=achieved,
        negative_surplus_agents=negative,
        tolerance=tol,
        confirmed=all(g <= tol for g in gaps.values()),
    )


def verify_equilibrium(
    result: ClearingResult, program: WelfareProgram, tol: float = DEFAULT_TOL
) -> VerificationReport:
    """Re-run the equilibrium diagnostics for an existing result."""
    return _verify(program, result.allocations, result.prices, result.surplus, tol)


def welfare_equivalence_check(
    program: WelfareProgram, result: ClearingResult, tol: float = DEFAULT_TOL
) -> bool:
    """True iff a confirmed equilibrium achieves the centrally optimal welfare."""
    if not result.verification.confirmed:
        return False
    direct, _, _ = _maximize_welfare(program)
    return abs(result.welfare - direct) <= tol


def clear_bids(
    bids: Sequence[AgentBid], dims: MarketDimensions, tol: float = DEFAULT_TOL
) -> ClearingResult:
    return clear(assemble_welfare(bids, dims), tol)


def sweep_two_state_beliefs(
    bids: Sequence[AgentBid],
    dims: MarketDimensions,
    pi_values: Sequence[float],
    tol: float = DEFAULT_TOL,
) -> list[tuple[float, ClearingResult]]:
    """Clear the same market under common two-state beliefs (pi1, 1 - pi1)."""
    if dims.states != 2:
        raise ValueError("belief sweep requires exactly two states")
    results = []
    for pi1 in pi_values:
        beliefs = np.array([pi1, 1.0 - pi1])
        swept = [replace(bid, beliefs=beliefs) for bid in bids]
        results.append((float(pi1), clear_bids(swept, dims, tol)))
    return results
