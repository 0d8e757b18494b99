"""Dense bounded-variable two-phase primal simplex.

Small, deterministic LP solver used for welfare maximization and price
extraction. Bland's rule (smallest eligible index enters; smallest index
among minimum-ratio candidates leaves) guarantees termination and makes
results reproducible bit for bit. Row duals are reported in the user's
optimization sense, i.e. as the derivative of the optimal objective with
respect to the row right-hand side.

Designed for desk-scale instances (tens of rows); the basis is refactorized
every iteration, trading speed for numerical robustness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NumericalFailure

BASIC, AT_LOWER, AT_UPPER, FREE = 0, 1, 2, 3

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-7


@dataclass(frozen=True)
class LPRow:
    indices: tuple[int, ...]
    coeffs: tuple[float, ...]
    sense: str  # "<=", ">=", "="
    rhs: float

    def __post_init__(self) -> None:
        if self.sense not in ("<=", ">=", "="):
            raise ValueError(f"unknown row sense {self.sense!r}")
        if len(self.indices) != len(self.coeffs):
            raise ValueError("indices and coeffs must have equal length")


@dataclass(frozen=True)
class LinearProgram:
    """Sparse-row LP: optimize c'x subject to rows and variable bounds."""

    objective: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    rows: tuple[LPRow, ...]
    sense: str = "max"
    names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        c = np.asarray(self.objective, dtype=float)
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if self.sense not in ("max", "min"):
            raise ValueError(f"unknown objective sense {self.sense!r}")
        if not (c.shape == lo.shape == hi.shape):
            raise ValueError("objective and bounds must have matching shapes")
        if not np.all(np.isfinite(c)):
            raise ValueError("objective coefficients must be finite")
        if np.any(lo > hi):
            raise ValueError("some lower bound exceeds its upper bound")
        n = c.shape[0]
        for row in self.rows:
            if not np.all(np.isfinite(row.coeffs)) or not np.isfinite(row.rhs):
                raise ValueError("row coefficients must be finite")
            if any(j < 0 or j >= n for j in row.indices):
                raise ValueError("row references an unknown variable")

    @property
    def num_vars(self) -> int:
        return self.objective.shape[0]


@dataclass(frozen=True)
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None
    objective: float | None
    duals: np.ndarray | None
    reduced_costs: np.ndarray | None
    iterations: int


def _dense_matrix(lp: LinearProgram) -> tuple[np.ndarray, np.ndarray]:
    m, n = len(lp.rows), lp.num_vars
    matrix = np.zeros((m, n))
    rhs = np.empty(m)
    for i, row in enumerate(lp.rows):
        for j, coeff in zip(row.indices, row.coeffs):
            matrix[i, j] += coeff
        rhs[i] = row.rhs
    return matrix, rhs


class _Simplex:
    """Computational form: minimize c'v, A v = b, lo <= v <= hi.

    Columns are ordered structural, slack, artificial. Artificials carry the
    initial basis; after phase 1 they are pinned to [0, 0].
    """

    def __init__(self, lp: LinearProgram):
        struct, b = _dense_matrix(lp)
        m, n = struct.shape
        self.m, self.n_struct = m, n
        self.b = b

        slack_lo = np.empty(m)
        slack_hi = np.empty(m)
        for i, row in enumerate(lp.rows):
            if row.sense == "<=":
                slack_lo[i], slack_hi[i] = 0.0, np.inf
            elif row.sense == ">=":
                slack_lo[i], slack_hi[i] = -np.inf, 0.0
            else:
                slack_lo[i], slack_hi[i] = 0.0, 0.0

        self.lower = np.concatenate([lp.lower, slack_lo, np.zeros(m)])
        self.upper = np.concatenate([lp.upper, slack_hi, np.full(m, np.inf)])

        start = np.where(
            np.isfinite(self.lower[: n + m]),
            self.lower[: n + m],
            np.where(np.isfinite(self.upper[: n + m]), self.upper[: n + m], 0.0),
        )
        residual = b - struct @ start[:n] - start[n : n + m]
        sign = np.where(residual >= 0, 1.0, -1.0)
        self.A = np.hstack([struct, np.eye(m), np.diag(sign)])
        self.total = n + 2 * m

        self.status = np.empty(self.total, dtype=int)
        for j in range(n + m):
            if np.isfinite(self.lower[j]):
                self.status[j] = AT_LOWER
            elif np.isfinite(self.upper[j]):
                self.status[j] = AT_UPPER
            else:
                self.status[j] = FREE
        self.status[n + m :] = BASIC
        self.basis = list(range(n + m, self.total))
        self.iterations = 0
        self.scale = max(1.0, float(np.max(np.abs(b))) if m else 1.0)

    def _nonbasic_values(self) -> np.ndarray:
        values = np.zeros(self.total)
        at_lower = self.status == AT_LOWER
        at_upper = self.status == AT_UPPER
        values[at_lower] = self.lower[at_lower]
        values[at_upper] = self.upper[at_upper]
        return values

    def _solve_basis(self, rhs: np.ndarray, transpose: bool = False) -> np.ndarray:
        matrix = self.A[:, self.basis]
        try:
            return np.linalg.solve(matrix.T if transpose else matrix, rhs)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure(f"singular basis: {exc}") from exc

    def values(self) -> np.ndarray:
        v = self._nonbasic_values()
        x_basic = self._solve_basis(self.b - self.A @ v)
        v[self.basis] = x_basic
        return v

    def run(self, cost: np.ndarray, enterable: np.ndarray, max_iter: int) -> str:
        """Minimize cost over the current basis; returns 'optimal' or 'unbounded'."""
        tol = PIVOT_TOL * self.scale
        for _ in range(max_iter):
            self.iterations += 1
            v = self.values()
            y = self._solve_basis(cost[self.basis], transpose=True)
            reduced = cost - self.A.T @ y

            entering = -1
            direction = 0.0
            for j in range(self.total):
                if not enterable[j] or self.status[j] == BASIC:
                    continue
                if self.upper[j] - self.lower[j] <= 0.0:
                    continue  # fixed variables can never move
                if self.status[j] == AT_LOWER and reduced[j] < -tol:
                    entering, direction = j, 1.0
                    break
                if self.status[j] == AT_UPPER and reduced[j] > tol:
                    entering, direction = j, -1.0
                    break
                if self.status[j] == FREE and abs(reduced[j]) > tol:
                    entering, direction = j, (1.0 if reduced[j] < 0 else -1.0)
                    break
            if entering < 0:
                return "optimal"

            w = self._solve_basis(self.A[:, entering])
            span = self.upper[entering] - self.lower[entering]
            best_delta = span if np.isfinite(span) else np.inf
            leaving_pos = -1
            leaving_col = self.total  # sentinel larger than any real index
            hit_upper = False
            for pos, col in enumerate(self.basis):
                rate = -direction * w[pos]
                if rate > PIVOT_TOL:
                    if not np.isfinite(self.upper[col]):
                        continue
                    ratio = (self.upper[col] - v[col]) / rate
                    hits_upper = True
                elif rate < -PIVOT_TOL:
                    if not np.isfinite(self.lower[col]):
                        continue
                    ratio = (self.lower[col] - v[col]) / rate
                    hits_upper = False
                else:
                    continue
                ratio = max(ratio, 0.0)
                if ratio < best_delta - PIVOT_TOL or (
                    ratio < best_delta + PIVOT_TOL and col < leaving_col
                ):
                    best_delta = min(best_delta, ratio)
                    leaving_pos, leaving_col, hit_upper = pos, col, hits_upper

            if not np.isfinite(best_delta):
                return "unbounded"

            if leaving_pos < 0:
                # entering runs bound to bound without blocking any basic var
                self.status[entering] = AT_UPPER if direction > 0 else AT_LOWER
                continue
            self.basis[leaving_pos] = entering
            self.status[entering] = BASIC
            self.status[leaving_col] = AT_UPPER if hit_upper else AT_LOWER
        raise NumericalFailure(f"simplex exceeded {max_iter} iterations")


def solve_lp(lp: LinearProgram, max_iter: int | None = None) -> LPResult:
    """Solve to optimality and report primal values, row duals, reduced costs.

    Duals follow the user's sense (derivative of the optimum w.r.t. the row
    rhs); complementary slackness is verified to FEAS_TOL before returning.
    Raises NumericalFailure instead of returning silently wrong answers.
    """
    state = _Simplex(lp)
    n, m = state.n_struct, state.m
    if max_iter is None:
        max_iter = 200 * (state.total + 1)

    phase1_cost = np.zeros(state.total)
    phase1_cost[n + m :] = 1.0
    enterable = np.ones(state.total, dtype=bool)
    if state.run(phase1_cost, enterable, max_iter) != "optimal":
        raise NumericalFailure("phase 1 cannot be unbounded; numerical trouble")
    values = state.values()
    if float(np.abs(values[n + m :]).sum()) > FEAS_TOL * state.scale:
        return LPResult("infeasible", None, None, None, None, state.iterations)

    # pin artificials at zero; redundant rows keep theirs basic
    state.lower[n + m :] = 0.0
    state.upper[n + m :] = 0.0
    for pos in range(m):
        col = state.basis[pos]
        if col < n + m:
            continue
        for candidate in range(n + m):
            if state.status[candidate] == BASIC:
                continue
            w = state._solve_basis(state.A[:, candidate])
            if abs(w[pos]) > 1e-7:
                state.basis[pos] = candidate
                state.status[candidate] = BASIC
                state.status[col] = AT_LOWER
                break

    sign = -1.0 if lp.sense == "max" else 1.0
    cost = np.zeros(state.total)
    cost[:n] = sign * lp.objective
    enterable[n + m :] = False
    status = state.run(cost, enterable, max_iter)
    if status == "unbounded":
        return LPResult("unbounded", None, None, None, None, state.iterations)

    values = state.values()
    x = values[:n]
    y = state._solve_basis(cost[state.basis], transpose=True)
    reduced = cost - state.A.T @ y
    duals = sign * y
    reduced_user = sign * reduced[:n]
    objective = float(lp.objective @ x)

    _validate_solution(lp, state, x, values, duals, reduced_user)
    return LPResult("optimal", x, objective, duals, reduced_user, state.iterations)


def _validate_solution(lp, state, x, values, duals, reduced_user) -> None:
    """Primal feasibility, dual sign consistency, complementary slackness."""
    tol = FEAS_TOL * state.scale
    if np.any(x < lp.lower - tol) or np.any(x > lp.upper + tol):
        raise NumericalFailure("primal bounds violated at claimed optimum")
    matrix, rhs = _dense_matrix(lp)
    activity = matrix @ x if len(lp.rows) else np.zeros(0)
    for i, row in enumerate(lp.rows):
        residual = activity[i] - rhs[i]
        if row.sense == "=" and abs(residual) > tol:
            raise NumericalFailure(f"equality row {i} violated by {residual:.3e}")
        if row.sense == "<=" and residual > tol:
            raise NumericalFailure(f"row {i} violated by {residual:.3e}")
        if row.sense == ">=" and residual < -tol:
            raise NumericalFailure(f"row {i} violated by {residual:.3e}")
    # sign convention in the user's sense: improving directions must be blocked
    better = 1.0 if lp.sense == "max" else -1.0
    for j in range(lp.num_vars):
        r = better * reduced_user[j]
        slack_lo = x[j] - lp.lower[j]
        slack_hi = lp.upper[j] - x[j]
        if slack_lo > tol and slack_hi > tol and abs(r) > tol * 10:
            raise NumericalFailure(f"interior variable {j} has nonzero reduced cost")
        if slack_lo <= tol < slack_hi and r > tol * 10:
            raise NumericalFailure(f"variable {j} at lower bound wants to increase")
        if slack_hi <= tol < slack_lo and r < -tol * 10:
            raise NumericalFailure(f"variable {j} at upper bound wants to decrease")
