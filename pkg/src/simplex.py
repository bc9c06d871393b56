"""Dense two-phase primal simplex for the small LPs used by the bounding code."""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidProblemError

TAU_LP = 1e-7

LE, GE, EQ = "<=", ">=", "="


class LpStatus(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    ITERATION_LIMIT = "IterationLimit"


@dataclass
class LpProblem:
    objective: Sequence[float]
    rows: List[Tuple[Sequence[float], str, float]] = field(default_factory=list)
    bounds: Optional[List[Tuple[float, float]]] = None

    @property
    def num_vars(self):
        return len(self.objective)

    def add_row(self, coeffs, relation, rhs):
        self.rows.append((coeffs, relation, rhs))


@dataclass
class LpSolution:
    status: LpStatus
    y: Optional[np.ndarray]
    objective_value: float
    iterations: int
    # Valid upper bound on the optimum; equals objective_value when Optimal.
    bound: float = math.inf


def _check_finite(values, what):
    array = np.asarray(values, dtype=float)
    if not np.isfinite(array).all():
        raise InvalidProblemError(f"{what} contains NaN or infinite entries")
    return array


class _StandardForm:
    """y = shift + M z with z >= 0, plus ``G z <= h`` rows and column upper bounds."""

    def __init__(self, problem: LpProblem):
        n = problem.num_vars
        c = _check_finite(problem.objective, "objective")
        bounds = problem.bounds or [(0.0, math.inf)] * n
        if len(bounds) != n:
            raise InvalidProblemError(f"Expected {n} bounds, got {len(bounds)}")

        columns = []  # (original variable, sign)
        column_upper = []
        shift = np.zeros(n)
        for k, (lower, upper) in enumerate(bounds):
            lower, upper = float(lower), float(upper)
            if math.isnan(lower) or math.isnan(upper) or lower == math.inf or upper == -math.inf:
                raise InvalidProblemError(f"Invalid bounds for variable {k}: ({lower}, {upper})")
            if lower > upper:
                raise InvalidProblemError(f"Variable {k} has lower bound above upper bound")
            if math.isfinite(lower):
                shift[k] = lower
                columns.append((k, 1.0))
                column_upper.append(upper - lower)
            elif math.isfinite(upper):
                shift[k] = upper
                columns.append((k, -1.0))
                column_upper.append(math.inf)
            else:
                columns.append((k, 1.0))
                column_upper.append(math.inf)
                columns.append((k, -1.0))
                column_upper.append(math.inf)

        mapping = np.zeros((n, len(columns)))
        for col, (k, sign) in enumerate(columns):
            mapping[k, col] = sign

        g_rows, h_rows = [], []
        for coeffs, relation, rhs in problem.rows:
            g = _check_finite(coeffs, "constraint row")
            if g.shape[0] != n:
                raise InvalidProblemError(f"Constraint row has {g.shape[0]} entries, expected {n}")
            rhs = float(_check_finite([rhs], "right-hand side")[0])
            g_z = g @ mapping
            h_z = rhs - g @ shift
            if relation == LE:
                g_rows.append(g_z)
                h_rows.append(h_z)
            elif relation == GE:
                g_rows.append(-g_z)
                h_rows.append(-h_z)
            elif relation == EQ:
                g_rows.append(g_z)
                h_rows.append(h_z)
                g_rows.append(-g_z)
                h_rows.append(-h_z)
            else:
                raise InvalidProblemError(f"Unknown relation {relation!r}")
        for col, upper in enumerate(column_upper):
            if math.isfinite(upper):
                row = np.zeros(len(columns))
                row[col] = 1.0
                g_rows.append(row)
                h_rows.append(upper)

        self.mapping = mapping
        self.shift = shift
        self.c = c
        self.c_z = c @ mapping
        self.constant = float(c @ shift)
        self.column_upper = np.array(column_upper)
        self.g = np.array(g_rows).reshape(len(g_rows), len(columns))
        self.h = np.array(h_rows, dtype=float)

    def to_original(self, z):
        return self.shift + self.mapping @ z


class SimplexSolver:
    """One solve of one problem; holds the tableau while it runs."""

    def __init__(self, problem: LpProblem, max_iterations=None, tolerance=TAU_LP):
        self.form = _StandardForm(problem)
        self.max_iterations = max_iterations
        self.tolerance = tolerance
        self.iterations = 0
        self.degenerate_pivots = 0
        self.use_bland = False
        self.best_bound = math.inf

        form = self.form
        rows, nz = form.g.shape
        self.rows = rows
        self.nz = nz
        # Rows with negative rhs are multiplied by -1 and receive an artificial.
        self.flipped = form.h < 0
        num_art = int(self.flipped.sum())
        self.slack_start = nz
        self.art_start = nz + rows
        width = nz + rows + num_art + 1
        # Tableau rows: constraints, then phase-2 and phase-1 objective rows.
        tableau = np.zeros((rows + 2, width))
        self.basis = []
        art = self.art_start
        for i in range(rows):
            sign = -1.0 if self.flipped[i] else 1.0
            tableau[i, :nz] = sign * form.g[i]
            tableau[i, self.slack_start + i] = sign
            tableau[i, -1] = sign * form.h[i]
            if self.flipped[i]:
                tableau[i, art] = 1.0
                self.basis.append(art)
                art += 1
            else:
                self.basis.append(self.slack_start + i)
        self.obj_row = rows
        self.art_row = rows + 1
        tableau[self.obj_row, :nz] = -form.c_z
        tableau[self.art_row, self.art_start:-1] = 1.0
        for i in range(rows):
            if self.flipped[i]:
                tableau[self.art_row] -= tableau[i]
        self.tableau = tableau
        self.degeneracy_limit = 2 * (rows + width - 1)

    def _pivot(self, row, col):
        t = self.tableau
        t[row] /= t[row, col]
        factors = t[:, col].copy()
        factors[row] = 0.0
        t -= np.outer(factors, t[row])
        self.basis[row] = col

    def _choose_row(self, col):
        column = self.tableau[: self.rows, col]
        candidates = np.flatnonzero(column > self.tolerance)
        if candidates.size == 0:
            return None, 0.0
        ratios = self.tableau[candidates, -1] / column[candidates]
        best = ratios.min()
        ties = candidates[ratios <= best + self.tolerance]
        row = min(ties, key=lambda r: self.basis[r])
        return int(row), float(best)

    def _dual_bound(self, multipliers=None):
        """Upper bound on the phase-2 optimum from nonnegative row multipliers.

        The reduced cost of a slack column is the multiplier of its row in
        ``G z <= h`` whether or not the tableau row was negated.
        """
        form = self.form
        if multipliers is None:
            multipliers = self.tableau[self.obj_row, self.slack_start:self.art_start]
        multipliers = np.maximum(multipliers, 0.0)
        reduced = form.c_z - multipliers @ form.g
        gains = np.maximum(reduced, 0.0)
        positive = gains > self.tolerance
        if (positive & ~np.isfinite(form.column_upper)).any():
            return math.inf
        upper = np.where(np.isfinite(form.column_upper), form.column_upper, 0.0)
        return float(multipliers @ form.h + gains @ upper) + form.constant

    def _run(self, objective_row, allowed):
        """Pivot until optimal; returns a status."""
        t = self.tableau
        while True:
            if objective_row == self.obj_row and self.max_iterations is not None:
                self.best_bound = min(self.best_bound, self._dual_bound())
            costs = t[objective_row, :-1]
            entering = np.flatnonzero(allowed & (costs < -self.tolerance))
            if entering.size == 0:
                return LpStatus.OPTIMAL
            if self.max_iterations is not None and self.iterations >= self.max_iterations:
                return LpStatus.ITERATION_LIMIT
            if self.use_bland:
                col = int(entering[0])
            else:
                col = int(entering[np.argmin(costs[entering])])
            row, ratio = self._choose_row(col)
            if row is None:
                return LpStatus.UNBOUNDED
            if ratio <= self.tolerance:
                self.degenerate_pivots += 1
                if not self.use_bland and self.degenerate_pivots > self.degeneracy_limit:
                    logging.debug("Switching to Bland's rule after %d degenerate pivots", self.degenerate_pivots)
                    self.use_bland = True
            self._pivot(row, col)
            self.iterations += 1

    def _drive_out_artificials(self):
        for row in range(self.rows):
            if self.basis[row] < self.art_start:
                continue
            entries = self.tableau[row, : self.art_start]
            candidates = np.flatnonzero(np.abs(entries) > self.tolerance)
            if candidates.size:
                self._pivot(row, int(candidates[0]))

    def _primal(self):
        z = np.zeros(self.nz)
        for row, col in enumerate(self.basis):
            if col < self.nz:
                z[col] = self.tableau[row, -1]
        return self.form.to_original(z)

    def _limit_solution(self):
        bound = min(self.best_bound, self._dual_bound(np.zeros(self.rows)))
        return LpSolution(LpStatus.ITERATION_LIMIT, None, bound, self.iterations, bound)

    def solve(self) -> LpSolution:
        width = self.tableau.shape[1] - 1
        if self.flipped.any():
            phase_one_allowed = np.ones(width, dtype=bool)
            status = self._run(self.art_row, phase_one_allowed)
            if status == LpStatus.ITERATION_LIMIT:
                return self._limit_solution()
            if -self.tableau[self.art_row, -1] > self.tolerance * max(1.0, np.abs(self.form.h).max()):
                return LpSolution(LpStatus.INFEASIBLE, None, math.nan, self.iterations, -math.inf)
            self._drive_out_artificials()

        allowed = np.zeros(width, dtype=bool)
        allowed[: self.art_start] = True
        status = self._run(self.obj_row, allowed)
        if status == LpStatus.UNBOUNDED:
            return LpSolution(status, None, math.inf, self.iterations, math.inf)
        if status == LpStatus.ITERATION_LIMIT:
            y = self._primal()
            solution = self._limit_solution()
            solution.y = y
            return solution
        y = self._primal()
        value = float(self.form.c @ y)
        return LpSolution(LpStatus.OPTIMAL, y, value, self.iterations, value)


def solve_lp(problem: LpProblem, max_iterations=None) -> LpSolution:
    """Solve ``problem``; with ``max_iterations`` the solve may stop early.

    An IterationLimit result carries in ``bound`` (and ``objective_value``) the
    smallest valid upper bound on the optimum seen while pivoting.
    """
    if max_iterations is not None and max_iterations < 0:
        raise InvalidProblemError("max_iterations must be nonnegative")
    return SimplexSolver(problem, max_iterations=max_iterations).solve()


def max_violation(problem: LpProblem, y) -> float:
    """Largest constraint or bound violation of y."""
    y = np.asarray(y, dtype=float)
    worst = 0.0
    for coeffs, relation, rhs in problem.rows:
        lhs = float(np.dot(coeffs, y))
        if relation == LE:
            worst = max(worst, lhs - rhs)
        elif relation == GE:
            worst = max(worst, rhs - lhs)
        else:
            worst = max(worst, abs(lhs - rhs))
    for value, (lower, upper) in zip(y, problem.bounds or [(0.0, math.inf)] * len(y)):
        worst = max(worst, lower - value, value - upper)
    return worst
