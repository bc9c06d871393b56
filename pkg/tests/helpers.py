"""Independent brute-force references used to cross-check the solver."""

import itertools
import math
from fractions import Fraction

import numpy as np

from src.model import evaluate_objective, is_feasible
from src.simplex import EQ, GE, LE


def all_points(n):
    return itertools.product((0, 1), repeat=n)


def brute_force_min(inst):
    """(value, bits) of the best feasible point, or None when there is none."""
    best = None
    for bits in all_points(inst.n):
        if is_feasible(inst, bits):
            value = evaluate_objective(inst, bits)
            if best is None or (value, bits) < best:
                best = (value, bits)
    return best


def subproblem_optimum(inst):
    """Optimum of a (possibly reduced) instance, +inf when empty."""
    best = brute_force_min(inst)
    return math.inf if best is None else best[0]


def ubqp_min(u):
    return min(u.objective(bits) for bits in all_points(u.n))


def lagrangian_min(inst, lam):
    """min_x x^T Q x + offset + lam.(Ax - b) by enumeration."""
    best = None
    for bits in all_points(inst.n):
        x = np.array(bits, dtype=np.int64)
        residual = inst.a @ x - inst.b
        value = Fraction(evaluate_objective(inst, x)) + sum(
            (Fraction(w) * int(r) for w, r in zip(lam, residual)), Fraction(0)
        )
        best = value if best is None else min(best, value)
    return best


def grid_dual(inst, upper, step=Fraction(1, 4)):
    """max over a lambda grid in [0, upper]^m of the enumerated dual function."""
    count = int(Fraction(upper) / step)
    axis = [step * k for k in range(count + 1)]
    best = None
    for lam in itertools.product(axis, repeat=inst.m):
        value = lagrangian_min(inst, lam)
        best = value if best is None else max(best, value)
    return best


def solution_density_bruteforce(coeffs, rhs, index, value):
    total = 0
    matching = 0
    for bits in all_points(len(coeffs)):
        if sum(c * b for c, b in zip(coeffs, bits)) <= rhs:
            total += 1
            matching += bits[index] == value
    return None if total == 0 else Fraction(matching, total)


def _rows_with_bounds(problem):
    """All constraints as (g, relation, h), bounds included."""
    n = problem.num_vars
    rows = [(np.asarray(g, dtype=float), rel, float(h)) for g, rel, h in problem.rows]
    for k, (lower, upper) in enumerate(problem.bounds or [(0.0, math.inf)] * n):
        unit = np.zeros(n)
        unit[k] = 1.0
        if math.isfinite(lower):
            rows.append((unit, GE, lower))
        if math.isfinite(upper):
            rows.append((unit, LE, upper))
    return rows


def lp_vertex_optimum(problem, tolerance=1e-9):
    """Best objective over all basic feasible solutions; None when there is none.

    Only meaningful for bounded problems.
    """
    n = problem.num_vars
    rows = _rows_with_bounds(problem)
    c = np.asarray(problem.objective, dtype=float)
    best = None
    for chosen in itertools.combinations(range(len(rows)), n):
        g = np.array([rows[i][0] for i in chosen])
        if abs(np.linalg.det(g)) < 1e-12:
            continue
        y = np.linalg.solve(g, np.array([rows[i][2] for i in chosen]))
        feasible = True
        for coeffs, relation, rhs in rows:
            lhs = float(coeffs @ y)
            if relation == LE and lhs > rhs + tolerance:
                feasible = False
            elif relation == GE and lhs < rhs - tolerance:
                feasible = False
            elif relation == EQ and abs(lhs - rhs) > tolerance:
                feasible = False
            if not feasible:
                break
        if feasible:
            value = float(c @ y)
            best = value if best is None else max(best, value)
    return best


def single_row_dual(inst):
    """Exact max_{lambda >= 0} d(lambda) for m == 1 from the breakpoints of d."""
    lines = []
    for bits in all_points(inst.n):
        x = np.array(bits, dtype=np.int64)
        lines.append((Fraction(evaluate_objective(inst, x)), Fraction(int(inst.a[0] @ x - inst.b[0]))))

    def d(lam):
        return min(value + lam * slope for value, slope in lines)

    candidates = {Fraction(0)}
    for (v1, s1), (v2, s2) in itertools.combinations(lines, 2):
        if s1 != s2:
            lam = (v2 - v1) / (s1 - s2)
            if lam > 0:
                candidates.add(lam)
    return max(d(lam) for lam in candidates)
