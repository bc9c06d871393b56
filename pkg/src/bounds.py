import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DimensionError, InfeasibleNodeError, InvalidProblemError
from .model import CbqpInstance, as_bits, evaluate_objective
from .oracle import DEFAULT_K_SPEC, UbqpInstance, UbqpOracle
from .simplex import LE, LpProblem, LpStatus, solve_lp

LAMBDA_GRID = 2 ** 20


@dataclass(frozen=True)
class DualParams:
    tau_conv: float = 1e-6
    tau_int: float = 1e-6
    max_cuts: int = 200
    k_spec: int = DEFAULT_K_SPEC


@dataclass
class Cut:
    objective: int
    residual: np.ndarray  # A x - b


@dataclass
class DualState:
    cuts: Dict[Tuple[int, ...], Cut] = field(default_factory=dict)
    lam: Tuple[Fraction, ...] = ()
    mu: float = math.inf
    best_dual: Optional[Fraction] = None
    lambda_upper: Optional[List[float]] = None
    iterations: int = 0
    queries: int = 0
    mu_history: List[float] = field(default_factory=list)


@dataclass
class BoundResult:
    bound: float
    bound_int: int
    certificate_lambda: Tuple[Fraction, ...]
    spectrum_pool: FrozenSet[Tuple[int, ...]]
    converged: bool
    minimizer: Tuple[int, ...]
    # Noise added by the oracle to the value behind ``bound``.
    inflation: int = 0
    state: Optional[DualState] = None


def integer_bound(bound, tau_int=1e-6) -> int:
    """Smallest integer not below ``bound - tau_int``; valid for integral data."""
    if isinstance(bound, Fraction):
        return math.ceil(bound - Fraction(tau_int))
    return math.ceil(bound - tau_int)


def solve_lp_relaxation(inst: CbqpInstance, max_iterations=None):
    """Solve the linearised relaxation; returns (bound including offset, x values).

    x values are None when the solve stopped at the iteration cap.
    Raises InfeasibleNodeError when the relaxation is infeasible.
    """
    n, m = inst.n, inst.m
    if n == 0:
        if (inst.b < 0).any():
            raise InfeasibleNodeError("Constraint violated by the empty assignment")
        return float(inst.offset), np.zeros(0)

    pairs = [(i, j) for i in range(n) for j in range(i + 1, n) if inst.q[i, j] != 0]
    width = n + len(pairs)
    # Minimisation is posed as maximisation of the negated objective.
    objective = np.zeros(width)
    objective[:n] = -np.diag(inst.q)
    for k, (i, j) in enumerate(pairs):
        objective[n + k] = -2.0 * int(inst.q[i, j])
    problem = LpProblem(objective=objective, bounds=[(0.0, 1.0)] * n + [(0.0, math.inf)] * len(pairs))
    for row in range(m):
        coeffs = np.zeros(width)
        coeffs[:n] = inst.a[row]
        problem.add_row(coeffs, LE, float(inst.b[row]))
    for k, (i, j) in enumerate(pairs):
        col = n + k
        if inst.q[i, j] > 0:
            coeffs = np.zeros(width)
            coeffs[[i, j, col]] = (1.0, 1.0, -1.0)
            problem.add_row(coeffs, LE, 1.0)
        else:
            for end in (i, j):
                coeffs = np.zeros(width)
                coeffs[[col, end]] = (1.0, -1.0)
                problem.add_row(coeffs, LE, 0.0)

    solution = solve_lp(problem, max_iterations=max_iterations)
    if solution.status == LpStatus.INFEASIBLE:
        raise InfeasibleNodeError("Linear relaxation is infeasible")
    if solution.status == LpStatus.OPTIMAL:
        return -solution.objective_value + inst.offset, solution.y[:n]
    # Capped solve: the negated upper bound is a valid lower bound.
    return -solution.bound + inst.offset, None


def lp_relaxation_bound(inst: CbqpInstance, max_iterations=None) -> float:
    """Lower bound from the linearised relaxation (offset included)."""
    bound, _ = solve_lp_relaxation(inst, max_iterations)
    return bound


def snap_multipliers(values, grid=LAMBDA_GRID, upper=None) -> Tuple[Fraction, ...]:
    """Round multipliers to the nearest multiple of 1/grid, clipped to [0, upper]."""
    snapped = []
    for k, value in enumerate(values):
        value = max(0.0, float(value))
        if upper is not None and math.isfinite(upper[k]):
            value = min(value, float(upper[k]))
        snapped.append(Fraction(round(value * grid), grid))
    return tuple(snapped)


def build_lagrangian_ubqp(inst: CbqpInstance, lam: Sequence) -> UbqpInstance:
    """UBQP whose objective is L(x, lambda) = x^T Q x + offset + lambda (A x - b)."""
    if len(lam) != inst.m:
        raise DimensionError(f"Expected {inst.m} multipliers, got {len(lam)}")
    lam = [Fraction(v) for v in lam]
    if any(v < 0 for v in lam):
        raise InvalidProblemError("Lagrange multipliers must be nonnegative")
    if inst.n == 0:
        raise DimensionError("Cannot build a UBQP for an instance without free variables")

    q = [[Fraction(int(v)) for v in row] for row in inst.q]
    for i, weight in enumerate(lam):
        if weight == 0:
            continue
        for j in range(inst.n):
            q[j][j] += weight * int(inst.a[i, j])
    offset = Fraction(inst.offset) - sum((w * int(b) for w, b in zip(lam, inst.b)), Fraction(0))
    return UbqpInstance(q, offset)


def lagrangian_value(inst: CbqpInstance, x, lam) -> Fraction:
    """Direct evaluation of L(x, lambda)."""
    bits = as_bits(x, inst.n)
    residual = inst.a @ bits - inst.b
    return evaluate_objective(inst, bits) + sum((Fraction(w) * int(r) for w, r in zip(lam, residual)), Fraction(0))


def default_lambda_upper(inst: CbqpInstance) -> List[float]:
    """u_i = 2 n max|q| + 1 for every constraint."""
    largest = int(np.abs(inst.q).max()) if inst.n else 0
    return [float(2 * inst.n * largest + 1)] * inst.m


def _restricted_lp(state: DualState, m: int) -> LpProblem:
    """maximize mu s.t. mu - lambda.(Ax - b) <= x^T Q x + offset for x in T."""
    objective = np.zeros(m + 1)
    objective[0] = 1.0
    upper = state.lambda_upper or [math.inf] * m
    problem = LpProblem(objective=objective, bounds=[(-math.inf, math.inf)] + [(0.0, u) for u in upper])
    for cut in state.cuts.values():
        coeffs = np.concatenate(([1.0], -cut.residual.astype(float)))
        problem.add_row(coeffs, LE, float(cut.objective))
    return problem


def _add_cut(state: DualState, inst: CbqpInstance, bits):
    bits = tuple(int(v) for v in bits)
    if bits in state.cuts:
        return False
    array = np.array(bits, dtype=np.int64)
    state.cuts[bits] = Cut(evaluate_objective(inst, array), inst.a @ array - inst.b)
    return True


def lagrangian_dual(inst: CbqpInstance, oracle: UbqpOracle, seed_solutions, params: DualParams = DualParams()) -> BoundResult:
    """Cutting-plane solution of the Lagrangian dual; the bound is always valid."""
    seeds = [tuple(int(v) for v in s) for s in seed_solutions]
    if not seeds:
        raise InvalidProblemError("The cut set needs at least one seed solution")
    if inst.n == 0:
        raise DimensionError("Cannot bound an instance without free variables")

    state = DualState()
    for seed in seeds:
        _add_cut(state, inst, seed)
    if not any((cut.residual <= 0).all() for cut in state.cuts.values()):
        state.lambda_upper = default_lambda_upper(inst)

    pool = set()
    minimizer = seeds[0]
    inflation = 0
    converged = False

    if inst.m == 0:
        spectrum = oracle.solve(build_lagrangian_ubqp(inst, ()), params.k_spec)
        state.queries = 1
        state.iterations = 1
        state.best_dual = spectrum.best.value
        state.mu = float(spectrum.best.value)
        pool.update(entry.bits for entry in spectrum)
        return BoundResult(
            bound=float(state.best_dual),
            bound_int=integer_bound(state.best_dual, params.tau_int),
            certificate_lambda=(),
            spectrum_pool=frozenset(pool),
            converged=True,
            minimizer=spectrum.best.bits,
            inflation=spectrum.perturbation,
            state=state,
        )

    certificate = tuple(Fraction(0) for _ in range(inst.m))
    while state.iterations < params.max_cuts:
        solution = solve_lp(_restricted_lp(state, inst.m))
        if solution.status == LpStatus.UNBOUNDED and state.lambda_upper is None:
            logging.warning("⚠️ Restricted dual LP is unbounded; retrying with finite multiplier bounds")
            state.lambda_upper = default_lambda_upper(inst)
            continue
        if solution.status != LpStatus.OPTIMAL:
            logging.warning(f"⚠️ Restricted dual LP ended with status {solution.status.value}")
            break

        state.iterations += 1
        state.mu = float(solution.y[0])
        state.mu_history.append(state.mu)
        state.lam = snap_multipliers(solution.y[1:], upper=state.lambda_upper)

        spectrum = oracle.solve(build_lagrangian_ubqp(inst, state.lam), params.k_spec)
        state.queries += 1
        pool.update(entry.bits for entry in spectrum)
        value = spectrum.best.value
        if state.best_dual is None or value > state.best_dual:
            state.best_dual = value
            certificate = state.lam
            minimizer = spectrum.best.bits
            inflation = spectrum.perturbation

        gap = state.mu - float(value)
        logging.debug(f"Dual iteration {state.iterations}: mu*={state.mu:.6f} d={float(value):.6f} gap={gap:.3g}")
        if gap <= params.tau_conv:
            converged = True
            break
        if not _add_cut(state, inst, spectrum.best.bits):
            logging.warning(f"⚠️ Oracle returned a known cut with gap {gap:.3g}; stopping dual loop")
            break

    if state.best_dual is None:
        # No oracle answer at all: fall back to the weakest valid statement, d(0).
        spectrum = oracle.solve(build_lagrangian_ubqp(inst, certificate), params.k_spec)
        state.queries += 1
        pool.update(entry.bits for entry in spectrum)
        state.best_dual = spectrum.best.value
        minimizer = spectrum.best.bits
        inflation = spectrum.perturbation

    return BoundResult(
        bound=float(state.best_dual),
        bound_int=integer_bound(state.best_dual, params.tau_int),
        certificate_lambda=certificate,
        spectrum_pool=frozenset(pool),
        converged=converged,
        minimizer=minimizer,
        inflation=inflation,
        state=state,
    )


@dataclass(frozen=True)
class QuadraticConstraint:
    """x^T Q x + c.x <= r."""

    q: Sequence[Sequence[int]]
    c: Sequence[int]
    r: int


def relax_quadratic_constraints(q0, constraints: Sequence[QuadraticConstraint], lam) -> UbqpInstance:
    """Fold lambda-weighted quadratic constraints into one UBQP."""
    n = len(q0)
    if len(lam) != len(constraints):
        raise DimensionError(f"Expected {len(constraints)} multipliers, got {len(lam)}")
    lam = [Fraction(v) for v in lam]
    if any(v < 0 for v in lam):
        raise InvalidProblemError("Lagrange multipliers must be nonnegative")

    q = [[Fraction(v) for v in row] for row in q0]
    offset = Fraction(0)
    for weight, constraint in zip(lam, constraints):
        if len(constraint.q) != n or any(len(row) != n for row in constraint.q) or len(constraint.c) != n:
            raise DimensionError("Constraint dimensions do not match the objective")
        for i in range(n):
            for j in range(n):
                q[i][j] += weight * constraint.q[i][j]
            q[i][i] += weight * constraint.c[i]
        offset -= weight * constraint.r
    return UbqpInstance(q, offset)
