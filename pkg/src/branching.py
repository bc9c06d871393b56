from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .bounds import lp_relaxation_bound
from .errors import InfeasibleNodeError, InvalidProblemError
from .model import CbqpInstance, as_bits, delta_matrix, reduce_fix, slacks

# (position, value, score)
Candidate = Tuple[int, int, float]

LOOKAHEAD_DEPTHS = {"lp4": 4, "lp8": 8, "freq4": 4, "freq8": 8}
DEFAULT_LP_ITER_CAP = 50


@dataclass(frozen=True)
class BranchDecision:
    variable: int  # original index
    position: int  # index in the node's reduced instance
    first_value: int
    score: float
    strategy: str


@dataclass(frozen=True, eq=False)
class FrequencyTable:
    counts: np.ndarray  # shape (n, 2)

    @property
    def size(self):
        return int(self.counts[0].sum()) if len(self.counts) else 0


def _decision(inst, position, value, score, strategy):
    return BranchDecision(inst.index_map[position], int(position), int(value), float(score), strategy)


def _flip_decision(inst, x_u, scores, strategy):
    # argmax keeps the lowest index on ties
    j = int(np.argmax(scores))
    return _decision(inst, j, 1 - int(x_u[j]), scores[j], strategy)


def most_violated_select(inst: CbqpInstance, x_u) -> Optional[BranchDecision]:
    """Branch towards satisfying the row with the smallest slack.

    Returns None when every slack is strictly positive.
    """
    bits = as_bits(x_u, inst.n)
    if inst.m == 0:
        return None
    s = slacks(inst, bits)
    i = int(np.argmin(s))
    if s[i] > 0:
        return None
    scores = delta_matrix(inst, bits)[i]
    return _flip_decision(inst, bits, scores, "mostviol")


def all_violated_select(inst: CbqpInstance, x_u) -> Optional[BranchDecision]:
    """Branch on the flip that most reduces the violated rows' left-hand sides."""
    bits = as_bits(x_u, inst.n)
    if inst.m == 0:
        return None
    violated = slacks(inst, bits) < 0
    if not violated.any():
        return None
    scores = delta_matrix(inst, bits)[violated].sum(axis=0)
    return _flip_decision(inst, bits, scores, "allviol")


def all_constraints_select(inst: CbqpInstance, x_u) -> BranchDecision:
    """Branch on the flip with the largest slack change summed over every row."""
    bits = as_bits(x_u, inst.n)
    scores = delta_matrix(inst, bits).sum(axis=0)
    return _flip_decision(inst, bits, scores, "allcst")


def lp_candidates(inst: CbqpInstance, x_u) -> List[Candidate]:
    """All free variables, flipped value, scored by |sum_i delta_ij| (descending)."""
    bits = as_bits(x_u, inst.n)
    scores = np.abs(delta_matrix(inst, bits).sum(axis=0))
    order = sorted(range(inst.n), key=lambda j: (-scores[j], j))
    return [(j, 1 - int(bits[j]), float(scores[j])) for j in order]


def lp_child_bound(inst: CbqpInstance, lp_iter_cap: int) -> float:
    """Capped LP bound of a child; an empty child counts as +inf."""
    try:
        return lp_relaxation_bound(inst, max_iterations=lp_iter_cap)
    except InfeasibleNodeError:
        return float("inf")


def lookahead_select(
    inst: CbqpInstance,
    candidates: Sequence[Candidate],
    k: int,
    lp_iter_cap: int = DEFAULT_LP_ITER_CAP,
    child_bound: Callable[[CbqpInstance, int], float] = lp_child_bound,
    strategy: str = "lookahead",
) -> BranchDecision:
    """Bound each candidate child in order; stop after k consecutive non-improvements."""
    if not candidates:
        raise InvalidProblemError("Look-ahead needs at least one candidate")
    if k < 1:
        raise InvalidProblemError("Look-ahead depth k must be at least 1")

    best, best_bound = None, None
    misses = 0
    for position, value, _ in candidates:
        bound = child_bound(reduce_fix(inst, position, value), lp_iter_cap)
        if best is None or bound > best_bound:
            best, best_bound = (position, value), bound
            misses = 0
        else:
            misses += 1
            if misses >= k:
                break
    return _decision(inst, best[0], best[1], best_bound, strategy)


def frequency_table(pool: Iterable[Sequence[int]]) -> FrequencyTable:
    """Count zeros and ones per variable over a pool of assignments."""
    rows = np.array([list(p) for p in pool], dtype=np.int64)
    if len(rows) == 0:
        raise InvalidProblemError("Frequency counting needs a nonempty pool")
    ones = rows.sum(axis=0)
    counts = np.stack([len(rows) - ones, ones], axis=1)
    return FrequencyTable(counts)


def frequency_candidates(pool: Iterable[Sequence[int]]) -> List[Candidate]:
    """(i, s) pairs by descending frequency of x_i == s across the pool."""
    table = frequency_table(pool)
    pairs = [(i, s, int(table.counts[i, s])) for i in range(len(table.counts)) for s in (1, 0)]
    pairs.sort(key=lambda p: (-p[2], p[0], -p[1]))
    return [(i, s, float(c)) for i, s, c in pairs]


def knapsack_count(coeffs: Sequence[int], rhs: int, fixed: Optional[Tuple[int, int]] = None) -> int:
    """Number of binary x with coeffs.x <= rhs (optionally with x_index fixed)."""
    coeffs = [int(c) for c in coeffs]
    target = int(rhs)
    free = list(range(len(coeffs)))
    if fixed is not None:
        index, value = fixed
        if not 0 <= index < len(coeffs):
            raise IndexError(f"Fixed index {index} out of range")
        target -= coeffs[index] * int(value)
        free.remove(index)

    # Only reachable partial sums are stored, so the table never exceeds 2^|free| keys.
    lowest_rest = sum(min(0, coeffs[j]) for j in free)
    reachable = Counter({0: 1})
    for j in free:
        c = coeffs[j]
        lowest_rest -= min(0, c)
        step = Counter()
        for total, count in reachable.items():
            for value in (total, total + c):
                # Drop sums that stay above the target even if every later negative term is taken.
                if value + lowest_rest <= target:
                    step[value] += count
        reachable = step
    return sum(count for total, count in reachable.items() if total <= target)


def solution_density(coeffs, rhs, index, value) -> Optional[Fraction]:
    """Share of a row's satisfying points that have x_index == value, or None for an empty row."""
    total = knapsack_count(coeffs, rhs)
    if total == 0:
        return None
    return Fraction(knapsack_count(coeffs, rhs, (index, value)), total)


def maxsd_select(inst: CbqpInstance) -> BranchDecision:
    """Pick the (variable, value) with the highest solution density over all rows."""
    if inst.m == 0:
        return _decision(inst, 0, 1, 0.5, "maxsd")
    totals = [knapsack_count(inst.a[c], inst.b[c]) for c in range(inst.m)]
    if any(total == 0 for total in totals):
        raise InfeasibleNodeError("A knapsack row has no satisfying assignment")

    best, best_sigma = None, None
    for i in range(inst.n):
        for d in (1, 0):
            for c in range(inst.m):
                sigma = Fraction(knapsack_count(inst.a[c], inst.b[c], (i, d)), totals[c])
                if best_sigma is None or sigma > best_sigma:
                    best, best_sigma = (i, d), sigma
    return _decision(inst, best[0], best[1], float(best_sigma), "maxsd")


def select_branch(
    strategy: str,
    inst: CbqpInstance,
    x_u,
    pool: Iterable[Sequence[int]] = (),
    lp_iter_cap: int = DEFAULT_LP_ITER_CAP,
) -> BranchDecision:
    """Dispatch on a strategy name; violation rules fall back to all-constraints."""
    if strategy == "mostviol":
        decision = most_violated_select(inst, x_u)
    elif strategy == "allviol":
        decision = all_violated_select(inst, x_u)
    elif strategy == "allcst":
        decision = all_constraints_select(inst, x_u)
    elif strategy in ("lp4", "lp8"):
        decision = lookahead_select(inst, lp_candidates(inst, x_u), LOOKAHEAD_DEPTHS[strategy], lp_iter_cap, strategy=strategy)
    elif strategy in ("freq4", "freq8"):
        pool = list(pool) or [tuple(int(v) for v in x_u)]
        candidates = frequency_candidates(pool)
        decision = lookahead_select(inst, candidates, LOOKAHEAD_DEPTHS[strategy], lp_iter_cap, strategy=strategy)
    elif strategy == "maxsd":
        decision = maxsd_select(inst)
    else:
        raise InvalidProblemError(f"Unknown branching strategy: {strategy}")

    if decision is None:
        fallback = all_constraints_select(inst, x_u)
        decision = BranchDecision(fallback.variable, fallback.position, fallback.first_value, fallback.score, f"{strategy}>allcst")
    return decision
