import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Set, Tuple

import numpy as np

from .errors import InfeasibleStartError
from .model import Assignment, CbqpInstance, as_bits, evaluate_objective, is_feasible, slacks

DEFAULT_RHO = 3
DEFAULT_MAX_POPS = 50_000


@dataclass
class SearchState:
    best: Assignment
    rho: int
    frontier: Deque[Tuple[int, ...]] = field(default_factory=deque)
    visited: Set[Tuple[int, ...]] = field(default_factory=set)
    pops: int = 0


def _loose(s):
    return set(np.flatnonzero(s > 0).tolist())


def is_interesting(inst: CbqpInstance, y, best, rho: int) -> bool:
    """No constraint violated by more than one unit, and
    |violated(y)| + |loose(y) ^ loose(best)| <= rho."""
    s_y = slacks(inst, y)
    if s_y.size and s_y.min() < -1:
        return False
    s_best = slacks(inst, best)
    violated = int((s_y < 0).sum())
    changed = len(_loose(s_y) ^ _loose(s_best))
    return violated + changed <= rho


def local_search(inst: CbqpInstance, z0, rho: int = DEFAULT_RHO, max_pops: int = DEFAULT_MAX_POPS) -> Assignment:
    """Return a feasible point no worse than z0."""
    start = tuple(int(v) for v in as_bits(z0, inst.n))
    if not is_feasible(inst, start):
        raise InfeasibleStartError("Local search needs a feasible starting point")

    state = SearchState(best=Assignment(start, evaluate_objective(inst, start)), rho=rho)
    state.frontier.append(start)
    state.visited.add(start)

    while state.frontier and state.pops < max_pops:
        x = state.frontier.popleft()
        state.pops += 1
        for j in range(inst.n):
            y = x[:j] + (1 - x[j],) + x[j + 1:]
            if y in state.visited:
                continue
            state.visited.add(y)
            if is_feasible(inst, y):
                value = evaluate_objective(inst, y)
                if value < state.best.value:
                    state.best = Assignment(y, value)
                    state.frontier.append(y)
                    break
            if is_interesting(inst, y, state.best.bits, rho):
                state.frontier.append(y)

    if state.frontier:
        logging.debug(f"Local search stopped at the expansion cap ({max_pops}) with value {state.best.value}")
    return state.best


def greedy_repair(inst: CbqpInstance, x, max_flips=None):
    """Flip variables to reduce total violation; returns a feasible point or None."""
    bits = list(int(v) for v in as_bits(x, inst.n))
    max_flips = inst.n * 2 if max_flips is None else max_flips

    def violation(s):
        return int(np.maximum(-s, 0).sum())

    current = violation(slacks(inst, bits))
    for _ in range(max_flips):
        if current == 0:
            return tuple(bits)
        best_j, best_violation = None, current
        for j in range(inst.n):
            bits[j] ^= 1
            candidate = violation(slacks(inst, bits))
            bits[j] ^= 1
            if candidate < best_violation:
                best_j, best_violation = j, candidate
        if best_j is None:
            return None
        bits[best_j] ^= 1
        current = best_violation
    return tuple(bits) if current == 0 else None
