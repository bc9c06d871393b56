import numpy as np
import pytest

import src.heuristic as heuristic
from src.errors import InfeasibleStartError
from src.heuristic import greedy_repair, is_interesting, local_search
from src.model import evaluate_objective, is_feasible, make_instance
from src.workbench import GenSpec, generate


def test_local_search_reaches_optimum_on_tiny(tiny_instance):
    """From the origin the search walks to (1, 0, 1)"""
    best = local_search(tiny_instance, (0, 0, 0))
    assert best.bits == (1, 0, 1)
    assert best.value == -7


def test_local_search_rejects_infeasible_start(tiny_instance):
    """The starting point must be feasible"""
    with pytest.raises(InfeasibleStartError):
        local_search(tiny_instance, (1, 1, 1))


def test_local_search_is_feasible_and_non_worsening():
    """Outputs are feasible and never worse than the start"""
    rng = np.random.default_rng(21)
    for k in range(200):
        generated = generate(GenSpec(n=int(rng.integers(4, 11)), seed=500 + k))
        inst = generated.instance
        start = generated.witness
        best = local_search(inst, start, rho=int(rng.integers(0, 4)), max_pops=2000)
        assert is_feasible(inst, best.bits)
        assert best.value == evaluate_objective(inst, best.bits)
        assert best.value <= evaluate_objective(inst, start)


def test_rho_zero_admits_no_infeasible_neighbour(tiny_instance):
    """With rho == 0 a violated neighbour is never interesting"""
    assert not is_interesting(tiny_instance, (0, 1, 1), (1, 0, 0), 0)


def test_interesting_rejects_large_violation(tiny_instance):
    """No constraint may be violated by more than one unit"""
    assert not is_interesting(tiny_instance, (1, 1, 1), (1, 0, 0), 10)


def test_interesting_counts_violations_and_loose_changes():
    """|violated| + |loose(y) ^ loose(best)| <= rho"""
    inst = make_instance(q=[[0, 0], [0, 0]], a=[[1, 1], [1, 0]], b=[1, 1])
    # y = (1, 1): row 0 violated by one; row 1 tight. best = (0, 0): both rows loose.
    assert is_interesting(inst, (1, 1), (0, 0), 3)
    assert not is_interesting(inst, (1, 1), (0, 0), 2)


def test_expansion_cap_is_respected(mocker):
    """max_pops bounds the number of expanded frontier points"""
    inst = make_instance(q=np.zeros((6, 6), dtype=int).tolist())
    feasible = mocker.spy(heuristic, "is_feasible")
    local_search(inst, (0,) * 6, rho=3, max_pops=1)
    # One expansion scans at most n neighbours plus the start check.
    assert feasible.call_count <= 7


def test_greedy_repair_finds_feasible_point(tiny_instance):
    """Flipping reduces violation until feasible"""
    repaired = greedy_repair(tiny_instance, (1, 1, 1))
    assert repaired is not None
    assert is_feasible(tiny_instance, repaired)


def test_greedy_repair_gives_up_on_impossible_rows(infeasible_instance):
    """No flip can satisfy x_0 <= -1"""
    assert greedy_repair(infeasible_instance, (0,)) is None


def test_greedy_repair_keeps_feasible_point(tiny_instance):
    """A feasible start is returned unchanged"""
    assert greedy_repair(tiny_instance, (0, 1, 0)) == (0, 1, 0)


def test_single_improving_flip():
    """Q=[[0,0],[0,-5]], A=[[1,1]], b=[1] from the origin gives (0, 1)"""
    inst = make_instance(q=[[0, 0], [0, -5]], a=[[1, 1]], b=[1])
    best = local_search(inst, (0, 0), rho=0)
    assert best.bits == (0, 1)
    assert best.value == -5


def test_best_is_interesting_to_itself(tiny_instance):
    """A feasible point compared with itself passes for any rho"""
    assert is_interesting(tiny_instance, (1, 0, 1), (1, 0, 1), 0)


def test_interesting_matches_set_arithmetic():
    """The predicate agrees with a direct recomputation of V, Loose and their difference"""
    rng = np.random.default_rng(4)
    for k in range(300):
        inst = generate(GenSpec(n=6, m=4, seed=900 + k)).instance
        y = tuple(int(v) for v in rng.integers(0, 2, size=6))
        best = tuple(int(v) for v in rng.integers(0, 2, size=6))
        rho = int(rng.integers(0, 5))
        s_y = inst.b - inst.a @ np.array(y)
        s_best = inst.b - inst.a @ np.array(best)
        violated = {i for i in range(inst.m) if s_y[i] < 0}
        loose_y = {i for i in range(inst.m) if s_y[i] > 0}
        loose_best = {i for i in range(inst.m) if s_best[i] > 0}
        expected = min(s_y) >= -1 and len(violated) + len(loose_y ^ loose_best) <= rho
        assert is_interesting(inst, y, best, rho) == expected
