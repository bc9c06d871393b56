from fractions import Fraction

import numpy as np
import pytest

from src.errors import ConfigurationError, DimensionError, InvalidProblemError, OracleCapacityError
from src.oracle import (
    AnnealingOracle,
    ExactOracle,
    NoisyOracle,
    SaParams,
    Spectrum,
    UbqpInstance,
    make_oracle,
    noisy_wrapper,
    solve_exact,
    solve_sa,
)
from tests.helpers import all_points, ubqp_min


def _random_ubqp(rng, n):
    upper = np.triu(rng.integers(-6, 7, size=(n, n)))
    q = upper + np.triu(upper, 1).T
    return UbqpInstance(q.tolist(), int(rng.integers(-5, 6)))


def test_exact_matches_enumeration():
    """entries[0] is a global minimiser"""
    rng = np.random.default_rng(5)
    for _ in range(30):
        u = _random_ubqp(rng, int(rng.integers(1, 8)))
        spectrum = solve_exact(u)
        assert spectrum.best.value == ubqp_min(u)
        assert u.objective(spectrum.best.bits) == spectrum.best.value


def test_exact_spectrum_is_sorted_and_distinct():
    """Values ascend, ties by bit tuple, no duplicates"""
    u = UbqpInstance([[0, 0, 0], [0, 0, 0], [0, 0, 0]])
    spectrum = solve_exact(u, k_spec=5)
    assert len(spectrum) == 5
    bits = [entry.bits for entry in spectrum]
    assert len(set(bits)) == 5
    assert bits == sorted(bits)
    assert all(entry.value == 0 for entry in spectrum)


def test_exact_spectrum_holds_k_best():
    """The k reported values are the k smallest over all points"""
    rng = np.random.default_rng(8)
    u = _random_ubqp(rng, 6)
    values = sorted(u.objective(bits) for bits in all_points(6))
    spectrum = solve_exact(u, k_spec=10)
    assert [entry.value for entry in spectrum] == values[:10]


def test_exact_handles_rationals():
    """Fractional Lagrangian data stays exact"""
    u = UbqpInstance([[Fraction(-1, 3), 0], [0, Fraction(1, 7)]], Fraction(1, 2))
    spectrum = solve_exact(u)
    assert spectrum.best.bits == (1, 0)
    assert spectrum.best.value == Fraction(1, 6)


def test_exact_capacity():
    """More than 30 variables is refused"""
    u = UbqpInstance(np.zeros((31, 31), dtype=int).tolist())
    with pytest.raises(OracleCapacityError):
        solve_exact(u)


def test_ubqp_validation():
    """Square, symmetric, nonempty"""
    with pytest.raises(DimensionError):
        UbqpInstance([[0, 1], [2, 0]])
    with pytest.raises(DimensionError):
        UbqpInstance([[0, 1, 2]])
    with pytest.raises(DimensionError):
        UbqpInstance(np.zeros((0, 0)))


def test_oracle_counts_queries():
    """Every solve call counts one query"""
    oracle = ExactOracle()
    u = UbqpInstance([[-1]])
    for _ in range(3):
        oracle.solve(u)
    assert oracle.stats.queries == 3
    assert oracle.stats.last_gap_certified is True
    assert oracle.stats.seconds >= 0


def test_k_spec_must_be_positive():
    """k_spec >= 1"""
    with pytest.raises(InvalidProblemError):
        ExactOracle().solve(UbqpInstance([[1]]), k_spec=0)


def test_annealing_finds_small_optimum():
    """On tiny problems annealing reaches the optimum"""
    rng = np.random.default_rng(9)
    u = _random_ubqp(rng, 6)
    spectrum = solve_sa(u, schedule=SaParams(sweeps=300, restarts=10), seed=1)
    assert spectrum.best.value == ubqp_min(u)
    assert all(u.objective(e.bits) == e.value for e in spectrum)


def test_annealing_is_reproducible_per_seed():
    """The same seed gives the same spectrum"""
    u = _random_ubqp(np.random.default_rng(21), 8)
    schedule = SaParams(sweeps=300, restarts=5)
    first = solve_sa(u, 8, schedule, seed=7)
    second = solve_sa(u, 8, schedule, seed=7)
    assert [(e.bits, e.value) for e in first] == [(e.bits, e.value) for e in second]


@pytest.mark.integration
def test_annealing_matches_exact_at_twelve_variables():
    """Twenty restarts reach the exact optimum on at least 95 of 100 random 12-variable problems"""
    rng = np.random.default_rng(12)
    hits = 0
    for k in range(100):
        u = _random_ubqp(rng, 12)
        if solve_sa(u, schedule=SaParams(restarts=20), seed=k).best.value == solve_exact(u).best.value:
            hits += 1
    assert hits >= 95


def test_annealing_oracle_is_not_certified():
    """Heuristic answers are flagged as uncertified"""
    oracle = AnnealingOracle(SaParams(sweeps=20, restarts=2), seed=3)
    oracle.solve(UbqpInstance([[-1, 0], [0, 1]]))
    assert oracle.stats.queries == 1
    assert oracle.stats.last_gap_certified is False


def test_noisy_wrapper_inflates_every_entry():
    """One perturbation in [0, eps] per call, added to every value"""
    u = UbqpInstance([[-2, 1], [1, -1]])
    exact = solve_exact(u, 4)
    noisy = noisy_wrapper(ExactOracle(), 3, seed=4)
    for _ in range(20):
        spectrum = noisy.solve(u, 4)
        assert 0 <= spectrum.perturbation <= 3
        assert [e.bits for e in spectrum] == [e.bits for e in exact]
        assert [e.value - spectrum.perturbation for e in spectrum] == [e.value for e in exact]
    assert noisy.stats.queries == 20


def test_noisy_zero_is_exact():
    """epsilon == 0 changes nothing"""
    u = UbqpInstance([[-2, 1], [1, -1]])
    spectrum = NoisyOracle(ExactOracle(), 0).solve(u)
    assert spectrum == solve_exact(u)
    assert spectrum.perturbation == 0


def test_noisy_negative_epsilon():
    """Negative noise levels are rejected"""
    with pytest.raises(InvalidProblemError):
        NoisyOracle(ExactOracle(), -1)


def test_spectrum_from_candidates_deduplicates():
    """Repeated bit vectors keep their first value"""
    spectrum = Spectrum.from_candidates([((1, 0), 3), ((0, 0), 1), ((1, 0), 3)], k_spec=5)
    assert [e.bits for e in spectrum] == [(0, 0), (1, 0)]


def test_make_oracle_names():
    """exact, sa and noisy:<eps> are recognised"""
    assert isinstance(make_oracle("exact"), ExactOracle)
    assert isinstance(make_oracle("sa"), AnnealingOracle)
    noisy = make_oracle("noisy:2")
    assert isinstance(noisy, NoisyOracle)
    assert noisy.epsilon == 2
    with pytest.raises(ConfigurationError):
        make_oracle("quantum")
