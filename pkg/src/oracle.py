"""UBQP oracles that answer with a sorted spectrum of distinct assignments."""

import logging
import math
import threading
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Tuple

import numpy as np

from .config_loader import parse_oracle_name
from .errors import DimensionError, InvalidProblemError, OracleCapacityError

EXACT_MAX_VARIABLES = 30
DEFAULT_K_SPEC = 32
CHUNK_BITS = 16


class UbqpInstance:
    """Symmetric rational matrix plus rational offset."""

    def __init__(self, q, offset=0):
        matrix = np.array([[Fraction(v) for v in row] for row in q], dtype=object)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] < 1:
            raise DimensionError(f"UBQP matrix must be square with n >= 1, got shape {matrix.shape}")
        if not all(matrix[i, j] == matrix[j, i] for i in range(matrix.shape[0]) for j in range(i)):
            raise DimensionError("UBQP matrix must be symmetric")
        self.q = matrix
        self.offset = Fraction(offset)

    @property
    def n(self):
        return self.q.shape[0]

    def objective(self, x) -> Fraction:
        chosen = [i for i, bit in enumerate(x) if bit]
        if len(x) != self.n:
            raise DimensionError(f"Expected a vector of length {self.n}, got {len(x)}")
        total = sum((self.q[i, j] for i in chosen for j in chosen), Fraction(0))
        return total + self.offset

    def integer_form(self):
        """Return (integer matrix, integer offset, denominator) scaled to a common denominator."""
        denominator = 1
        for value in list(self.q.flat) + [self.offset]:
            denominator = denominator * value.denominator // math.gcd(denominator, value.denominator)
        scaled = [[int(v * denominator) for v in row] for row in self.q]
        offset = int(self.offset * denominator)
        magnitude = sum(abs(v) for row in scaled for v in row) + abs(offset)
        dtype = np.int64 if magnitude < 2 ** 62 else object
        return np.array(scaled, dtype=dtype), offset, denominator


@dataclass(frozen=True)
class SpectrumEntry:
    bits: Tuple[int, ...]
    value: Fraction


@dataclass(frozen=True)
class Spectrum:
    entries: Tuple[SpectrumEntry, ...]
    # Integer added to every value by a noisy backend; 0 otherwise.
    perturbation: int = 0

    @classmethod
    def from_candidates(cls, candidates: Iterable[Tuple[Tuple[int, ...], Fraction]], k_spec: int, perturbation=0):
        seen = {}
        for bits, value in candidates:
            bits = tuple(int(b) for b in bits)
            if bits not in seen:
                seen[bits] = value
        ranked = sorted(seen.items(), key=lambda item: (item[1], item[0]))[:k_spec]
        return cls(tuple(SpectrumEntry(bits, value) for bits, value in ranked), perturbation)

    @property
    def best(self) -> SpectrumEntry:
        return self.entries[0]

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


@dataclass
class OracleStats:
    queries: int = 0
    last_gap_certified: bool = False
    seconds: float = 0.0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def record(self, certified, seconds):
        with self._lock:
            self.queries += 1
            self.last_gap_certified = certified
            self.seconds += seconds


class UbqpOracle:
    """Base class: counts every call, subclasses implement ``_solve``."""

    name = "oracle"
    certified = False

    def __init__(self):
        self.stats = OracleStats()

    def solve(self, u: UbqpInstance, k_spec: int = DEFAULT_K_SPEC) -> Spectrum:
        if k_spec < 1:
            raise InvalidProblemError("k_spec must be at least 1")
        started = time.perf_counter()
        spectrum = self._solve(u, k_spec)
        self.stats.record(self.certified, time.perf_counter() - started)
        return spectrum

    def _solve(self, u, k_spec):
        raise NotImplementedError


def _enumerate_values(matrix, offset, n, start, stop):
    indices = np.arange(start, stop, dtype=np.int64)
    bits = (indices[:, None] >> np.arange(n, dtype=np.int64)) & 1
    if matrix.dtype == object:
        bits = bits.astype(object)
    values = ((bits @ matrix) * bits).sum(axis=1) + offset
    return indices, values


def solve_exact(u: UbqpInstance, k_spec: int = DEFAULT_K_SPEC) -> Spectrum:
    """Exhaustive enumeration; entries[0] is a certified global minimiser."""
    n = u.n
    if n > EXACT_MAX_VARIABLES:
        raise OracleCapacityError(f"Exact oracle handles at most {EXACT_MAX_VARIABLES} variables, got {n}")
    matrix, offset, denominator = u.integer_form()
    chunk = 1 << min(n, CHUNK_BITS)
    best_indices = np.zeros(0, dtype=np.int64)
    best_values = np.zeros(0, dtype=matrix.dtype)
    for start in range(0, 1 << n, chunk):
        indices, values = _enumerate_values(matrix, offset, n, start, start + chunk)
        indices = np.concatenate([best_indices, indices])
        values = np.concatenate([best_values, values])
        if values.dtype == object:
            order = sorted(range(len(values)), key=lambda k: (values[k], indices[k]))[:k_spec]
        else:
            order = np.lexsort((indices, values))[:k_spec]
        best_indices, best_values = indices[order], values[order]

    candidates = []
    for index, value in zip(best_indices.tolist(), best_values.tolist()):
        bits = tuple((index >> i) & 1 for i in range(n))
        candidates.append((bits, Fraction(int(value), denominator)))
    return Spectrum.from_candidates(candidates, k_spec)


class ExactOracle(UbqpOracle):
    name = "exact"
    certified = True

    def _solve(self, u, k_spec):
        return solve_exact(u, k_spec)


@dataclass(frozen=True)
class SaParams:
    sweeps: int = 2000
    restarts: int = 20
    # None picks a start temperature from the largest possible single-flip change.
    t_start: Optional[float] = None
    t_end: float = 0.05


def solve_sa(u: UbqpInstance, k_spec: int = DEFAULT_K_SPEC, schedule: SaParams = SaParams(), seed: int = 0) -> Spectrum:
    """Simulated annealing with a geometric schedule; all restarts run as one batch."""
    rng = np.random.default_rng(seed)
    n = u.n
    q = u.q.astype(float)
    diagonal = np.diag(q).copy()
    off = q - np.diag(diagonal)
    t_start = schedule.t_start
    if t_start is None:
        t_start = max(1.0, float(np.abs(q).sum(axis=1).max()) * 2.0)
    temperatures = np.geomspace(t_start, min(schedule.t_end, t_start), max(schedule.sweeps, 1))

    states = rng.integers(0, 2, size=(schedule.restarts, n)).astype(float)
    fields = states @ off
    rows = np.arange(schedule.restarts)
    for temperature in temperatures:
        for i in range(n):
            x_i = states[:, i]
            # Objective change of flipping x_i: (1 - 2 x_i) (q_ii + 2 sum_{j != i} q_ij x_j).
            change = (1.0 - 2.0 * x_i) * (diagonal[i] + 2.0 * fields[:, i])
            accept = (change <= 0) | (rng.random(schedule.restarts) < np.exp(-np.maximum(change, 0) / temperature))
            if not accept.any():
                continue
            flipped = rows[accept]
            step = 1.0 - 2.0 * states[flipped, i]
            states[flipped, i] += step
            fields[flipped] += np.outer(step, off[i])

    candidates = []
    for state in states.astype(int):
        bits = tuple(int(b) for b in state)
        candidates.append((bits, u.objective(bits)))
    return Spectrum.from_candidates(candidates, k_spec)


class AnnealingOracle(UbqpOracle):
    name = "sa"

    def __init__(self, params: SaParams = SaParams(), seed: int = 0):
        super().__init__()
        self.params = params
        self.seed = seed
        self._calls = 0
        self._lock = threading.Lock()

    def _solve(self, u, k_spec):
        with self._lock:
            call_seed = self.seed + self._calls
            self._calls += 1
        return solve_sa(u, k_spec, self.params, call_seed)


class NoisyOracle(UbqpOracle):
    """Adds a uniform integer in [0, epsilon] to every reported value of a call.

    Queries are counted once, by the wrapped oracle.
    """

    def __init__(self, inner: UbqpOracle, epsilon: int, seed: int = 0):
        if epsilon < 0:
            raise InvalidProblemError("epsilon must be nonnegative")
        self.inner = inner
        self.epsilon = int(epsilon)
        self.name = f"noisy:{self.epsilon}"
        self._rng = np.random.default_rng(seed)
        self._lock = threading.Lock()

    @property
    def stats(self):
        return self.inner.stats

    def solve(self, u, k_spec=DEFAULT_K_SPEC):
        spectrum = self.inner.solve(u, k_spec)
        if self.epsilon == 0:
            return spectrum
        with self._lock:
            noise = int(self._rng.integers(0, self.epsilon + 1))
        if noise:
            logging.debug(f"Noisy oracle inflated values by {noise}")
        entries = tuple(SpectrumEntry(e.bits, e.value + noise) for e in spectrum.entries)
        return Spectrum(entries, spectrum.perturbation + noise)


def noisy_wrapper(inner: UbqpOracle, epsilon: int, seed: int = 0) -> NoisyOracle:
    """Wrap inner so each answer is inflated by a random integer in [0, epsilon]."""
    return NoisyOracle(inner, epsilon, seed)


def make_oracle(name: str, seed: int = 0, sa_params: SaParams = SaParams()) -> UbqpOracle:
    """Build a backend from its CLI name: ``exact``, ``sa`` or ``noisy:<eps>``."""
    kind, epsilon = parse_oracle_name(name)
    if kind == "exact":
        return ExactOracle()
    if kind == "sa":
        return AnnealingOracle(sa_params, seed)
    return NoisyOracle(ExactOracle(), epsilon, seed)
