"""Constrained binary quadratic programs: minimize x^T Q x + offset subject to A x <= b over binary x."""

from dataclasses import dataclass, field
from typing import Sequence, Tuple

import networkx as nx
import numpy as np

from .errors import DimensionError

INT64_HEADROOM = 2 ** 62

Bits = Tuple[int, ...]


def _frozen_int_array(values, ndim):
    array = np.array(values, dtype=np.int64, copy=True)
    if array.ndim != ndim:
        raise DimensionError(f"Expected a {ndim}-dimensional array, got shape {array.shape}")
    array.setflags(write=False)
    return array


def as_bits(x, n):
    """Validate a binary vector of length n and return it as an int64 array."""
    raw = np.asarray(x).reshape(-1)
    bits = raw.astype(np.int64)
    if not np.array_equal(raw, bits):
        raise DimensionError("Assignment entries must be integral")
    if bits.shape[0] != n:
        raise DimensionError(f"Expected a vector of length {n}, got {bits.shape[0]}")
    if bits.size and ((bits != 0) & (bits != 1)).any():
        raise DimensionError("Assignment entries must be 0 or 1")
    return bits


@dataclass(frozen=True, eq=False)
class CbqpInstance:
    """A (possibly reduced) CBQP instance.

    ``fixings`` holds ``(original_index, value)`` pairs in the order the
    variables were fixed and ``index_map`` maps each free position back to its
    index in the original problem.
    """

    q: np.ndarray
    a: np.ndarray
    b: np.ndarray
    offset: int = 0
    fixings: Tuple[Tuple[int, int], ...] = ()
    index_map: Tuple[int, ...] = field(default=None)

    def __post_init__(self):
        q = _frozen_int_array(self.q, 2)
        n = q.shape[0]
        if q.shape != (n, n):
            raise DimensionError(f"Q must be square, got shape {q.shape}")
        if not np.array_equal(q, q.T):
            raise DimensionError("Q must be symmetric")

        a = np.asarray(self.a, dtype=np.int64)
        if a.ndim != 2 and a.size == 0:
            a = np.zeros((0, n), dtype=np.int64)
        a = _frozen_int_array(a, 2)
        if a.shape[1] != n:
            raise DimensionError(f"A has {a.shape[1]} columns, expected {n}")
        b = _frozen_int_array(np.asarray(self.b, dtype=np.int64).reshape(-1), 1)
        if b.shape[0] != a.shape[0]:
            raise DimensionError(f"b has {b.shape[0]} entries, expected {a.shape[0]}")

        fixings = tuple((int(i), int(v)) for i, v in self.fixings)
        index_map = tuple(range(n)) if self.index_map is None else tuple(int(i) for i in self.index_map)
        if len(index_map) != n:
            raise DimensionError(f"index_map has {len(index_map)} entries, expected {n}")
        original = set(index_map) | {i for i, _ in fixings}
        if len(original) != n + len(fixings):
            raise DimensionError("index_map and fixings must cover distinct original indices")

        offset = int(self.offset)
        magnitude = sum(abs(int(v)) for v in q.flat) + abs(offset)
        constraint_magnitude = max((sum(abs(int(v)) for v in row) + abs(int(rhs)) for row, rhs in zip(a, b)), default=0)
        if magnitude >= INT64_HEADROOM or constraint_magnitude >= INT64_HEADROOM:
            raise OverflowError("Instance data exceeds the signed 64-bit range")

        object.__setattr__(self, "q", q)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "offset", offset)
        object.__setattr__(self, "fixings", fixings)
        object.__setattr__(self, "index_map", index_map)

    @property
    def n(self):
        return self.q.shape[0]

    @property
    def m(self):
        return self.a.shape[0]

    @property
    def original_n(self):
        return self.n + len(self.fixings)


@dataclass(frozen=True)
class Assignment:
    bits: Bits
    value: int


def make_instance(q, a=None, b=None, offset=0):
    """Build a root instance from nested lists; missing constraints mean m = 0."""
    q = np.asarray(q, dtype=np.int64)
    n = q.shape[0]
    if a is None:
        a = np.zeros((0, n), dtype=np.int64)
        b = np.zeros(0, dtype=np.int64)
    return CbqpInstance(q=q, a=a, b=b, offset=offset)


def evaluate_objective(inst: CbqpInstance, x) -> int:
    """Return x^T Q x + offset in exact integer arithmetic."""
    bits = as_bits(x, inst.n)
    chosen = np.flatnonzero(bits)
    total = sum(int(v) for v in inst.q[np.ix_(chosen, chosen)].flat)
    return total + inst.offset


def slacks(inst: CbqpInstance, x) -> np.ndarray:
    """Slack vector s = b - A x."""
    bits = as_bits(x, inst.n)
    return inst.b - inst.a @ bits


def violated(inst: CbqpInstance, x):
    """Indices of the constraints violated at x."""
    return [int(i) for i in np.flatnonzero(slacks(inst, x) < 0)]


def is_feasible(inst: CbqpInstance, x) -> bool:
    """True when x satisfies every constraint."""
    return bool((slacks(inst, x) >= 0).all())


def delta(inst: CbqpInstance, x, i: int, j: int) -> int:
    """Change in slack of constraint i when x_j is flipped: a_ij (2 x_j - 1)."""
    bits = as_bits(x, inst.n)
    if not 0 <= i < inst.m:
        raise IndexError(f"Constraint index {i} out of range for m={inst.m}")
    if not 0 <= j < inst.n:
        raise IndexError(f"Variable index {j} out of range for n={inst.n}")
    return int(inst.a[i, j]) * (2 * int(bits[j]) - 1)


def delta_matrix(inst: CbqpInstance, x) -> np.ndarray:
    """All delta values at once, shape (m, n)."""
    bits = as_bits(x, inst.n)
    return inst.a * (2 * bits - 1)


def row_infeasible(inst: CbqpInstance) -> bool:
    """True when some row cannot be satisfied by any binary vector."""
    if inst.m == 0:
        return False
    smallest = np.minimum(inst.a, 0).sum(axis=1)
    return bool((smallest > inst.b).any())


def reduce_fix(inst: CbqpInstance, j: int, v: int) -> CbqpInstance:
    """Fix free position j to v and return the (n-1)-variable instance."""
    if not 0 <= j < inst.n:
        raise IndexError(f"Variable index {j} out of range for n={inst.n}")
    if v not in (0, 1):
        raise DimensionError(f"Fixed value must be 0 or 1, got {v}")

    keep = [i for i in range(inst.n) if i != j]
    q = inst.q.astype(np.int64, copy=True)
    offset = inst.offset
    if v == 1:
        offset += int(q[j, j])
        q[keep, keep] += 2 * q[keep, j]
    reduced_q = q[np.ix_(keep, keep)]
    reduced_a = inst.a[:, keep]
    reduced_b = inst.b - inst.a[:, j] * v

    return CbqpInstance(
        q=reduced_q,
        a=reduced_a.reshape(inst.m, len(keep)),
        b=reduced_b,
        offset=offset,
        fixings=inst.fixings + ((inst.index_map[j], v),),
        index_map=tuple(inst.index_map[i] for i in keep),
    )


def lift(inst: CbqpInstance, y) -> Bits:
    """Expand a reduced assignment to the original dimension."""
    bits = as_bits(y, inst.n)
    full = [0] * inst.original_n
    for index, value in inst.fixings:
        full[index] = value
    for position, index in enumerate(inst.index_map):
        full[index] = int(bits[position])
    return tuple(full)


def project(inst: CbqpInstance, x) -> Bits:
    """Inverse of lift: restrict an original-dimension vector to the free positions.

    Raises DimensionError when x disagrees with one of the fixings.
    """
    bits = as_bits(x, inst.original_n)
    for index, value in inst.fixings:
        if bits[index] != value:
            raise DimensionError(f"Assignment disagrees with fixing x_{index}={value}")
    return tuple(int(bits[i]) for i in inst.index_map)


def agrees_with_fixings(inst: CbqpInstance, x: Sequence[int]) -> bool:
    """True when an original-dimension vector matches every fixing of inst."""
    return all(x[index] == value for index, value in inst.fixings)


def interaction_graph(inst: CbqpInstance) -> nx.Graph:
    """Variables as vertices, an edge for every nonzero off-diagonal q_ij.

    Each vertex carries its original index in the ``original`` attribute.
    """
    graph = nx.Graph()
    graph.add_nodes_from((i, {"original": inst.index_map[i]}) for i in range(inst.n))
    rows, cols = np.nonzero(np.triu(inst.q, k=1))
    graph.add_edges_from(zip(rows.tolist(), cols.tolist()))
    return graph
