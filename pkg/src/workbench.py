import asyncio
import csv
import json
import logging
import math
import os
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .config_loader import SUPPORTED_STRATEGIES, get_thread_count
from .driver import NodeRecord, SolveConfig, SolveReport, solve
from .errors import InvalidProblemError
from .model import Bits, CbqpInstance, is_feasible
from .oracle import ExactOracle, NoisyOracle

MEAN_LABEL = "mean"
WINS_LABEL = "wins"


@dataclass(frozen=True)
class GenSpec:
    n: int
    m: Optional[int] = None  # None means n // 2
    density_q: float = 0.3
    density_a: float = 0.5
    coeff_range: Tuple[int, int] = (-10, 10)
    seed: int = 0
    # b_i = a_i.w + U[0, max_slack]
    max_slack: int = 3

    def __post_init__(self):
        if self.n < 1:
            raise InvalidProblemError(f"n must be at least 1, got {self.n}")
        if self.m is None:
            object.__setattr__(self, "m", self.n // 2)
        if self.m < 0:
            raise InvalidProblemError(f"m must be nonnegative, got {self.m}")
        for name in ("density_q", "density_a"):
            value = getattr(self, name)
            if not 0 < value <= 1:
                raise InvalidProblemError(f"{name} must lie in (0, 1], got {value}")
        low, high = self.coeff_range
        if low > high or (low == 0 and high == 0):
            raise InvalidProblemError(f"Coefficient range {self.coeff_range} has no nonzero values")
        if self.max_slack < 0:
            raise InvalidProblemError("max_slack must be nonnegative")


@dataclass(frozen=True)
class GeneratedInstance:
    instance: CbqpInstance
    seed: Optional[int]
    # Feasible point used to build b; None for instances loaded without one.
    witness: Optional[Bits]


def generate(spec: GenSpec) -> GeneratedInstance:
    """Random instance with a planted feasible point; deterministic per seed."""
    rng = np.random.default_rng(spec.seed)
    low, high = spec.coeff_range
    nonzero = np.array([v for v in range(low, high + 1) if v != 0], dtype=np.int64)

    def sparse(shape, density):
        mask = rng.random(shape) < density
        return np.where(mask, rng.choice(nonzero, size=shape), 0).astype(np.int64)

    upper = np.triu(sparse((spec.n, spec.n), spec.density_q))
    q = upper + np.triu(upper, k=1).T
    a = sparse((spec.m, spec.n), spec.density_a)
    witness = rng.integers(0, 2, size=spec.n).astype(np.int64)
    b = a @ witness + rng.integers(0, spec.max_slack + 1, size=spec.m)

    instance = CbqpInstance(q=q, a=a.reshape(spec.m, spec.n), b=b)
    return GeneratedInstance(instance, spec.seed, tuple(int(v) for v in witness))


def save_instance(generated: GeneratedInstance, path):
    """Write an instance and its witness as JSON."""
    inst = generated.instance
    data = {
        "n": inst.n,
        "m": inst.m,
        "q": inst.q.tolist(),
        "a": inst.a.tolist(),
        "b": inst.b.tolist(),
        "offset": inst.offset,
        "seed": generated.seed,
        "witness": list(generated.witness) if generated.witness is not None else None,
    }
    directory = os.path.dirname(str(path))
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, allow_nan=False)
    logging.info(f"✅ Saved instance: {path}")


def load_instance(path) -> GeneratedInstance:
    """Read an instance written by save_instance."""
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    n = int(data["n"])
    m = int(data.get("m", len(data.get("b", []))))
    a = np.array(data.get("a") or [], dtype=np.int64).reshape(m, n)
    instance = CbqpInstance(q=data["q"], a=a, b=data.get("b") or [], offset=data.get("offset", 0))
    if instance.n != n or instance.m != m:
        raise InvalidProblemError(f"Instance file {path} declares n={n}, m={m} but holds n={instance.n}, m={instance.m}")
    witness = data.get("witness")
    witness = tuple(int(v) for v in witness) if witness is not None else None
    if witness is not None and not is_feasible(instance, witness):
        logging.warning(f"⚠️ Stored witness in {path} is not feasible")
    return GeneratedInstance(instance, data.get("seed"), witness)


def compute_qal(best_time_s: float, baseline_time_s: float, queries: int) -> int:
    """Per-query time budget in milliseconds, rounded to the nearest integer."""
    if queries < 1:
        raise InvalidProblemError("QAL needs at least one oracle query")
    return math.floor((baseline_time_s - best_time_s) * 1000 / queries + 0.5)


@dataclass
class BenchCell:
    """One (instance, strategy) run."""

    size: int
    instance: int
    strategy: str
    nodes: int
    time: float
    queries: int
    optimum: Optional[int]
    status: str


@dataclass
class BenchRow:
    size: int
    instance: int
    times: Dict[str, float]
    nodes: Dict[str, int]
    best_strategy: str
    # Oracle queries of the fastest strategy.
    queries: int
    baseline_time: Optional[float] = None
    qal_ms: Optional[int] = None


@dataclass
class BenchmarkResult:
    strategies: List[str]
    cells: List[BenchCell] = field(default_factory=list)
    rows: List[BenchRow] = field(default_factory=list)


def load_baseline_times(path) -> Dict[Tuple[int, int], float]:
    """Read ``size,instance,baseline_time`` rows."""
    times = {}
    with open(path, "r", encoding="utf-8", newline="") as f:
        for row in csv.DictReader(f):
            times[(int(row["size"]), int(row["instance"]))] = float(row["baseline_time"])
    logging.info(f"Loaded {len(times)} baseline times from {path}")
    return times


def resolve_strategies(strategies) -> List[str]:
    """Expand "all" or a comma list into validated strategy names."""
    if isinstance(strategies, str):
        strategies = [s.strip() for s in strategies.split(",") if s.strip()]
    if list(strategies) == ["all"]:
        return list(SUPPORTED_STRATEGIES)
    unknown = [s for s in strategies if s not in SUPPORTED_STRATEGIES]
    if unknown:
        raise InvalidProblemError(f"Unknown strategies: {', '.join(unknown)}")
    return list(strategies)


def instance_seed(seed: int, size: int, index: int) -> int:
    return seed * 1_000_003 + size * 1_000 + index


def build_rows(
    cells: Sequence[BenchCell],
    strategies: Sequence[str],
    baseline_times: Optional[Dict[Tuple[int, int], float]] = None,
    reference_strategy: Optional[str] = None,
) -> List[BenchRow]:
    """Group cells per instance and attach baseline times and QAL."""
    grouped: Dict[Tuple[int, int], Dict[str, BenchCell]] = {}
    for cell in cells:
        grouped.setdefault((cell.size, cell.instance), {})[cell.strategy] = cell

    rows = []
    for key in sorted(grouped):
        by_strategy = grouped[key]
        times = {s: by_strategy[s].time for s in strategies if s in by_strategy}
        nodes = {s: by_strategy[s].nodes for s in strategies if s in by_strategy}
        best = min(times, key=lambda s: (times[s], strategies.index(s)))
        row = BenchRow(key[0], key[1], times, nodes, best, by_strategy[best].queries)

        if baseline_times is not None:
            row.baseline_time = baseline_times.get(key)
            if row.baseline_time is None:
                logging.warning(f"⚠️ No baseline time for size {key[0]} instance {key[1]}; QAL left empty")
        elif reference_strategy is not None and reference_strategy in by_strategy:
            row.baseline_time = by_strategy[reference_strategy].time
        if row.baseline_time is not None and row.queries >= 1:
            row.qal_ms = compute_qal(row.times[best], row.baseline_time, row.queries)
        rows.append(row)
    return rows


async def run_benchmark_async(
    sizes: Iterable[int],
    per_size: int,
    strategies,
    baseline_times: Optional[Dict[Tuple[int, int], float]] = None,
    reference_strategy: Optional[str] = None,
    oracle_time_zero: bool = False,
    config: SolveConfig = SolveConfig(),
    seed: int = 0,
    threads: Optional[int] = None,
) -> BenchmarkResult:
    """Solve every generated instance with every strategy, a worker thread per cell."""
    strategies = resolve_strategies(strategies)
    to_run = list(strategies)
    if reference_strategy is not None and reference_strategy not in to_run:
        to_run.append(reference_strategy)

    threads = threads or get_thread_count()
    semaphore = asyncio.Semaphore(threads)
    jobs = []
    for size in sizes:
        for index in range(per_size):
            generated = generate(GenSpec(n=size, seed=instance_seed(seed, size, index)))
            for strategy in to_run:
                jobs.append((size, index, strategy, generated.instance))
    logging.info(f"📊 Running {len(jobs)} benchmark cells on {threads} workers")

    async def run_cell(size, index, strategy, instance):
        async with semaphore:
            cell_config = replace(config, strategy=strategy)
            report: SolveReport = await asyncio.to_thread(solve, instance, cell_config)
        elapsed = report.wall_time - report.oracle_time if oracle_time_zero else report.wall_time
        return BenchCell(size, index, strategy, report.nodes, elapsed, report.oracle_queries, report.optimum, report.status)

    cells = await asyncio.gather(*(run_cell(*job) for job in jobs))

    optima = {}
    for cell in cells:
        optima.setdefault((cell.size, cell.instance), set()).add((cell.status, cell.optimum))
    for (size, index), outcomes in optima.items():
        if len(outcomes) > 1:
            logging.warning(f"⚠️ Strategies disagree on size {size} instance {index}: {sorted(outcomes, key=str)}")

    result = BenchmarkResult(strategies, list(cells))
    result.rows = build_rows(result.cells, strategies, baseline_times, reference_strategy)
    logging.info(f"✅ Benchmark finished: {len(result.rows)} instances")
    return result


def run_benchmark(
    sizes,
    per_size,
    strategies,
    baseline_path=None,
    reference_strategy=None,
    oracle_time_zero=False,
    config: SolveConfig = SolveConfig(),
    seed=0,
    out_nodes=None,
    out_times=None,
    out_rows=None,
) -> BenchmarkResult:
    """Run the benchmark and write whichever CSV outputs were requested."""
    baseline_times = load_baseline_times(baseline_path) if baseline_path else None
    result = asyncio.run(run_benchmark_async(
        sizes, per_size, strategies, baseline_times, reference_strategy, oracle_time_zero, config, seed
    ))
    if out_nodes:
        write_nodes_table(result, out_nodes)
    if out_times:
        write_times_table(result, out_times)
    if out_rows:
        write_rows_csv(result.cells, out_rows)
    return result


def _mean(values):
    values = [v for v in values if v is not None]
    return sum(values) / len(values) if values else None


def win_counts(rows: Sequence[BenchRow], strategies: Sequence[str], metric: str) -> Dict[str, int]:
    """Every strategy attaining a row's minimum gets that row's win."""
    wins = {s: 0 for s in strategies}
    for row in rows:
        values = getattr(row, metric)
        best = min(values.values())
        for strategy, value in values.items():
            if value == best:
                wins[strategy] += 1
    return wins


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.3f}"
    return str(value)


def _open_for_write(path):
    directory = os.path.dirname(str(path))
    if directory:
        os.makedirs(directory, exist_ok=True)
    return open(path, "w", encoding="utf-8", newline="")


def write_nodes_table(result: BenchmarkResult, path):
    """Node counts per instance, a mean row per size and a wins row."""
    strategies = result.strategies
    with _open_for_write(path) as f:
        writer = csv.writer(f)
        writer.writerow(["size", "instance"] + strategies)
        for row in result.rows:
            writer.writerow([row.size, row.instance] + [row.nodes.get(s, "") for s in strategies])
        for size in sorted({row.size for row in result.rows}):
            sized = [row for row in result.rows if row.size == size]
            writer.writerow([size, MEAN_LABEL] + [_cell(_mean(r.nodes.get(s) for r in sized)) for s in strategies])
        wins = win_counts(result.rows, strategies, "nodes")
        writer.writerow(["", WINS_LABEL] + [wins[s] for s in strategies])
    logging.info(f"✅ Saved node table: {path}")


def write_times_table(result: BenchmarkResult, path):
    """Times per strategy plus queries, baseline time and QAL."""
    strategies = result.strategies
    with _open_for_write(path) as f:
        writer = csv.writer(f)
        writer.writerow(["size", "instance"] + strategies + ["queries", "baseline_time", "QAL"])
        for row in result.rows:
            writer.writerow(
                [row.size, row.instance]
                + [_cell(row.times.get(s)) for s in strategies]
                + [row.queries, _cell(row.baseline_time), _cell(row.qal_ms)]
            )
        for size in sorted({row.size for row in result.rows}):
            sized = [row for row in result.rows if row.size == size]
            writer.writerow(
                [size, MEAN_LABEL]
                + [_cell(_mean(r.times.get(s) for r in sized)) for s in strategies]
                + [_cell(_mean(r.queries for r in sized)), _cell(_mean(r.baseline_time for r in sized)), _cell(_mean(r.qal_ms for r in sized))]
            )
        wins = win_counts(result.rows, strategies, "times")
        writer.writerow(["", WINS_LABEL] + [wins[s] for s in strategies] + ["", "", ""])
    logging.info(f"✅ Saved time table: {path}")


ROW_FIELDS = ["size", "instance", "strategy", "nodes", "time", "queries", "optimum", "status"]


def write_rows_csv(cells: Sequence[BenchCell], path):
    """Long format, one line per (instance, strategy); floats are written with repr."""
    with _open_for_write(path) as f:
        writer = csv.writer(f)
        writer.writerow(ROW_FIELDS)
        for cell in cells:
            writer.writerow([
                cell.size, cell.instance, cell.strategy, cell.nodes, repr(cell.time),
                cell.queries, "" if cell.optimum is None else cell.optimum, cell.status,
            ])


def read_rows_csv(path) -> List[BenchCell]:
    """Load benchmark cells back from a rows CSV."""
    cells = []
    with open(path, "r", encoding="utf-8", newline="") as f:
        for row in csv.DictReader(f):
            cells.append(BenchCell(
                size=int(row["size"]),
                instance=int(row["instance"]),
                strategy=row["strategy"],
                nodes=int(row["nodes"]),
                time=float(row["time"]),
                queries=int(row["queries"]),
                optimum=int(row["optimum"]) if row["optimum"] else None,
                status=row["status"],
            ))
    return cells


TRACE_FIELDS = [
    "node_id", "depth", "fixings", "bound", "bound_int", "variable", "first_value",
    "branch_strategy", "prune_reason", "inflation", "suspect_prune",
]


def write_trace_csv(trace: Sequence[NodeRecord], path):
    """One CSV row per explored node."""
    with _open_for_write(path) as f:
        writer = csv.writer(f)
        writer.writerow(TRACE_FIELDS)
        for record in trace:
            decision = record.decision
            writer.writerow([
                record.node_id,
                record.depth,
                ";".join(f"{i}={v}" for i, v in record.fixings),
                "" if record.bound is None else repr(record.bound),
                "" if record.bound_int is None else record.bound_int,
                "" if decision is None else decision.variable,
                "" if decision is None else decision.first_value,
                "" if decision is None else decision.strategy,
                record.prune_reason or "",
                record.inflation,
                int(record.suspect_prune),
            ])
    logging.info(f"✅ Saved node trace: {path}")


@dataclass
class NoiseAudit:
    epsilon: int
    exact: SolveReport
    noisy: SolveReport
    suspect_nodes: List[NodeRecord]

    @property
    def optimum_mismatch(self) -> bool:
        return (self.exact.status, self.exact.optimum) != (self.noisy.status, self.noisy.optimum)

    def to_dict(self):
        return {
            "epsilon": self.epsilon,
            "exact_optimum": self.exact.to_dict()["optimum"],
            "noisy_optimum": self.noisy.to_dict()["optimum"],
            "optimum_mismatch": self.optimum_mismatch,
            "suspect_nodes": [
                {"depth": r.depth, "fixings": [list(f) for f in r.fixings], "bound_int": r.bound_int, "inflation": r.inflation}
                for r in self.suspect_nodes
            ],
        }


def noise_audit(instance: CbqpInstance, epsilon: int, seed: int = 0, config: SolveConfig = SolveConfig()) -> NoiseAudit:
    """Solve with exact and noisy oracles and report prunes that relied on noise."""
    exact = solve(instance, config, ExactOracle())
    noisy = solve(instance, config, NoisyOracle(ExactOracle(), epsilon, seed))
    suspects = [record for record in noisy.trace if record.suspect_prune]
    audit = NoiseAudit(epsilon, exact, noisy, suspects)

    for record in suspects:
        logging.warning(
            f"⚠️ Prune at depth {record.depth} used bound {record.bound_int} inflated by {record.inflation}"
        )
    if audit.optimum_mismatch:
        logging.error(
            f"❌ Noisy run returned {noisy.to_dict()['optimum']}, exact optimum is {exact.to_dict()['optimum']}"
        )
    else:
        logging.info(f"✅ Noisy run (epsilon={epsilon}) matched the exact optimum; {len(suspects)} suspect prunes")
    return audit
