import logging
import math
import threading
import time
from dataclasses import asdict, dataclass, field
from typing import FrozenSet, List, Optional, Tuple

from .bounds import DualParams, integer_bound, lagrangian_dual, solve_lp_relaxation
from .branching import DEFAULT_LP_ITER_CAP, BranchDecision, select_branch
from .config_loader import DEFAULT_CONFIG, validate_bound_mode, validate_strategy
from .errors import InfeasibleNodeError
from .heuristic import DEFAULT_MAX_POPS, DEFAULT_RHO, greedy_repair, local_search
from .model import (
    Assignment,
    Bits,
    CbqpInstance,
    agrees_with_fixings,
    evaluate_objective,
    is_feasible,
    lift,
    project,
    reduce_fix,
    row_infeasible,
)
from .oracle import SaParams, UbqpOracle, make_oracle

INFEASIBLE = "Infeasible"

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_UNPROVEN = "unproven"


@dataclass(frozen=True)
class SolveConfig:
    strategy: str = "mostviol"
    oracle: str = "exact"
    rho: int = DEFAULT_RHO
    bound_mode: str = "ld"
    max_nodes: int = 1_000_000
    max_time: float = 600.0
    dual_params: DualParams = DualParams()
    lp_iter_cap: int = DEFAULT_LP_ITER_CAP
    max_local_search_pops: int = DEFAULT_MAX_POPS
    sa_params: SaParams = SaParams()
    seed: int = 0

    @classmethod
    def from_config(cls, config: dict, **overrides):
        """Build from a ``load_config`` dict; keyword overrides win over the file."""
        merged = {**DEFAULT_CONFIG, **config}
        values = dict(
            strategy=validate_strategy(merged["STRATEGY"]),
            oracle=merged["ORACLE"],
            rho=int(merged["RHO"]),
            bound_mode=validate_bound_mode(merged["BOUND_MODE"]),
            max_nodes=int(merged["MAX_NODES"]),
            max_time=float(merged["MAX_TIME"]),
            dual_params=DualParams(
                tau_conv=float(merged["TAU_CONV"]),
                max_cuts=int(merged["MAX_CUTS"]),
                k_spec=int(merged["K_SPEC"]),
            ),
            lp_iter_cap=int(merged["LP_ITER_CAP"]),
            max_local_search_pops=int(merged["MAX_LOCAL_SEARCH_POPS"]),
            sa_params=SaParams(sweeps=int(merged["SA_SWEEPS"]), restarts=int(merged["SA_RESTARTS"])),
            seed=int(merged["SEED"]),
        )
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


@dataclass
class Node:
    instance: CbqpInstance
    depth: int
    # Integer bound of the parent; None at the root.
    lower_bound: Optional[int] = None
    parent_spectrum: FrozenSet[Bits] = frozenset()
    inflation: int = 0


@dataclass
class NodeRecord:
    node_id: int
    depth: int
    fixings: Tuple[Tuple[int, int], ...]
    bound: Optional[float]
    bound_int: Optional[int]
    decision: Optional[BranchDecision]
    prune_reason: Optional[str]
    inflation: int = 0
    # Pruned on a noise-inflated bound that would not have pruned without the noise.
    suspect_prune: bool = False


@dataclass
class SolveReport:
    status: str
    optimum: Optional[int]
    incumbent: Optional[Assignment]
    nodes: int
    oracle_queries: int
    oracle_time: float
    wall_time: float
    strategy: str
    trace: List[NodeRecord] = field(default_factory=list)

    @property
    def optimal(self):
        return self.status == STATUS_OPTIMAL

    def to_dict(self, include_trace=False):
        data = {
            "status": self.status,
            "optimum": INFEASIBLE if self.status == STATUS_INFEASIBLE else self.optimum,
            "incumbent": list(self.incumbent.bits) if self.incumbent else None,
            "incumbent_value": self.incumbent.value if self.incumbent else None,
            "nodes": self.nodes,
            "oracle_queries": self.oracle_queries,
            "oracle_time": self.oracle_time,
            "wall_time": self.wall_time,
            "strategy": self.strategy,
        }
        if include_trace:
            data["trace"] = [asdict(record) for record in self.trace]
        return data


def prune_check(lower_bound_int, incumbent_value) -> bool:
    """True iff the node cannot contain a strictly better point."""
    return lower_bound_int >= incumbent_value


class Incumbent:
    """Best known feasible point of the root instance; the value never increases."""

    def __init__(self, root: CbqpInstance):
        self.root = root
        self.best: Optional[Assignment] = None
        self._lock = threading.Lock()

    @property
    def value(self):
        return math.inf if self.best is None else self.best.value

    def offer(self, bits) -> bool:
        """Keep bits if they are feasible and strictly better than the current incumbent."""
        bits = tuple(int(v) for v in bits)
        if not is_feasible(self.root, bits):
            return False
        value = evaluate_objective(self.root, bits)
        with self._lock:
            if value >= self.value:
                return False
            self.best = Assignment(bits, value)
        logging.debug(f"New incumbent {value}")
        return True


@dataclass
class _NodeBound:
    bound: float
    bound_int: int
    x_u: Bits
    pool: FrozenSet[Bits]  # node-local coordinates
    inflation: int = 0


def _root_seed(root: CbqpInstance) -> Optional[Bits]:
    zero = (0,) * root.n
    if is_feasible(root, zero):
        return zero
    return greedy_repair(root, zero)


def _node_seeds(sub: CbqpInstance, node: Node, incumbent: Incumbent, limit: int) -> List[Bits]:
    """Feasible points of the node taken from the parent's pool and the incumbent."""
    lifted = set(node.parent_spectrum)
    if incumbent.best is not None:
        lifted.add(incumbent.best.bits)
    seeds = []
    for bits in lifted:
        if not agrees_with_fixings(sub, bits):
            continue
        local = project(sub, bits)
        if is_feasible(sub, local):
            seeds.append((evaluate_objective(sub, local), local))
    seeds.sort()
    chosen = [bits for _, bits in seeds[:limit]]
    # Any binary point is a valid cut; the zero vector keeps the cut set nonempty.
    return chosen or [(0,) * sub.n]


def _rounded(values) -> Bits:
    return tuple(int(v > 0.5) for v in values)


def _bound_node(sub, node, oracle, incumbent, config) -> _NodeBound:
    """Raises InfeasibleNodeError when the node is proven empty."""
    lp = None
    if config.bound_mode in ("lp", "both"):
        lp_bound, lp_x = solve_lp_relaxation(sub)
        x_lp = _rounded(lp_x) if lp_x is not None else (0,) * sub.n
        lp = _NodeBound(lp_bound, integer_bound(lp_bound, config.dual_params.tau_int), x_lp, frozenset({x_lp}))
        if config.bound_mode == "lp":
            return lp

    seeds = _node_seeds(sub, node, incumbent, config.dual_params.k_spec)
    result = lagrangian_dual(sub, oracle, seeds, config.dual_params)
    ld = _NodeBound(result.bound, result.bound_int, result.minimizer, result.spectrum_pool, result.inflation)
    if lp is None:
        return ld

    bound_int = max(ld.bound_int, lp.bound_int)
    honest = max(ld.bound_int - ld.inflation, lp.bound_int)
    return _NodeBound(
        bound=max(ld.bound, lp.bound),
        bound_int=bound_int,
        x_u=ld.x_u,
        pool=ld.pool | lp.pool,
        inflation=bound_int - honest,
    )


def _harvest(root, sub, pool, incumbent, config) -> FrozenSet[Bits]:
    """Offer every feasible pool point; local search from each new incumbent."""
    lifted = frozenset(lift(sub, bits) for bits in pool)
    improved = False
    for bits in sorted(lifted):
        improved |= incumbent.offer(bits)
    if improved:
        better = local_search(root, incumbent.best.bits, config.rho, config.max_local_search_pops)
        incumbent.offer(better.bits)
    return lifted


def solve(inst: CbqpInstance, config: SolveConfig = SolveConfig(), oracle: Optional[UbqpOracle] = None) -> SolveReport:
    """Minimise x^T Q x + offset subject to A x <= b over binary x."""
    started = time.perf_counter()
    oracle = oracle or make_oracle(config.oracle, config.seed, config.sa_params)
    queries_before = oracle.stats.queries
    seconds_before = oracle.stats.seconds

    incumbent = Incumbent(inst)
    seed = _root_seed(inst)
    if seed is not None:
        incumbent.offer(local_search(inst, seed, config.rho, config.max_local_search_pops).bits)
        logging.debug(f"Root seed value {incumbent.value}")

    trace: List[NodeRecord] = []
    stack = [Node(inst, depth=0)]
    nodes = 0
    limit_hit = False

    while stack:
        if nodes >= config.max_nodes:
            logging.warning(f"⚠️ Node limit {config.max_nodes} reached; result is unproven")
            limit_hit = True
            break
        if time.perf_counter() - started > config.max_time:
            logging.warning(f"⚠️ Time limit {config.max_time}s reached; result is unproven")
            limit_hit = True
            break

        node = stack.pop()
        sub = node.instance

        # The incumbent may have improved since this node was pushed.
        if node.lower_bound is not None and prune_check(node.lower_bound, incumbent.value):
            trace.append(NodeRecord(
                node_id=-1,
                depth=node.depth,
                fixings=sub.fixings,
                bound=None,
                bound_int=node.lower_bound,
                decision=None,
                prune_reason="parent_bound",
                inflation=node.inflation,
                suspect_prune=node.inflation > 0 and node.lower_bound - node.inflation < incumbent.value,
            ))
            continue

        node_id = nodes
        nodes += 1
        record = NodeRecord(node_id, node.depth, sub.fixings, None, None, None, None)
        trace.append(record)

        if sub.n == 0:
            feasible = bool((sub.b >= 0).all())
            record.bound, record.bound_int = float(sub.offset), sub.offset
            if feasible:
                incumbent.offer(lift(sub, ()))
            record.prune_reason = "leaf" if feasible else "infeasible"
            continue

        if row_infeasible(sub):
            record.prune_reason = "infeasible"
            continue

        try:
            bounded = _bound_node(sub, node, oracle, incumbent, config)
        except InfeasibleNodeError:
            record.prune_reason = "infeasible"
            continue
        record.bound, record.bound_int, record.inflation = bounded.bound, bounded.bound_int, bounded.inflation

        lifted_pool = _harvest(inst, sub, bounded.pool, incumbent, config)

        if prune_check(bounded.bound_int, incumbent.value):
            record.prune_reason = "bound"
            record.suspect_prune = bounded.inflation > 0 and bounded.bound_int - bounded.inflation < incumbent.value
            continue

        try:
            decision = select_branch(config.strategy, sub, bounded.x_u, bounded.pool, config.lp_iter_cap)
        except InfeasibleNodeError:
            record.prune_reason = "infeasible"
            continue
        record.decision = decision
        logging.debug(
            f"Node {node_id} depth {node.depth}: bound {bounded.bound_int}, "
            f"branch x_{decision.variable}={decision.first_value} ({decision.strategy})"
        )

        for value in (1 - decision.first_value, decision.first_value):
            stack.append(Node(
                instance=reduce_fix(sub, decision.position, value),
                depth=node.depth + 1,
                lower_bound=bounded.bound_int,
                parent_spectrum=lifted_pool,
                inflation=bounded.inflation,
            ))

    if limit_hit:
        status = STATUS_UNPROVEN
    elif incumbent.best is None:
        status = STATUS_INFEASIBLE
    else:
        status = STATUS_OPTIMAL

    report = SolveReport(
        status=status,
        optimum=incumbent.best.value if incumbent.best else None,
        incumbent=incumbent.best,
        nodes=nodes,
        oracle_queries=oracle.stats.queries - queries_before,
        oracle_time=oracle.stats.seconds - seconds_before,
        wall_time=time.perf_counter() - started,
        strategy=config.strategy,
        trace=trace,
    )
    logging.info(
        f"✅ {config.strategy}: {status}, optimum {report.to_dict()['optimum']}, "
        f"{nodes} nodes, {report.oracle_queries} oracle queries, {report.wall_time:.3f}s"
    )
    return report
