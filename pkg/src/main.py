import os
import sys
import json
import logging
import argparse
from datetime import datetime

from .config_loader import (
    load_config,
    parse_oracle_name,
    DEFAULT_OUTPUT_PATH,
    DEFAULT_LOGS_PATH,
    SUPPORTED_STRATEGIES,
    SUPPORTED_BOUND_MODES,
)
from .driver import SolveConfig, solve
from .workbench import (
    GenSpec,
    generate,
    load_instance,
    noise_audit,
    run_benchmark,
    save_instance,
    write_trace_csv,
)


def setup_logging(command="run"):
    """Set up logging with timestamp-based log file."""
    os.makedirs(DEFAULT_LOGS_PATH, exist_ok=True)
    timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
    log_file = os.path.join(DEFAULT_LOGS_PATH, f"{command}_{timestamp}.log")

    # Configure logging
    logging.basicConfig(
        level=logging.INFO,
        format='%(asctime)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler(log_file),
            logging.StreamHandler()
        ]
    )

    logging.info(f"✅ Log file created: {log_file}")
    return log_file


def print_supported_strategies():
    """Print list of supported branching strategies."""
    print("\nSupported Strategies:")
    print("---------------------")
    for name, description in SUPPORTED_STRATEGIES.items():
        print(f"{name} ({description})")


def _write_json(data, path):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(data, f, indent=2)
    logging.info(f"✅ Saved report: {path}")


def _solve_config(args, config):
    return SolveConfig.from_config(
        config,
        strategy=getattr(args, "strategy", None),
        oracle=getattr(args, "oracle", None),
        rho=getattr(args, "rho", None),
        bound_mode=getattr(args, "bound", None),
        seed=getattr(args, "seed", None),
        max_nodes=getattr(args, "max_nodes", None),
        max_time=getattr(args, "max_time", None),
    )


def run_solve(args, config):
    generated = load_instance(args.instance)
    logging.info(f"Solving {args.instance}: n={generated.instance.n}, m={generated.instance.m}")
    report = solve(generated.instance, _solve_config(args, config))
    data = report.to_dict()
    print(json.dumps(data, indent=2))
    if args.out:
        _write_json(data, args.out)
    if args.trace:
        write_trace_csv(report.trace, args.trace)
    return 0 if report.optimal or report.status == "infeasible" else 2


def run_generate(args, config):
    spec = GenSpec(
        n=args.n,
        m=args.m,
        density_q=args.density_q,
        density_a=args.density_a,
        seed=args.seed if args.seed is not None else config["SEED"],
    )
    save_instance(generate(spec), args.out)
    return 0


def run_bench(args, config):
    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    os.makedirs(DEFAULT_OUTPUT_PATH, exist_ok=True)
    run_benchmark(
        sizes,
        args.per_size,
        args.strategies,
        baseline_path=args.baseline,
        reference_strategy=args.reference_strategy,
        oracle_time_zero=args.oracle_time_zero,
        config=_solve_config(args, config),
        seed=args.seed if args.seed is not None else config["SEED"],
        out_nodes=args.out_nodes or os.path.join(DEFAULT_OUTPUT_PATH, "nodes.csv"),
        out_times=args.out_times or os.path.join(DEFAULT_OUTPUT_PATH, "times.csv"),
        out_rows=args.out_rows,
    )
    return 0


def run_audit(args, config):
    generated = load_instance(args.instance)
    audit = noise_audit(generated.instance, args.epsilon, args.seed or 0, _solve_config(args, config))
    data = audit.to_dict()
    print(json.dumps(data, indent=2))
    if args.out:
        _write_json(data, args.out)
    return 1 if audit.optimum_mismatch else 0


def build_parser():
    parser = argparse.ArgumentParser(prog="lagrange-bnb", description="Branch-and-bound for constrained binary quadratic programs")
    parser.add_argument("--list-strategies", action="store_true", help="print the branching strategies and exit")
    parser.add_argument("--config", help="path to the JSON configuration file")
    commands = parser.add_subparsers(dest="command")

    solve_cmd = commands.add_parser("solve", help="solve one instance file")
    solve_cmd.add_argument("--instance", required=True)
    solve_cmd.add_argument("--strategy", choices=list(SUPPORTED_STRATEGIES))
    solve_cmd.add_argument("--oracle", help="exact, sa or noisy:<eps>")
    solve_cmd.add_argument("--rho", type=int)
    solve_cmd.add_argument("--bound", choices=list(SUPPORTED_BOUND_MODES))
    solve_cmd.add_argument("--seed", type=int)
    solve_cmd.add_argument("--max-nodes", type=int)
    solve_cmd.add_argument("--max-time", type=float)
    solve_cmd.add_argument("--out", help="write the JSON report here")
    solve_cmd.add_argument("--trace", help="write the per-node CSV trace here")
    solve_cmd.set_defaults(handler=run_solve)

    gen_cmd = commands.add_parser("generate", help="generate a random feasible instance")
    gen_cmd.add_argument("--n", type=int, required=True)
    gen_cmd.add_argument("--m", type=int)
    gen_cmd.add_argument("--density-q", type=float, default=0.3)
    gen_cmd.add_argument("--density-a", type=float, default=0.5)
    gen_cmd.add_argument("--seed", type=int)
    gen_cmd.add_argument("--out", required=True)
    gen_cmd.set_defaults(handler=run_generate)

    bench_cmd = commands.add_parser("bench", help="run every strategy on generated instances")
    bench_cmd.add_argument("--sizes", default="10,12,14")
    bench_cmd.add_argument("--per-size", type=int, default=8)
    bench_cmd.add_argument("--strategies", default="all")
    baseline = bench_cmd.add_mutually_exclusive_group()
    baseline.add_argument("--baseline", help="CSV with size,instance,baseline_time")
    baseline.add_argument("--reference-strategy", choices=list(SUPPORTED_STRATEGIES))
    bench_cmd.add_argument("--oracle-time-zero", action="store_true", help="count time spent inside the oracle as zero")
    bench_cmd.add_argument("--bound", choices=list(SUPPORTED_BOUND_MODES))
    bench_cmd.add_argument("--seed", type=int)
    bench_cmd.add_argument("--out-nodes")
    bench_cmd.add_argument("--out-times")
    bench_cmd.add_argument("--out-rows")
    bench_cmd.set_defaults(handler=run_bench)

    audit_cmd = commands.add_parser("audit-noise", help="compare a noisy-oracle run with an exact one")
    audit_cmd.add_argument("--instance", required=True)
    audit_cmd.add_argument("--epsilon", type=int, required=True)
    audit_cmd.add_argument("--strategy", choices=list(SUPPORTED_STRATEGIES))
    audit_cmd.add_argument("--seed", type=int)
    audit_cmd.add_argument("--out")
    audit_cmd.set_defaults(handler=run_audit)

    return parser


def main(argv=None):
    """Main entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.list_strategies:
        print_supported_strategies()
        sys.exit(0)
    if not args.command:
        parser.print_help()
        sys.exit(1)

    try:
        setup_logging(args.command)
        config = load_config(args.config)
        logging.info("Configuration loaded successfully")
        if getattr(args, "oracle", None):
            parse_oracle_name(args.oracle)
        code = args.handler(args, config)
    except Exception as e:
        logging.error(f"❌ Fatal error: {str(e)}", exc_info=True)
        sys.exit(1)
    sys.exit(code)


if __name__ == "__main__":
    main()
