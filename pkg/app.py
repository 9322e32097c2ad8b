#!/usr/bin/env python3
"""
narrownet - Unified Entry Point

Deep-and-narrow ReLU networks on the squared-distance counterexample f on the ball K.

Commands:
1. sample:    python app.py sample --method grid --n 2 --k 100 --out grid.csv
2. train:     python app.py train --sample grid.csv --n 2 --w 2 --d 8 --out runs/one
3. diagnose:  python app.py diagnose --model runs/one/model.json --sample grid.csv --out diag.json
4. suite:     python app.py suite --config configs/n2_w2.toml [--scale 10] [--threads 4] [--seed 7]
5. table:     python app.py table --results results/n2_w2
6. figure:    python app.py figure --results results/n2_w2 --id fig1
7. verify:    python app.py verify --results results/n2_w2
8. gradcheck: python app.py gradcheck --trials 100

Environment Variables:
- NARROWNET_RESULTS_DIR: Default parent directory for suite results (default: results)
- NARROWNET_THREADS: Worker processes for suite runs (default: 1)
- NARROWNET_GRID_CAP: Largest lattice grid_sample will enumerate (default: 10^7)
- NARROWNET_LOG_LEVEL: Logging level (default: INFO)
- NARROWNET_LOG_FILE: Also log to this file
"""

import os
import sys
import logging
import argparse

# Load environment variables
from dotenv import load_dotenv

load_dotenv()

# Setup logging
_handlers = [logging.StreamHandler(sys.stdout)]
if os.getenv("NARROWNET_LOG_FILE"):
    _handlers.append(logging.FileHandler(os.getenv("NARROWNET_LOG_FILE"), mode="a"))
logging.basicConfig(
    level=os.getenv("NARROWNET_LOG_LEVEL", "INFO").upper(),
    format="[%(asctime)s] [%(levelname)-8s] %(message)s",
    datefmt="%Y-%m-%d %H:%M:%S",
    handlers=_handlers,
)
logger = logging.getLogger(__name__)

# Experiment grid of the gradient acceptance check
GRADCHECK_DEPTHS = (1, 2, 8, 10, 20)
GRADCHECK_DIMS = (2, 5)


def cli_sample(args):
    """CLI: Generate a training set."""
    from core.tasks import run_sample

    result = run_sample(args.method, args.n, args.out, k=args.k, count=args.count, seed=args.seed)
    print(result.message)
    return 0 if result.success else 1


def cli_train(args):
    """CLI: Train one network."""
    from core.tasks import run_train
    from network import ArchSpec
    from optim import TrainConfig

    try:
        arch = ArchSpec(args.n, args.w, args.d)
        config = TrainConfig(
            optimizer=args.optimizer,
            lr=args.lr,
            epsilon=args.epsilon,
            epochs=args.epochs,
            batch_size=args.batch_size,
            shuffle_seed=args.seed,
            init_seed=args.seed,
        )
    except ValueError as e:
        print(f"Error: {e}")
        return 2

    result = run_train(args.sample, arch, config, args.out)
    print(result.message)
    if result.file_path:
        print(f"Model: {result.file_path}")
    return 0 if result.success else 1


def cli_diagnose(args):
    """CLI: Diagnose a stored model."""
    from core.tasks import run_diagnose

    result = run_diagnose(args.model, args.sample, args.out, dot=args.dot, seed=args.seed, directions=args.directions)
    print(result.message)
    return 0 if result.success else 1


def cli_suite(args):
    """CLI: Run an experiment suite."""
    from core.tasks import run_suite_task

    threads = args.threads or int(os.getenv("NARROWNET_THREADS", "1"))
    result = run_suite_task(
        args.config, out=args.out, scale=args.scale, workers=threads, only=args.only, seed=args.seed
    )
    print(result.message)
    return 0 if result.success else 1


def cli_table(args):
    """CLI: Aggregate Table 1."""
    from core.tasks import run_table

    result = run_table(args.results)
    print(result.message)
    return 0 if result.success else 1


def cli_figure(args):
    """CLI: Emit figure data."""
    from core.tasks import run_figure

    result = run_figure(args.results, args.id, argmax=args.argmax, diagrams=args.diagrams, plot=not args.no_plot)
    print(result.message)
    return 0 if result.success else 1


def cli_verify(args):
    """CLI: Check a finished suite."""
    from core.tasks import run_verify

    result = run_verify(args.results)
    print(result.message)
    print(f"Status: {'OK' if result.success else 'FAIL'}")
    return 0 if result.success else 1


def cli_gradcheck(args):
    """CLI: Finite-difference gradient checks over the experiment grid."""
    from core.tasks import run_gradcheck
    from network import ArchSpec

    if args.n:
        archs = [ArchSpec(args.n, args.w or args.n, d) for d in (args.d or GRADCHECK_DEPTHS)]
    else:
        archs = [ArchSpec(n, w, d) for n in GRADCHECK_DIMS for w in (n, n + 1) for d in GRADCHECK_DEPTHS]
    result = run_gradcheck(archs, trials=args.trials, seed=args.seed)
    print(result.message)
    return 0 if result.success else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="narrownet",
        description="narrownet - deep and narrow ReLU networks on the counterexample target",
    )
    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    # sample command
    sample_parser = subparsers.add_parser("sample", help="Generate a training set")
    sample_parser.add_argument("--method", choices=["grid", "uniform", "radial"], required=True)
    sample_parser.add_argument("--n", type=int, required=True)
    sample_parser.add_argument("--k", type=int, help="points per axis (grid)")
    sample_parser.add_argument("--count", type=int, help="points to keep (uniform, radial)")
    sample_parser.add_argument("--seed", type=int, default=0)
    sample_parser.add_argument("--out", required=True)
    sample_parser.set_defaults(func=cli_sample)

    # train command
    train_parser = subparsers.add_parser("train", help="Train one network on a sample file")
    train_parser.add_argument("--sample", required=True)
    train_parser.add_argument("--n", type=int, required=True)
    train_parser.add_argument("--w", type=int, required=True)
    train_parser.add_argument("--d", type=int, required=True)
    train_parser.add_argument("--optimizer", choices=["adam", "sgd"], default="adam")
    train_parser.add_argument("--lr", type=float, default=0.001)
    train_parser.add_argument("--epsilon", type=float, default=1e-7)
    train_parser.add_argument("--epochs", type=int, default=50)
    train_parser.add_argument("--batch-size", type=int, default=1)
    train_parser.add_argument("--seed", type=int, default=0)
    train_parser.add_argument("--out", required=True)
    train_parser.set_defaults(func=cli_train)

    # diagnose command
    diagnose_parser = subparsers.add_parser("diagnose", help="Dead neurons, S_N case, bound check")
    diagnose_parser.add_argument("--model", required=True)
    diagnose_parser.add_argument("--sample", required=True)
    diagnose_parser.add_argument("--out", required=True)
    diagnose_parser.add_argument("--dot", help="also write a DOT diagram here")
    diagnose_parser.add_argument("--directions", type=int, default=10_000)
    diagnose_parser.add_argument("--seed", type=int, default=0)
    diagnose_parser.set_defaults(func=cli_diagnose)

    # suite command
    suite_parser = subparsers.add_parser("suite", help="Run an experiment suite")
    suite_parser.add_argument("--config", required=True)
    suite_parser.add_argument("--out")
    suite_parser.add_argument("--scale", type=int, default=1, help="divide sample counts and epochs")
    suite_parser.add_argument("--threads", type=int, help="parallel worker processes")
    suite_parser.add_argument("--only", nargs="+", help="run only these experiments")
    suite_parser.add_argument("--seed", type=int, help="override the config's master_seed")
    suite_parser.set_defaults(func=cli_suite)

    # table command
    table_parser = subparsers.add_parser("table", help="Aggregate min/avg/max sup-norm")
    table_parser.add_argument("--results", required=True)
    table_parser.set_defaults(func=cli_table)

    # figure command
    figure_parser = subparsers.add_parser("figure", help="Emit figure data and plots")
    figure_parser.add_argument("--results", required=True)
    figure_parser.add_argument("--id", required=True, help="figure id, or experiment name with --argmax/--diagrams")
    figure_parser.add_argument("--argmax", action="store_true")
    figure_parser.add_argument("--diagrams", action="store_true")
    figure_parser.add_argument("--no-plot", action="store_true")
    figure_parser.set_defaults(func=cli_figure)

    # verify command
    verify_parser = subparsers.add_parser("verify", help="Check a finished suite")
    verify_parser.add_argument("--results", required=True)
    verify_parser.set_defaults(func=cli_verify)

    # gradcheck command
    gradcheck_parser = subparsers.add_parser("gradcheck", help="Finite-difference gradient checks")
    gradcheck_parser.add_argument("--n", type=int)
    gradcheck_parser.add_argument("--w", type=int)
    gradcheck_parser.add_argument("--d", type=int, nargs="+")
    gradcheck_parser.add_argument("--trials", type=int, default=100)
    gradcheck_parser.add_argument("--seed", type=int, default=0)
    gradcheck_parser.set_defaults(func=cli_gradcheck)

    return parser


def main(argv=None):
    """Main entry point with argument parsing."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return 2
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
