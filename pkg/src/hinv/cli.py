"""Command-line driver: rank-sweep experiments and mesh/partition dumps.

Exit codes: 0 success, 2 problem-size budget violation, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys

from .bench import (PROBLEMS, BudgetExceededError, ExperimentConfig, emit_csv,
                    run_experiment)
from .clustering import build_cluster_tree, build_partition
from .dense import NotSpdError, SingularMatrixError
from .fem import DofMap
from .mesh import build_problem_mesh

EXIT_OK = 0
EXIT_BUDGET = 2
EXIT_NUMERICAL = 3


def parse_ranks(text: str) -> list[int]:
    """Parse '1..16' or a comma-separated list like '1,2,4,8'."""
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(t) for t in text.split(",") if t]


def _add_problem_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--problem", required=True, choices=PROBLEMS)
    p.add_argument("--n", required=True, type=int, help="subdivisions per axis")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hinv",
        description="Blockwise low-rank compression experiments for inverses "
                    "of FEM stiffness matrices")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a rank-sweep experiment")
    _add_problem_args(run)
    run.add_argument("--eta", type=float, default=2.0)
    run.add_argument("--nleaf", type=int, default=25)
    run.add_argument("--mode", choices=("strong", "weak"), default="strong")
    run.add_argument("--ranks", default="1..16", help="'lo..hi' or comma list")
    run.add_argument("--target", choices=("inverse", "lu", "cholesky"),
                     default="inverse")
    run.add_argument("--out", required=True, help="output CSV path")
    run.add_argument("--seed", type=int, default=42)

    md = sub.add_parser("mesh-dump", help="print a plain-text mesh dump")
    _add_problem_args(md)

    pd = sub.add_parser("partition-dump", help="print the block partition")
    _add_problem_args(pd)
    pd.add_argument("--eta", type=float, default=2.0)
    pd.add_argument("--nleaf", type=int, default=25)
    pd.add_argument("--mode", choices=("strong", "weak"), default="strong")

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            config = ExperimentConfig(
                problem=args.problem, n=args.n, eta=args.eta, n_leaf=args.nleaf,
                mode=args.mode, ranks=parse_ranks(args.ranks),
                target=args.target, seed=args.seed)
            result = run_experiment(config)
            emit_csv(result.records, result.fits, args.out)
            print(f"problem={config.problem} N={result.N} depth={result.depth} "
                  f"C_sp={result.c_sp} rows={len(result.records)} -> {args.out}")
            for fit in result.fits:
                print(f"  fit s={fit.s:g}: error ~ {fit.prefactor:.3g} "
                      f"* exp(-{fit.b:.3g} * r^{fit.s:g}), "
                      f"corr={fit.correlation:.4f}")
        elif args.command == "mesh-dump":
            mesh = build_problem_mesh(args.problem, args.n)
            sys.stdout.write(mesh.dump())
        elif args.command == "partition-dump":
            mesh = build_problem_mesh(args.problem, args.n)
            dofmap = DofMap.from_mesh(mesh)
            tree = build_cluster_tree(mesh, dofmap, args.nleaf)
            partition = build_partition(tree, args.eta, args.mode)
            sys.stdout.write(partition.dump())
    except BudgetExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (SingularMatrixError, NotSpdError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
