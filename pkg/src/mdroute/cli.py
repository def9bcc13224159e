"""Command-line interface: solve one instance or benchmark a directory."""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from .bench import BksTable, ParseError, parse_instance, run_benchmark, write_solution
from .engine import SolverConfig, gap, run
from .model import Variant, check_feasible

EXIT_OK = 0
EXIT_PARSE_ERROR = 1
EXIT_INFEASIBLE = 2


def _add_solver_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--variant", required=True, choices=[v.value for v in Variant])
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--time-limit", type=float, default=None, metavar="S")
    p.add_argument("--generations", type=int, default=5000)
    p.add_argument("--patience", type=int, default=500)
    p.add_argument("--pop-size", type=int, default=20)
    p.add_argument("--granularity", type=int, default=50)
    p.add_argument("--depth", type=int, default=500)
    p.add_argument("--kappa", type=float, default=0.5)
    p.add_argument("--xi", type=float, default=0.7)
    p.add_argument("--multi-move", choices=["on", "off"], default="off")
    p.add_argument("--relax-fleet", choices=["on", "off"], default="off",
                   help="ignore the per-depot fleet limit from the file")


def _config(args, seed=None) -> SolverConfig:
    return SolverConfig(
        generations=args.generations,
        patience=args.patience,
        time_limit=args.time_limit if args.time_limit is not None else math.inf,
        mu=args.pop_size,
        theta=args.granularity,
        depth=args.depth,
        kappa=args.kappa,
        xi=args.xi,
        multi_move=args.multi_move == "on",
        seed=args.seed if seed is None else seed,
    )


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="mdroute",
                                 description="Multi-depot vehicle routing solver")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("solve", help="solve a single instance")
    sp.add_argument("--instance", required=True)
    _add_solver_args(sp)
    sp.add_argument("--bks", default=None, help="CSV of best known costs")
    sp.add_argument("--out", default=None, help="write the best solution here")

    bp = sub.add_parser("bench", help="run a benchmark directory")
    bp.add_argument("--dir", required=True)
    _add_solver_args(bp)
    bp.add_argument("--bks", default=None)
    bp.add_argument("--runs", type=int, default=10)
    bp.add_argument("--report", default=None, help="CSV report path")
    bp.add_argument("--jobs", type=int, default=1)

    args = ap.parse_args(argv)
    try:
        if args.command == "solve":
            return _cmd_solve(args)
        return _cmd_bench(args)
    except (ParseError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE_ERROR


def _cmd_solve(args) -> int:
    variant = Variant(args.variant)
    inst = parse_instance(args.instance, variant, args.relax_fleet == "on")
    stats = run(inst, _config(args))
    if not stats.feasible_found:
        print(f"{inst.name}: no feasible solution found "
              f"(best infeasible cost {stats.best_infeasible_cost:.2f})")
        if args.out and stats.best_infeasible is not None:
            write_solution(stats.best_infeasible, args.out, inst)
        return EXIT_INFEASIBLE
    line = (f"{inst.name}: cost {stats.best_cost:.2f} "
            f"generations {stats.generations} time {stats.wall_time:.1f}s")
    if args.bks:
        ref = BksTable.load(args.bks).get(inst.name)
        if ref:
            line += f" gap {gap(stats.best_cost, ref):.2f}%"
    print(line)
    rep = check_feasible(stats.best, inst)
    if not rep.all_ok:
        print("warning: emitted solution failed the feasibility audit", file=sys.stderr)
    if args.out:
        write_solution(stats.best, args.out, inst)
    return EXIT_OK


def _cmd_bench(args) -> int:
    variant = Variant(args.variant)
    bks = BksTable.load(args.bks) if args.bks else None
    report = run_benchmark(Path(args.dir), variant, _config(args), args.runs,
                           bks=bks, relax_fleet=args.relax_fleet == "on",
                           jobs=args.jobs)
    print(report.table())
    if args.report:
        report.write_csv(args.report)
    if any(not row.feasible for row in report.rows):
        return EXIT_INFEASIBLE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
