"""Instance parsing, solution files, best-known-solution tables and benchmarks.

Instance files follow the classic multi-depot text layout: a header
`type m n t` (vehicles per depot, customers, depots), t lines `D Q` (max route
duration and capacity, 0 meaning unlimited), n customer lines
`id x y service demand f a <a combination fields> [e l]`, then t depot lines in
the same layout. Time-window fields are present for the TW variant only.
"""
from __future__ import annotations

import csv
import math
import statistics
import time as time_mod
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from .engine import RunStats, SolverConfig, gap, run
from .model import INF, Instance, Node, Route, Solution, Variant, check_feasible, route_distance, simulate_route

EXPECTED_TYPE = {Variant.MDVRP: 2, Variant.MDVRPTW: 6, Variant.MDOVRP: 2}


class ParseError(ValueError):
    pass


def _tokens(path: Path) -> list[tuple[int, list[str]]]:
    out = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        toks = line.split()
        if toks:
            out.append((lineno, toks))
    return out


def _node_fields(lineno: int, toks: list[str], want_windows: bool):
    """(file_id, x, y, service, demand, e, l) from one node line."""
    try:
        fid = int(float(toks[0]))
        x, y = float(toks[1]), float(toks[2])
        service = float(toks[3]) if len(toks) > 3 else 0.0
        demand = float(toks[4]) if len(toks) > 4 else 0.0
        rest = toks[5:]
        if len(rest) >= 2:
            ncombo = int(float(rest[1]))
            rest = rest[2 + ncombo:]
        e = l = None
        if len(rest) >= 2:
            e, l = float(rest[-2]), float(rest[-1])
    except (ValueError, IndexError) as exc:
        raise ParseError(f"line {lineno}: malformed node line: {exc}") from exc
    if want_windows and e is None:
        raise ParseError(f"line {lineno}: time-window fields missing for TW variant")
    return fid, x, y, service, demand, e, l


def parse_instance(path, variant: Variant, relax_fleet: bool = False) -> Instance:
    """Parse one instance file and apply the variant's relaxations."""
    path = Path(path)
    variant = Variant(variant)
    lines = _tokens(path)
    if not lines:
        raise ParseError(f"{path}: empty instance file")
    lineno, head = lines[0]
    if len(head) < 4:
        raise ParseError(f"line {lineno}: header needs 'type m n t'")
    try:
        ptype, m, n, t = (int(float(v)) for v in head[:4])
    except ValueError as exc:
        raise ParseError(f"line {lineno}: bad header: {exc}") from exc
    if ptype != EXPECTED_TYPE[variant]:
        raise ParseError(
            f"line {lineno}: problem type {ptype} does not match variant "
            f"{variant.value} (expected {EXPECTED_TYPE[variant]})")
    if len(lines) < 1 + t + n + t:
        raise ParseError(f"{path}: expected {1 + t + n + t} data lines, found {len(lines)}")

    durations = []
    capacities = []
    for lineno, toks in lines[1:1 + t]:
        if len(toks) < 2:
            raise ParseError(f"line {lineno}: depot spec needs 'D Q'")
        durations.append(float(toks[0]))
        capacities.append(float(toks[1]))
    if len(set(capacities)) > 1 or len(set(durations)) > 1:
        raise ParseError(f"{path}: heterogeneous depot specs are not supported")
    capacity = capacities[0] if capacities[0] > 0 else INF
    max_duration = durations[0] if durations[0] > 0 else INF

    want_windows = variant is Variant.MDVRPTW
    cust_rows = [_node_fields(lineno, toks, want_windows)
                 for lineno, toks in lines[1 + t:1 + t + n]]
    depot_rows = [_node_fields(lineno, toks, False)
                  for lineno, toks in lines[1 + t + n:1 + t + n + t]]

    fleet = float(m) if m > 0 else INF
    if variant is Variant.MDOVRP:
        fleet = INF
        max_duration = INF
    if relax_fleet:
        fleet = INF

    depot_xy = [(r[1], r[2]) for r in depot_rows]
    depot_windows = None
    if want_windows:
        depot_windows = [(r[5] if r[5] is not None else 0.0,
                          r[6] if r[6] is not None else INF) for r in depot_rows]
    customers = []
    for fid, x, y, service, demand, e, l in cust_rows:
        if want_windows:
            customers.append((x, y, demand, service, e, l))
        else:
            customers.append((x, y, demand, service))
    labels = [r[0] for r in depot_rows] + [r[0] for r in cust_rows]
    return Instance.from_coords(
        variant, depot_xy, customers,
        fleet_per_depot=fleet, capacity=capacity, max_duration=max_duration,
        depot_windows=depot_windows, labels=labels, name=path.stem)


# --------------------------------------------------------------------------- #
# solution files
# --------------------------------------------------------------------------- #

def write_solution(sol: Solution, path, inst: Instance) -> None:
    """Text format: total cost, then one line per route:
    `depart_label [arrive_label] cost load: c1 c2 ...` (labels from the file)."""
    path = Path(path)
    lab = inst.labels
    lines = [f"{sum(route_distance(r, inst) for r in sol.routes):.2f}"]
    for r in sol.routes:
        sim = simulate_route(r, inst)
        custs = " ".join(str(lab[c]) for c in r.customers)
        if inst.open_routes:
            lines.append(f"{lab[r.depart]} {sim.distance:.2f} {sim.load:g}: {custs}")
        else:
            lines.append(f"{lab[r.depart]} {lab[r.arrive]} {sim.distance:.2f} {sim.load:g}: {custs}")
    path.write_text("\n".join(lines) + "\n")


def read_solution(path, inst: Instance) -> Solution:
    path = Path(path)
    label_to_id = {lab: i for i, lab in enumerate(inst.labels)}
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    sol = Solution()
    for ln in lines[1:]:
        head, _, tail = ln.partition(":")
        toks = head.split()
        custs = [label_to_id[int(v)] for v in tail.split()]
        depart = label_to_id[int(toks[0])]
        arrive = depart if inst.open_routes else label_to_id[int(toks[1])]
        sol.routes.append(Route(depart, arrive, custs))
    return sol


# --------------------------------------------------------------------------- #
# best-known values and benchmark reports
# --------------------------------------------------------------------------- #

class BksTable:
    """Instance name -> (best known cost, proven optimal flag)."""

    def __init__(self, entries: dict[str, tuple[float, bool]]):
        self.entries = entries

    @staticmethod
    def load(path) -> "BksTable":
        entries = {}
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].startswith("#") or row[0] == "name":
                    continue
                cost = float(row[1])
                if cost <= 0:
                    raise ValueError(f"BKS for {row[0]} must be positive")
                entries[row[0]] = (cost, len(row) > 2 and row[2].strip() in ("1", "true", "yes"))
        return BksTable(entries)

    def get(self, name: str) -> Optional[float]:
        hit = self.entries.get(name)
        return hit[0] if hit else None


@dataclass
class BenchRow:
    name: str
    n_customers: int
    n_depots: int
    f_best: float
    f_avg: float
    wall_time: float
    gap: Optional[float]
    feasible: bool


@dataclass
class BenchReport:
    rows: list[BenchRow] = field(default_factory=list)

    def aggregate(self) -> dict:
        done = [r for r in self.rows if r.feasible]
        out = {
            "f_best": statistics.fmean(r.f_best for r in done) if done else math.nan,
            "f_avg": statistics.fmean(r.f_avg for r in done) if done else math.nan,
            "time": statistics.fmean(r.wall_time for r in self.rows) if self.rows else math.nan,
        }
        gaps = [r.gap for r in done if r.gap is not None]
        out["gap"] = statistics.fmean(gaps) if gaps else None
        return out

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["instance", "customers", "depots", "f_best", "f_avg",
                        "time_s", "gap_pct", "feasible"])
            for r in self.rows:
                w.writerow([r.name, r.n_customers, r.n_depots,
                            f"{r.f_best:.2f}", f"{r.f_avg:.2f}", f"{r.wall_time:.1f}",
                            "" if r.gap is None else f"{r.gap:.2f}", int(r.feasible)])
            agg = self.aggregate()
            w.writerow(["MEAN", "", "", f"{agg['f_best']:.2f}", f"{agg['f_avg']:.2f}",
                        f"{agg['time']:.1f}",
                        "" if agg["gap"] is None else f"{agg['gap']:.2f}", ""])

    def table(self) -> str:
        lines = [f"{'instance':<12}{'best':>12}{'avg':>12}{'time(s)':>10}{'gap(%)':>9}"]
        for r in self.rows:
            g = "" if r.gap is None else f"{r.gap:.2f}"
            flag = "" if r.feasible else "  [infeasible]"
            lines.append(f"{r.name:<12}{r.f_best:>12.2f}{r.f_avg:>12.2f}"
                         f"{r.wall_time:>10.1f}{g:>9}{flag}")
        agg = self.aggregate()
        g = "" if agg["gap"] is None else f"{agg['gap']:.2f}"
        lines.append(f"{'MEAN':<12}{agg['f_best']:>12.2f}{agg['f_avg']:>12.2f}"
                     f"{agg['time']:>10.1f}{g:>9}")
        return "\n".join(lines)


def _run_one(args):
    path, variant, relax_fleet, cfg_kwargs, seed = args
    inst = parse_instance(path, variant, relax_fleet)
    cfg = SolverConfig(**cfg_kwargs, seed=seed)
    stats = run(inst, cfg)
    cost = stats.best_cost if stats.feasible_found else stats.best_infeasible_cost
    return path, cost, stats.feasible_found, stats.wall_time


def run_benchmark(instance_dir, variant: Variant, cfg: SolverConfig, runs: int,
                  bks: Optional[BksTable] = None, relax_fleet: bool = False,
                  jobs: int = 1) -> BenchReport:
    """Solve every instance in a directory `runs` times with seeds 1..runs."""
    instance_dir = Path(instance_dir)
    paths = sorted(p for p in instance_dir.iterdir()
                   if p.is_file() and p.suffix.lower() not in (".csv", ".md"))
    if not paths:
        raise FileNotFoundError(f"no instance files under {instance_dir}")
    cfg_kwargs = {k: v for k, v in vars(cfg).items() if k != "seed"}
    tasks = [(str(p), variant, relax_fleet, cfg_kwargs, seed)
             for p in paths for seed in range(1, runs + 1)]
    results: dict[str, list] = {str(p): [] for p in paths}
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for path, cost, feas, wall in pool.map(_run_one, tasks):
                results[path].append((cost, feas, wall))
    else:
        for task in tasks:
            path, cost, feas, wall = _run_one(task)
            results[path].append((cost, feas, wall))

    report = BenchReport()
    for p in paths:
        inst = parse_instance(p, variant, relax_fleet)
        rows = results[str(p)]
        feas_costs = [c for c, f, _ in rows if f]
        feasible = bool(feas_costs)
        costs = feas_costs if feasible else [c for c, _, _ in rows]
        best = min(costs)
        avg = statistics.fmean(costs)
        wall = statistics.fmean(w for _, _, w in rows)
        ref = bks.get(inst.name) if bks else None
        report.rows.append(BenchRow(
            inst.name, inst.n_customers, inst.n_depots, best, avg, wall,
            gap(best, ref) if (ref and feasible) else None, feasible))
    return report
