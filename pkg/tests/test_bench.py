import random
from pathlib import Path

import pytest

from mdroute.bench import (BksTable, ParseError, parse_instance, read_solution,
                           run_benchmark, write_solution)
from mdroute.cli import main as cli_main
from mdroute.engine import SolverConfig
from mdroute.model import INF, Route, Solution, Variant, check_feasible, objective

from conftest import make_instance, random_solution

DATA = Path(__file__).resolve().parents[1] / "src" / "mdroute" / "data"


def bundled(name):
    return DATA / "instances" / name


# --------------------------------------------------------------------------- #
# parsing
# --------------------------------------------------------------------------- #

def test_parse_p01_shape():
    inst = parse_instance(bundled("p01"), Variant.MDVRP)
    assert inst.n_customers == 50
    assert inst.n_depots == 4
    assert inst.fleet_per_depot == 4
    assert inst.capacity == 80
    assert inst.max_duration == INF
    assert not inst.open_routes
    assert inst.labels[:4] == [51, 52, 53, 54]  # depots keep their file ids


def test_parse_p02_fleet_limit():
    inst = parse_instance(bundled("p02"), Variant.MDVRP)
    assert inst.fleet_per_depot == 2
    assert inst.capacity == 160


def test_parse_open_variant_relaxations():
    inst = parse_instance(bundled("p01"), Variant.MDOVRP)
    assert inst.open_routes
    assert inst.fleet_per_depot == INF
    assert inst.max_duration == INF


def test_parse_relax_fleet_flag():
    inst = parse_instance(bundled("p01"), Variant.MDVRP, relax_fleet=True)
    assert inst.fleet_per_depot == INF


def test_parse_rejects_wrong_type_code():
    with pytest.raises(ParseError, match="expected 6"):
        parse_instance(bundled("p01"), Variant.MDVRPTW)


def test_parse_reports_line_numbers(tmp_path):
    bad = tmp_path / "bad"
    bad.write_text("2 4 2 1\n0 80\n1 x y z\n2 1 1 0 5 1 1 1\n51 0 0 0 0 0 0\n")
    with pytest.raises(ParseError, match="line 3"):
        parse_instance(bad, Variant.MDVRP)


def test_parse_count_mismatch(tmp_path):
    bad = tmp_path / "short"
    bad.write_text("2 4 5 2\n0 80\n0 80\n1 0 0 0 5 1 1 1\n")
    with pytest.raises(ParseError, match="expected"):
        parse_instance(bad, Variant.MDVRP)


def test_parse_time_windows(tmp_path):
    f = tmp_path / "tw"
    f.write_text(
        "6 2 2 1\n"
        "500 200\n"
        "1 10.0 0.0 5 4 1 1 1 30 60\n"
        "2 20.0 0.0 5 6 1 1 1 40 90\n"
        "51 0.0 0.0 0 0 0 0 0 1000\n")
    inst = parse_instance(f, Variant.MDVRPTW)
    assert inst.has_windows
    assert inst.tw_early[1] == 30 and inst.tw_late[1] == 60
    assert inst.tw_late[0] == 1000  # depot window
    assert inst.max_duration == 500
    with pytest.raises(ParseError, match="time-window"):
        g = tmp_path / "notw"
        g.write_text("6 2 1 1\n500 200\n1 10.0 0.0 5 4\n51 0.0 0.0 0 0\n")
        parse_instance(g, Variant.MDVRPTW)


# --------------------------------------------------------------------------- #
# solution files
# --------------------------------------------------------------------------- #

def test_write_empty_solution(tmp_path):
    inst = parse_instance(bundled("p01"), Variant.MDVRP)
    out = tmp_path / "sol.txt"
    write_solution(Solution(), out, inst)
    assert out.read_text() == "0.00\n"


def test_write_two_route_solution_has_three_lines(tmp_path):
    inst = parse_instance(bundled("p01"), Variant.MDVRP)
    sol = Solution([Route(0, 0, [4, 5]), Route(1, 1, [6])])
    out = tmp_path / "sol.txt"
    write_solution(sol, out, inst)
    assert len(out.read_text().splitlines()) == 3


def test_solution_round_trip(tmp_path):
    rng = random.Random(3)
    inst = parse_instance(bundled("p01"), Variant.MDVRP)
    sol = random_solution(rng, inst, scramble_depots=False)
    out = tmp_path / "sol.txt"
    write_solution(sol, out, inst)
    back = read_solution(out, inst)
    assert [(r.depart, r.arrive, r.customers) for r in back.routes] == \
        [(r.depart, r.arrive, r.customers) for r in sol.routes]
    header = float(out.read_text().splitlines()[0])
    assert header == pytest.approx(objective(sol, inst), abs=1e-2)


def test_solution_round_trip_open(tmp_path):
    rng = random.Random(4)
    inst = parse_instance(bundled("p01"), Variant.MDOVRP)
    sol = random_solution(rng, inst)
    out = tmp_path / "sol.txt"
    write_solution(sol, out, inst)
    back = read_solution(out, inst)
    assert [r.customers for r in back.routes] == [r.customers for r in sol.routes]


# --------------------------------------------------------------------------- #
# BKS tables and benchmark reports
# --------------------------------------------------------------------------- #

def test_bundled_bks_tables_load():
    for name, count in [("c97", 33), ("c97t", 10), ("c01", 20), ("c01r", 10),
                        ("v13", 28), ("l14", 24)]:
        table = BksTable.load(DATA / "bks" / f"{name}.csv")
        assert len(table.entries) == count
        assert all(cost > 0 for cost, _ in table.entries.values())
    c97 = BksTable.load(DATA / "bks" / "c97.csv")
    assert c97.get("p01") == 576.87
    assert c97.get("nonexistent") is None


def tiny_dir(tmp_path):
    d = tmp_path / "instances"
    d.mkdir()
    (d / "t01").write_text(
        "2 2 4 2\n"
        "0 50\n"
        "0 50\n"
        "1 1.0 0.0 0 10 1 1 1\n"
        "2 2.0 0.0 0 10 1 1 1\n"
        "3 9.0 0.0 0 10 1 1 1\n"
        "4 8.0 0.0 0 10 1 1 1\n"
        "51 0.0 0.0 0 0 0 0\n"
        "52 10.0 0.0 0 0 0 0\n")
    return d


def test_run_benchmark_report(tmp_path):
    d = tiny_dir(tmp_path)
    bks_csv = tmp_path / "bks.csv"
    bks_csv.write_text("name,cost,optimal\nt01,8.00,1\n")
    cfg = SolverConfig(generations=30, patience=30, mu=4, theta=4, depth=50)
    report = run_benchmark(d, Variant.MDVRP, cfg, runs=2,
                           bks=BksTable.load(bks_csv))
    assert len(report.rows) == 1
    row = report.rows[0]
    assert row.name == "t01"
    assert row.feasible and row.f_best > 0
    assert row.f_avg >= row.f_best - 1e-9
    # optimum: 51-1-2-51 and 52-4-3-52, cost 4 + 4
    assert row.f_best == pytest.approx(8.0)
    assert row.gap == pytest.approx(0.0)
    out_csv = tmp_path / "report.csv"
    report.write_csv(out_csv)
    lines = out_csv.read_text().splitlines()
    assert lines[0].startswith("instance")
    assert lines[-1].startswith("MEAN")
    agg = report.aggregate()
    assert agg["f_best"] == pytest.approx(row.f_best)
    assert "t01" in report.table()


def test_run_benchmark_missing_bks_leaves_gap_absent(tmp_path):
    d = tiny_dir(tmp_path)
    cfg = SolverConfig(generations=10, patience=10, mu=4, theta=4, depth=30)
    report = run_benchmark(d, Variant.MDVRP, cfg, runs=1)
    assert report.rows[0].gap is None
    assert report.aggregate()["gap"] is None


# --------------------------------------------------------------------------- #
# CLI
# --------------------------------------------------------------------------- #

def test_cli_solve_roundtrip(tmp_path, capsys):
    d = tiny_dir(tmp_path)
    out = tmp_path / "best.txt"
    rc = cli_main(["solve", "--instance", str(d / "t01"), "--variant", "mdvrp",
                   "--generations", "30", "--patience", "30", "--pop-size", "4",
                   "--granularity", "4", "--depth", "50", "--seed", "1",
                   "--out", str(out)])
    assert rc == 0
    text = capsys.readouterr().out
    assert "cost" in text
    inst = parse_instance(d / "t01", Variant.MDVRP)
    sol = read_solution(out, inst)
    assert check_feasible(sol, inst).all_ok


def test_cli_parse_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad"
    bad.write_text("not an instance\n")
    rc = cli_main(["solve", "--instance", str(bad), "--variant", "mdvrp"])
    assert rc == 1


def test_cli_bench(tmp_path, capsys):
    d = tiny_dir(tmp_path)
    report = tmp_path / "rep.csv"
    rc = cli_main(["bench", "--dir", str(d), "--variant", "mdvrp", "--runs", "1",
                   "--generations", "20", "--patience", "20", "--pop-size", "4",
                   "--granularity", "4", "--depth", "30", "--report", str(report)])
    assert rc == 0
    assert report.exists()
    assert "MEAN" in capsys.readouterr().out
