import csv

from osmosis.bench import REFERENCE_RUNS, bench, steady_comparison, write_bench_csv
from osmosis.solvers import SchemeConfig


def test_bench_rows_and_csv(tmp_path):
    rows = bench([1000, 4000], SchemeConfig(), ("mos", "implicit", "explicit"), steps=2, repeats=1)
    assert [(r.scheme, r.width) for r in rows] == [("mos", 32), ("implicit", 32), ("explicit", 32),
                                                   ("mos", 63), ("implicit", 63), ("explicit", 63)]
    assert all(r.pixels_per_second > 0 for r in rows)
    assert rows[2].tau < 1 and rows[0].tau == 1000.0
    path = tmp_path / "b.csv"
    write_bench_csv(rows, path)
    lines = path.read_text().splitlines()
    assert sum(l.startswith("# reference") for l in lines) == len(REFERENCE_RUNS)
    parsed = list(csv.DictReader(l for l in lines if not l.startswith("#")))
    assert len(parsed) == 6 and float(parsed[0]["tau"]) == 1000.0


def test_mos_needs_far_fewer_steps():
    res = steady_comparison(24, seed=3)
    assert res["mos_iterations"] is not None and res["explicit_iterations"] is not None
    assert 10 * res["mos_iterations"] <= res["explicit_iterations"]
