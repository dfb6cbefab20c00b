import json

import numpy as np
import pytest

from csma import experiments
from csma.cli import main
from csma.graph import gen_named, serialize_graph
from csma.report import rows_from_csv, rows_from_json


@pytest.fixture
def path3_file(tmp_path):
    f = tmp_path / "path3.json"
    f.write_text(serialize_graph(gen_named("path", 3)))
    return f


def test_throughput_exact_and_product(path3_file, tmp_path):
    out, js = tmp_path / "t.csv", tmp_path / "t.json"
    rc = main(["throughput", "--graph", str(path3_file), "--p", "0.5,0.5,0.5", "--T", "2",
               "--method", "exact,product2", "--out", str(out), "--json", str(js)])
    assert rc == 0
    cols, rows = rows_from_csv(out.read_text())
    assert cols == ["node", "exact", "product2"]
    for r in rows:
        assert r["exact"] == pytest.approx(r["product2"], abs=1e-9)
    assert rows[0]["exact"] == pytest.approx(6 / 17, rel=1e-8)
    meta = json.loads(js.read_text())["metadata"]
    assert meta["command"] == "throughput" and len(meta["config_hash"]) == 16


def test_throughput_zero_p(path3_file, capsys):
    assert main(["throughput", "--graph", str(path3_file), "--p", "0,0,0", "--method", "exact,renewal"]) == 0
    out = capsys.readouterr().out
    assert out.count(" 0 ") + out.count("  0\n") >= 3


def test_throughput_cap_exit_code(tmp_path, capsys):
    f = tmp_path / "e10.txt"
    f.write_text("n=10\n")
    assert main(["throughput", "--graph", str(f), "--p", "0.5", "--T", "12"]) == 2
    assert "cap" in capsys.readouterr().err


def test_product2_with_t3_marks_error(path3_file, tmp_path):
    out = tmp_path / "t.csv"
    assert main(["throughput", "--graph", str(path3_file), "--p", "0.5", "--T", "3",
                 "--method", "exact,product2", "--out", str(out)]) == 0
    _, rows = rows_from_csv(out.read_text())
    assert all(r["product2"] == "ERROR" and isinstance(r["exact"], float) for r in rows)


@pytest.mark.parametrize(
    "argv",
    [
        ["throughput", "--nope"],
        ["throughput", "--topology", "path:3"],
        ["throughput", "--topology", "path:3", "--p", "0.1,0.2"],
        ["throughput", "--topology", "blob:3", "--p", "0.1"],
        ["throughput", "--topology", "path:3", "--p", "0.5", "--method", "magic"],
        [],
    ],
)
def test_usage_errors_exit_1(argv):
    try:
        rc = main(argv)
    except SystemExit as exc:
        rc = exc.code
    assert rc == 1


def test_bad_graph_file(tmp_path):
    f = tmp_path / "bad.json"
    f.write_text('{"n": 2, "edges": [[0, 0]]}')
    assert main(["throughput", "--graph", str(f), "--p", "0.5"]) == 1


def test_config_file_and_override(tmp_path, path3_file):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"graph": str(path3_file), "p": "0.2,0.6,0.7", "T": 3, "method": "exact"}))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["--config", str(cfg), "throughput", "--out", str(a)]) == 0
    assert main(["--config", str(cfg), "throughput", "--T", "2", "--out", str(b)]) == 0
    _, ra = rows_from_csv(a.read_text())
    _, rb = rows_from_csv(b.read_text())
    assert ra[0]["exact"] == pytest.approx(0.18320610687022904, rel=1e-8)
    assert rb[0]["exact"] != ra[0]["exact"]


def test_optimize_cli(tmp_path, path3_file):
    trace = tmp_path / "trace.csv"
    assert main(["optimize", "--graph", str(path3_file), "--alpha", "0.6,0.6,0.3",
                 "--trace-out", str(trace)]) == 0
    cols, rows = rows_from_csv(trace.read_text())
    assert cols[0] == "iter" and cols[-1] == "J"
    J = [r["J"] for r in rows]
    assert all(b >= a for a, b in zip(J, J[1:]))


def test_optimize_cli_linear_monotone_case(tmp_path):
    out = tmp_path / "o.csv"
    assert main(["optimize", "--topology", "path:3", "--alpha", "1,0,0", "--utility", "linear",
                 "--out", str(out)]) == 0
    _, rows = rows_from_csv(out.read_text())
    assert rows[0]["p_0"] == pytest.approx(1 - 1e-4)


def test_optimize_single_step(tmp_path):
    trace = tmp_path / "trace.csv"
    assert main(["optimize", "--topology", "path:3", "--alpha", "0.6,0.6,0.3", "--max-iters", "1",
                 "--trace-out", str(trace)]) == 0
    assert len(trace.read_text().splitlines()) == 3


def test_star_sweep_cli(tmp_path):
    out, gp = tmp_path / "s.csv", tmp_path / "s.gp"
    assert main(["star-sweep", "--n", "5", "--p", "0.3", "--T", "1,2,4",
                 "--out", str(out), "--gnuplot", str(gp)]) == 0
    _, rows = rows_from_csv(out.read_text())
    assert [r["T"] for r in rows] == [1, 2, 4]
    assert "plot" in gp.read_text()


def test_region_cli(tmp_path):
    out = tmp_path / "r.csv"
    assert main(["region", "--topology", "path:3", "--T", "2", "--pin", "0=0", "--steps", "3",
                 "--out", str(out)]) == 0
    _, rows = rows_from_csv(out.read_text())
    assert len(rows) == 3 and all(r["p_0"] == 0 for r in rows)


def test_chain_and_trace_cli(tmp_path, capsys):
    js = tmp_path / "chain.json"
    assert main(["chain", "--topology", "path:3", "--p", "0.5", "--json", str(js)]) == 0
    assert len(json.loads(js.read_text())["states"]) == 8
    tl = tmp_path / "trace.jsonl"
    assert main(["trace", "--topology", "complete:2", "--p", "1,1", "--slots", "4", "--out", str(tl)]) == 0
    recs = [json.loads(x) for x in tl.read_text().splitlines()]
    assert [r["events"] for r in recs] == [["C", "C"]] * 4
    assert "node 0: 0000" in capsys.readouterr().err


def test_table1_cli_small(tmp_path):
    out = tmp_path / "t1.csv"
    assert main(["table1", "--n", "6", "--q", "0,1", "--slots", "200000", "--out", str(out)]) == 0
    _, rows = rows_from_csv(out.read_text())
    assert len(rows) == 2 and all(r["agree"] is True for r in rows)


# --- reports and runners -------------------------------------------------------


def test_report_roundtrip():
    rep = experiments.run_star_sweep(4, 0.3, (1, 2, 3))
    cols, rows = rows_from_csv(rep.to_csv())
    assert cols == rep.columns
    for got, want in zip(rows, rep.rows):
        for c in cols:
            if isinstance(want[c], float):
                assert got[c] == pytest.approx(want[c], rel=1e-8)
            else:
                assert got[c] == want[c]
    jcols, jrows = rows_from_json(rep.to_json())
    assert jcols == cols and jrows == [{c: r[c] for c in cols} for r in rep.rows]


def test_csv_nine_significant_digits():
    rep = experiments.run_throughput(experiments.NetworkConfig(gen_named("path", 3), (0.5,) * 3, 2))
    assert "0.352941176" in rep.to_csv()


def test_runners_deterministic():
    a = experiments.run_table1(n=5, qs=(0.3, 0.7), slots=50_000, seed=3)
    b = experiments.run_table1(n=5, qs=(0.3, 0.7), slots=50_000, seed=3)
    assert a.rows == b.rows


def test_table1_properties():
    rep = experiments.run_table1(n=10, qs=(0.0, 1.0), slots=300_000, seed=1)
    q0, q1 = rep.rows
    # isolated node: single-node closed form 2p/(1+p)
    assert q0["exact"] == pytest.approx(2 * 0.5 / 1.5, abs=1e-12)
    assert q0["renewal_classic"] < 0.01 * q0["exact"]
    vals = [q1[c] for c in ("simulation", "renewal_classic", "renewal_extended", "exact")]
    assert max(vals) - min(vals) <= 1e-3
    assert q0["agree"] and q1["agree"]


def test_table1_mean_aggregate():
    rep = experiments.run_table1(n=4, qs=(0.0,), slots=50_000, aggregate="mean")
    assert rep.rows[0]["exact"] == pytest.approx(2 / 3, abs=1e-12)


def test_table1_records_cap_errors():
    rep = experiments.run_table1(n=10, qs=(0.0,), T=12, slots=20_000, seed=0)
    assert rep.rows[0]["exact"] == "ERROR" and "cap" in rep.rows[0]["error"]


def test_star_sweep_properties():
    rep = experiments.run_star_sweep(5, 0.3, (1, 2, 4, 8, 16))
    hub = [r["hub_exact"] for r in rep.rows]
    under = [r["periph_underestimate"] for r in rep.rows]
    assert np.all(np.diff(hub) < 0)
    assert np.all(np.diff(under) > 0)
    # single-slot packets: renewal error smaller than at long packets
    assert abs(under[0]) < abs(under[-1])


def test_workers_preserve_order():
    a = experiments.run_star_sweep(4, 0.3, (3, 1, 2), workers=2)
    assert [r["T"] for r in a.rows] == [3, 1, 2]
    b = experiments.run_star_sweep(4, 0.3, (3, 1, 2))
    assert [r["hub_exact"] for r in a.rows] == [r["hub_exact"] for r in b.rows]
