import json
import subprocess
import sys

import pytest
import yaml

from leasereads.cli import eval_expr, expand_grid, main, packaged_scenarios, UsageError

SMALL = {
    "name": "cli-small", "n": 3, "seed": 2, "horizon": 300, "object": "register",
    "network": {"delta": 4, "delta_star": 1, "gst": 0},
    "params": {"algorithm": 2, "alpha": 2, "beta": 2, "lambda": 20, "renew": 3},
    "workload": {"generators": [
        {"type": "periodic", "proc": 1, "start": 40, "stop": 250, "mix": {"write": 1, "read": 1},
         "period": 11}]},
}


@pytest.fixture
def small(tmp_path):
    p = tmp_path / "small.yaml"
    p.write_text(yaml.safe_dump(SMALL))
    return p


def test_run_then_check_round_trip(tmp_path, small, capsys):
    out = tmp_path / "o"
    assert main(["run", str(small), "--out", str(out)]) == 0
    trace = out / "cli-small-seed2.trace.jsonl"
    assert trace.exists() and (out / "cli-small-seed2.summary.json").exists()
    assert main(["check", str(trace), "--out", str(tmp_path / "r.json")]) == 0
    rep = json.loads((tmp_path / "r.json").read_text())
    assert rep[0]["ok"] and rep[0]["linearizability"]["ok"]


def test_run_is_deterministic_and_seed_overrides(tmp_path, small, monkeypatch):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    main(["run", str(small), "--out", str(a)])
    main(["run", str(small), "--out", str(b)])
    name = "cli-small-seed2.trace.jsonl"
    assert (a / name).read_bytes() == (b / name).read_bytes()
    monkeypatch.setenv("LEASEREADS_SEED", "7")
    main(["run", str(small), "--out", str(c)])
    assert (c / "cli-small-seed7.trace.jsonl").exists()
    main(["run", str(small), "--out", str(c), "--seed", "8"])
    assert (c / "cli-small-seed8.trace.jsonl").exists()


def test_exit_codes(tmp_path, small, capsys):
    assert main(["run", "no-such-scenario"]) == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text(yaml.safe_dump({**SMALL, "crashes": [[0, 0], [1, 0]]}))
    assert main(["run", str(bad), "--out", str(tmp_path)]) == 2
    junk = tmp_path / "junk.jsonl"
    junk.write_text("not a trace\n")
    assert main(["check", str(junk)]) == 2
    with pytest.raises(SystemExit) as e:
        main(["frobnicate"])
    assert e.value.code == 2


def test_check_fails_on_a_broken_run(tmp_path, capsys):
    from leasereads.sim import run
    from leasereads.sim.fuzz import fuzz_scenario
    path = tmp_path / "weak.trace.jsonl"
    run(fuzz_scenario(30, mutations=["weak_quorum"])).write(path)
    assert main(["check", str(path)]) == 1
    assert "FAIL" in capsys.readouterr().out


def test_grid_expressions():
    names = {"delta": 6, "delta_star": 1, "inf": float("inf"), "beta": 3}
    assert eval_expr("2*delta + 3*delta_star", names) == 15
    assert eval_expr("inf", names) == float("inf")
    assert eval_expr("delta // 4", names) == 1
    for bad in ("__import__('os')", "delta ** 2", "gamma", "delta / 4"):
        with pytest.raises(UsageError):
            eval_expr(bad, names)


def test_grid_expansion_with_ties():
    cells = expand_grid(SMALL, ["params.beta=2*delta_star,delta"], ["params.alpha=beta"])
    assert [c for _, c in cells] == [{"params.beta": 2, "params.alpha": 2},
                                     {"params.beta": 4, "params.alpha": 4}]
    assert expand_grid(SMALL, [], []) == []
    assert expand_grid(SMALL, ["params.alpha="], []) == []


def test_sweep_flags_invalid_cells(tmp_path, small, capsys):
    out = tmp_path / "sw.json"
    code = main(["sweep", str(small), "--grid", "params.alpha=0,2,99", "--out", str(out),
                 "--seeds", "1-2"])
    res = json.loads(out.read_text())["results"]
    assert code == 0
    assert [r["status"] for r in res].count("invalid") == 2
    assert len(res) == 6


def test_empty_sweep(tmp_path, small):
    out = tmp_path / "e.json"
    assert main(["sweep", str(small), "--out", str(out)]) == 0
    assert json.loads(out.read_text())["results"] == []


def test_sweep_parallel_matches_serial(tmp_path, small):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    args = ["sweep", str(small), "--grid", "params.alpha=0,2,4"]
    main(args + ["--out", str(a)])
    main(args + ["--out", str(b), "--jobs", "3"])
    assert json.loads(a.read_text())["results"] == json.loads(b.read_text())["results"]


def test_table_from_sweep_results(tmp_path, small, capsys):
    sw = tmp_path / "sw.json"
    main(["sweep", "alg2-ab2ds", "--out", str(sw)])
    main(["sweep", "cht", "--grid", "params.renew=5", "--out", str(tmp_path / "c.json")])
    assert main(["table", str(tmp_path / "c.json"), "--out", str(tmp_path / "t")]) == 0
    text = (tmp_path / "t" / "table1.csv").read_text()
    assert "no data" in text and "3δ" in text
    assert main(["table", str(tmp_path / "missing.json")]) == 2


def test_list_and_flags(tmp_path, capsys):
    assert "cht" in packaged_scenarios() and "pre-gst-chaos" in packaged_scenarios()
    assert main(["run", "tight-alg1-alpha2d", "--strict-figure1", "--out", str(tmp_path)]) == 0
    s = json.loads(next(tmp_path.glob("*.summary.json")).read_text())
    assert s["safety_ok"]
    hdr = json.loads(next(tmp_path.glob("*.trace.jsonl")).read_text().splitlines()[0])
    assert hdr["params"]["strict_figure1"] is True


def test_console_script_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "leasereads.cli", "list"], capture_output=True,
                       text=True)
    assert r.returncode == 0 and "locality-a" in r.stdout


def test_alpha_sweep_shape(tmp_path):
    out = tmp_path / "a.json"
    assert main(["sweep", "alg1-alpha2d", "--grid", "params.alpha=0,delta,2*delta,3*delta",
                 "--jobs", "2", "--out", str(out)]) == 0
    rows = [r["summary"]["maxima"] for r in json.loads(out.read_text())["results"]]
    for key, sign in (("stable/read", -1), ("nice/read", -1), ("stable/rmw", 1), ("nice/rmw", 1)):
        vals = [m[key] for m in rows]
        assert all(sign * (b - a) >= 0 for a, b in zip(vals, vals[1:])), (key, vals)


def test_beta_sweep_keeps_stable_rmw_within_two_delta(tmp_path):
    out = tmp_path / "b.json"
    main(["sweep", "alg2-ab2ds", "--grid", "params.beta=2*delta_star,delta,2*delta",
          "--set", "params.alpha=beta", "--out", str(out)])
    res = json.loads(out.read_text())["results"]
    assert len(res) == 3
    assert all(r["summary"]["maxima"]["stable/rmw"] <= 12 for r in res)
