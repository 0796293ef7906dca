import copy

from conftest import scenario_dict
from leasereads.analysis.bounds import status_economy
from leasereads.analysis.history import extract_history
from leasereads.analysis.linearizability import check_linearizable
from leasereads.analysis.safety import check_safety
from leasereads.protocol.process import Wait
from leasereads.sim import from_dict, run


def _run(d):
    tr = run(from_dict(d))
    assert check_safety(tr).ok
    assert check_linearizable(tr).ok
    return tr


def test_wait_deadline_semantics():
    w = Wait("x", until=10)
    assert not w.satisfied(9)
    assert w.satisfied(10)
    # a deadline on the current tick waits for deliveries of that tick
    assert not w.satisfied(10, timers=False)
    assert w.satisfied(11, timers=False)
    flag = []
    c = Wait("y", cond=lambda: bool(flag))
    assert not c.satisfied(100)
    flag.append(1)
    assert c.satisfied(0)


def test_new_leader_waits_before_estimating():
    d = scenario_dict()
    d["leadership"] = {"segments": [[1, 0, 20]], "final": {"holder": 0, "start": 40}}
    tr = _run(d)
    p = tr.header["params"]
    starts = {r["proc"]: r["local"] for r in tr.of_kind("lw_start")}
    first_est = {}
    for r in tr.of_kind("send"):
        if r["msg"] == "EstRequest":
            first_est.setdefault(r["proc"], r["local"])
    assert first_est[0] - starts[0] >= p["alpha"] + p["lambda"] + p["epsilon"]
    # the deposed leader never got far enough to estimate
    assert 1 not in first_est


def test_all_ops_complete_with_correct_values():
    d = scenario_dict()
    d["workload"]["ops"][1:] = [{"proc": 2, "at": 150, "op": ["read"]},
                                {"proc": 0, "at": 160, "op": ["read"]}]
    tr = _run(d)
    recs = {(r.proc, r.kind[0]): r for r in extract_history(tr).records}
    assert all(r.complete for r in recs.values())
    assert recs[(1, "inc")].value == 0
    assert recs[(2, "read")].value == 1
    assert recs[(0, "read")].value == 1



def test_reads_are_local():
    base = scenario_dict()
    more = copy.deepcopy(base)
    more["workload"]["ops"] += [{"proc": p, "at": 100 + 3 * i, "op": ["read"]}
                                for i, p in enumerate([1, 2, 0] * 20)]
    a, b = _run(base), _run(more)
    assert a.summary["messages"] == b.summary["messages"]
    assert len(extract_history(b).complete) == len(extract_history(a).complete) + 60


def test_far_promise_makes_reads_nonblocking():
    d = scenario_dict()
    d["params"] = {"algorithm": 1, "alpha": 12, "lambda": 20, "renew": 3}
    d["network"]["policy"] = "max"
    d["workload"]["ops"] = [{"proc": 1, "at": 100, "op": ["inc"]}] + [
        {"proc": 2, "at": 100 + i, "op": ["read"]} for i in range(0, 40, 2)]
    tr = _run(d)
    reads = [r for r in extract_history(tr).records if r.read]
    assert all(r.blocking == 0 for r in reads)


def _alg2(strict: bool):
    d = scenario_dict(horizon=600)
    d["network"].update(nice_periods=[[100, 500]], policy="max")
    d["params"] = {"algorithm": 2, "alpha": 2, "beta": 2, "lambda": 20, "renew": 3,
                   "strict_figure2": strict}
    d["workload"] = {"generators": [
        {"type": "closed_loop", "proc": 1, "start": 50, "stop": 550, "mix": {"inc": 1}, "think": 7},
        {"type": "periodic", "proc": 2, "start": 50, "stop": 550, "mix": {"read": 1}, "period": 3}]}
    return _run(d)


def test_status_rounds_one_per_batch_in_nice_period():
    for strict in (False, True):
        eco = status_economy(_alg2(strict))
        assert eco.nice_batches and eco.ok


def test_status_rounds_continue_until_commit_outside_nice_periods():
    d = scenario_dict(horizon=400)
    # p1 answers fast, leaseholder p2 slowly: a majority is reached long before p2 acks
    d["network"].update(policy="max", rules=[{"src": 0, "dst": 1, "delay": 1},
                                             {"src": 1, "dst": 0, "delay": 1}])
    d["params"] = {"algorithm": 2, "alpha": 2, "beta": 2, "lambda": 20, "renew": 3}
    d["workload"] = {"ops": [{"proc": 1, "at": 100, "op": ["inc"]}]}
    eco = status_economy(_run(d))
    assert max(b["rounds"] for b in eco.batches) > 1
    d["params"]["strict_figure2"] = True
    strict = status_economy(_run(d))
    assert max(b["rounds"] for b in strict.batches) == 1
