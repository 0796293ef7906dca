import copy
import random

import pytest

from conftest import scenario_dict
from leasereads.leadership import ArbiterProvider, ContractError, GrantLedger, ledger_overlaps
from leasereads.protocol.params import ConfigError
from leasereads.sim import Trace, from_dict, loads, run
from leasereads.sim.network import ClockModel, Network
from leasereads.sim.scenario import LinkRule, NetworkConfig
from leasereads.sim.trace import TraceFormatError


# -- clocks and network -------------------------------------------------------------


def test_clocks_shift_to_nonnegative_and_keep_skew():
    c = ClockModel((0, 2, -2))
    assert c.base == 2
    assert [c.local(p, 10) for p in range(3)] == [12, 14, 10]
    assert c.real_at(1, 14) == 10
    assert c.earliest_real(14) == 10


def test_network_respects_bounds_after_gst():
    cfg = NetworkConfig(delta=5, delta_star=2, gst=100, nice_periods=((200, 300),))
    net = Network(cfg, random.Random(1))
    for real in range(100, 400, 3):
        at = net.schedule(0, 1, "PAck", real)
        bound = 2 if 200 <= real <= 300 else 5
        assert at is not None and 1 <= at - real <= bound or at - real <= 5


def test_network_rules_drop_and_delay():
    rules = (LinkRule(src=0, dst=1, start=0, end=50, drop=True),
             LinkRule(dst=2, start=0, delay=1))
    net = Network(NetworkConfig(delta=4, gst=0, rules=rules), random.Random(0))
    assert net.schedule(0, 1, "Prepare", 10) is None
    assert net.schedule(0, 1, "Prepare", 60) is not None
    assert net.schedule(1, 2, "Prepare", 10) == 11


def test_fifo_links_never_reorder():
    net = Network(NetworkConfig(delta=6, gst=0), random.Random(3))
    last = -1
    for real in range(0, 200, 1):
        at = net.schedule(0, 1, "Status", real)
        assert at >= last
        last = at


# -- leadership -----------------------------------------------------------------------


def test_arbiter_segments_are_closed_intervals():
    a = ArbiterProvider([(1, 0, 10)], final_holder=0, final_start=20)
    a.attach(lambda p: 5, None, 3)
    assert a.am_leader(1, 0, 10)
    assert not a.am_leader(1, 5, 11)
    assert a.am_leader(0, 20, 10**6)
    assert a.next_change(1, 5) == 11
    with pytest.raises(ContractError):
        a.am_leader(1, 4, 3)
    with pytest.raises(ValueError):
        ArbiterProvider([(1, 0, 20)], final_holder=0, final_start=20)


def test_grant_ledger_overlap_detection():
    g = GrantLedger()
    g.record(0, 0, 0, 5)
    g.record(0, 0, 3, 9)
    g.record(1, 1, 10, 12)
    assert g.intervals() == [(0, 0, 9), (1, 10, 12)]
    assert ledger_overlaps(g.intervals()) == []
    assert ledger_overlaps([(0, 0, 9), (1, 9, 12)]) == [((0, 0, 9), (1, 9, 12))]


# -- scenario validation -------------------------------------------------------------


@pytest.mark.parametrize("mutate, msg", [
    (lambda d: d.update(crashes=[[1, 0], [2, 0]]), "majority"),
    (lambda d: d.update(crashes=[[1, 50]]), "after gst"),
    (lambda d: d["network"].update(delta_star=5), "delta_star <= delta"),
    (lambda d: d.update(clocks={"epsilon": 1, "offsets": [0, 3, 0]}), "epsilon"),
    (lambda d: d["network"].update(nice_periods=[[-5, 10]]), "nice period"),
    (lambda d: d["network"].update(gst=10, rules=[{"src": 0, "start": 0, "end": 20, "drop": True}]),
     "drops messages after gst"),
    (lambda d: d.update(leadership={"segments": [[1, 0, 10]], "final": {"holder": 0, "start": 5}}),
     "intersect"),
    (lambda d: d.update(bogus=1), "unknown keys"),
    (lambda d: d.update(schema="other/2"), "schema"),
    (lambda d: d["params"].update(gamma=30), "unknown protocol"),
    (lambda d: d.update(object="queue"), "object"),
])
def test_invalid_scenarios(mutate, msg):
    d = scenario_dict()
    mutate(d)
    with pytest.raises(ConfigError, match=msg):
        from_dict(d)


def test_yaml_loading_and_seed_override():
    text = "n: 3\nhorizon: 100\nseed: 4\nparams: {lambda: 20, renew: 3}\n"
    assert loads(text).seed == 4
    assert loads(text, seed=9).seed == 9


# -- engine and traces -------------------------------------------------------------------


def test_runs_are_deterministic():
    d = scenario_dict()
    d["network"].update(policy="uniform", gst=40, pre_gst={"max_delay": 30, "loss": 0.3})
    a = run(from_dict(copy.deepcopy(d))).to_jsonl()
    b = run(from_dict(copy.deepcopy(d))).to_jsonl()
    assert a == b
    c = run(from_dict(copy.deepcopy(d), seed=2)).to_jsonl()
    assert a != c


def test_trace_round_trip(tmp_path):
    tr = run(from_dict(scenario_dict()))
    tr.write(tmp_path / "t.jsonl")
    back = Trace.read(tmp_path / "t.jsonl")
    assert back.header == tr.header
    assert back.body_lines() == tr.body_lines()
    assert back.summary == tr.summary


@pytest.mark.parametrize("text", [
    "",
    "{not json\n",
    '{"kind": "event"}\n',
    '{"kind": "header", "schema": "leasereads-trace/1"}\n{"kind": "x", "real": 0}\n',
    '{"kind": "header", "schema": "leasereads-trace/1"}\n'
    '{"kind": "x", "real": 0, "proc": 0, "local": 0, "seq": 3}\n',
])
def test_malformed_traces(text):
    with pytest.raises(TraceFormatError):
        Trace.from_jsonl(text)


def test_crashed_process_rejects_invocations():
    d = scenario_dict(crashes=[[2, 0]])
    d["workload"]["ops"].append({"proc": 2, "at": 30, "op": ["read"]})
    tr = run(from_dict(d))
    assert any(r["pid"] == 2 for r in tr.of_kind("invoke_rejected"))
