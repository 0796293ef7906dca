import pytest

from conftest import DATA
from leasereads.analysis.history import History, OpRecord
from leasereads.analysis.linearizability import (HistoryTooLarge, check_brute_force,
                                                 check_linearizable)
from leasereads.analysis.safety import check_safety
from leasereads.objects import CAS, COUNTER, REGISTER, Operation
from leasereads.sim import from_dict, run
from leasereads.sim.fuzz import fuzz_scenario
from leasereads.cli import read_scenario


def rec(proc, k, kind, inv, resp=None, value=None, read=None):
    """An op on ``proc`` invoked at ``inv`` and answered at ``resp`` (real time = seq)."""
    done = resp is not None
    return OpRecord(Operation(proc, k, kind), kind[0] == "read" if read is None else read, proc,
                    inv, inv, inv, resp if done else None, resp if done else None,
                    resp if done else None, value)


# three histories no sequential order can explain

STALE_READ = History([
    rec(0, 1, ("write", 1), 0, 2, "ack"),
    rec(1, 1, ("read",), 3, 4, 0),
])

NEW_OLD_INVERSION = History([
    rec(0, 1, ("inc",), 0, 10, 0),
    rec(1, 1, ("read",), 1, 2, 1),
    rec(2, 1, ("read",), 3, 4, 0),
])

DOUBLE_CAS_WIN = History([
    rec(0, 1, ("cas", 0, 1), 0, 5, True),
    rec(1, 1, ("cas", 0, 2), 0, 5, True),
])


@pytest.mark.parametrize("hist, obj", [(STALE_READ, REGISTER), (NEW_OLD_INVERSION, COUNTER),
                                       (DOUBLE_CAS_WIN, CAS)])
def test_brute_force_rejects_non_linearizable_histories(hist, obj):
    v = check_brute_force(hist, obj)
    assert not v.ok
    assert v.blocking


def test_brute_force_accepts_concurrent_reorderings():
    h = History([
        rec(0, 1, ("inc",), 0, 10, 0),
        rec(1, 1, ("read",), 1, 2, 1),
        rec(2, 1, ("read",), 3, 4, 1),
    ])
    v = check_brute_force(h, COUNTER)
    assert v.ok and v.order[0] == "inc()@p0.1"


def test_pending_ops_may_take_effect_or_not():
    h = History([rec(0, 1, ("write", 1), 0), rec(1, 1, ("read",), 3, 4, 1),
                 rec(2, 1, ("read",), 5, 6, 1)])
    assert check_brute_force(h, REGISTER).ok
    h2 = History([rec(0, 1, ("write", 1), 0), rec(1, 1, ("read",), 3, 4, 0)])
    assert check_brute_force(h2, REGISTER).ok


def test_minimal_failing_subset_names_the_culprits():
    v = check_brute_force(NEW_OLD_INVERSION, COUNTER)
    assert set(v.blocking) == {"read()@p1.1", "read()@p2.1"}


def test_cap_enforced():
    h = History([rec(0, i, ("inc",), 2 * i, 2 * i + 1, i) for i in range(14)])
    with pytest.raises(HistoryTooLarge):
        check_brute_force(h, COUNTER, cap=12)
    assert check_brute_force(h, COUNTER, cap=14).ok


# witness and brute force on simulated runs


@pytest.mark.parametrize("seed", range(25))
def test_witness_and_brute_force_agree_on_clean_runs(seed):
    lin = check_linearizable(run(fuzz_scenario(seed)))
    assert lin.witness.ok
    assert lin.brute_force is not None and lin.brute_force.ok


@pytest.mark.parametrize("mutation, seeds", [
    ("ignore_promise_wait", [1, 14, 97]),
    ("no_epsilon_correction", [14, 35]),
    ("weak_quorum", [30]),
])
def test_mutations_are_caught(mutation, seeds):
    for s in seeds:
        tr = run(fuzz_scenario(s, mutations=[mutation]))
        lin = check_linearizable(tr)
        assert not lin.witness.ok, s
        assert not check_safety(tr).ok, s
        # the brute-force verdict never contradicts the witness on a broken history
        if lin.brute_force is not None and not lin.brute_force.ok:
            assert not lin.witness.ok


def _with_mutation(d, m):
    d = dict(d)
    d["mutations"] = [m]
    return run(from_dict(d))


def test_partitioned_leaseholder_needs_lease_expiry_wait():
    import yaml
    d = yaml.safe_load((DATA / "partitioned-leaseholder.yaml").read_text())
    assert check_linearizable(run(from_dict(d))).ok
    lin = check_linearizable(_with_mutation(d, "no_lease_expiry_wait"))
    assert not lin.witness.ok
    assert lin.brute_force is not None and not lin.brute_force.ok


def test_skew_counterexample_needs_epsilon_correction():
    d = read_scenario("eps-counterexample")
    clean = run(from_dict(d))
    assert check_linearizable(clean).ok and check_safety(clean).ok
    lin = check_linearizable(_with_mutation(d, "no_epsilon_correction"))
    assert not lin.witness.ok
    assert not lin.brute_force.ok
    assert set(lin.brute_force.blocking) == {"read()@p1.1", "read()@p2.1"}
