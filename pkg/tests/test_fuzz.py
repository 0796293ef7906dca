from leasereads.sim import from_dict, run
from leasereads.sim.fuzz import fuzz_scenario, random_scenario


def test_random_scenarios_are_valid_and_varied():
    ds = [random_scenario(s) for s in range(200)]
    for d in ds:
        sc = from_dict(d)
        assert sc.horizon >= sc.network.gst + 20 * (sc.network.delta + sc.params.lam)
        assert 2 * len(sc.crashes) < sc.n
    assert {d["n"] for d in ds} == {3, 5, 7}
    assert {d["params"]["algorithm"] for d in ds} == {1, 2, "cht"}
    assert any(d["crashes"] for d in ds) and any(d["network"]["gst"] > 0 for d in ds)
    assert any(d["leadership"].get("provider") == "heartbeat" for d in ds)


def test_same_seed_same_trace():
    assert run(fuzz_scenario(5)).to_jsonl() == run(fuzz_scenario(5)).to_jsonl()
    assert random_scenario(5) != random_scenario(6)


def test_variants():
    d = random_scenario(3, underestimate_delta=True)
    assert d["params"]["delta"] == max(1, d["network"]["delta"] // 2)
    assert d["analysis"]["liveness"] is False
    for s in range(50):
        d = random_scenario(s, misjudge_delta_star=True)
        if d["params"]["algorithm"] == 2:
            assert d["params"]["beta"] <= 2 * d["network"]["delta"]
