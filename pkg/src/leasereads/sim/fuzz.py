"""Seeded random scenarios: adversarial pre-GST behaviour, crashes, leadership churn.

``random_scenario(seed)`` returns a plain scenario mapping (the YAML form), so
any failing case can be written out and replayed with the command line.
"""

from __future__ import annotations

import random

from .scenario import SCHEMA, Scenario, from_dict

OBJECTS = {
    "counter": {"read": 3, "inc": 2, "add": 1},
    "register": {"read": 3, "write": 2},
    "cas": {"read": 3, "cas": 2},
}


def _timing(rng: random.Random, misjudge_delta_star: bool) -> dict:
    delta = rng.randint(2, 6)
    delta_star = rng.randint(1, max(1, delta // 2))
    # the protocol's idea of delta_star, which only shapes beta
    assumed_star = rng.randint(1, delta) if misjudge_delta_star else delta_star
    eps = rng.choice([0, 0, 1, 2])
    renew = rng.randint(2, 6)
    lam = 3 * delta + renew + rng.randint(1, 12)
    alg = rng.choice([1, 2, "cht"])
    params: dict = {"algorithm": alg, "lambda": lam, "renew": renew}
    if alg == 1:
        params["alpha"] = rng.randint(0, 3 * delta)
    elif alg == 2:
        beta = rng.randint(min(2 * assumed_star, 2 * delta), 2 * delta)
        params["beta"] = beta
        params["alpha"] = rng.randint(0, delta + beta)
    else:
        params["alpha"] = 0
    if eps == 0 and alg != "cht" and rng.random() < 0.1:
        params["strict_figure1"] = True
    return {"delta": delta, "delta_star": delta_star, "epsilon": eps, "params": params}


def random_scenario(seed: int, max_ops: int = 12, underestimate_delta: bool = False,
                    misjudge_delta_star: bool = False) -> dict:
    """A valid scenario mapping drawn from ``seed``.

    ``underestimate_delta`` configures the protocol with half the network's
    delta; liveness is then not asserted. ``misjudge_delta_star`` picks beta
    from a guess of delta_star that may be far from the real one.
    """
    rng = random.Random(f"fuzz:{seed}")
    n = rng.choice([3, 5, 7])
    tm = _timing(rng, misjudge_delta_star)
    delta, delta_star, eps = tm["delta"], tm["delta_star"], tm["epsilon"]
    lam = tm["params"]["lambda"]
    gst = rng.choice([0, rng.randint(20, 300)])
    offsets = [rng.randint(0, eps) for _ in range(n)]
    heartbeat = rng.random() < 0.1

    # leadership: churn before the final holder takes over
    crash_budget = rng.randint(0, (n - 1) // 2)
    final = rng.randrange(n)
    segments = []
    cursor = 0
    final_start = 0
    if not heartbeat and gst > 0:
        while cursor < gst and rng.random() < 0.8:
            a = cursor + rng.randint(0, 15)
            b = a + rng.randint(5, 60)
            segments.append([rng.randrange(n), a, b])
            cursor = b + 1
        final_start = cursor + rng.randint(0, 20)

    crashes = []
    candidates = [p for p in range(n) if heartbeat or p != final]
    for p in rng.sample(candidates, crash_budget):
        crashes.append([p, rng.randint(0, gst)])

    net: dict = {"delta": delta, "delta_star": delta_star, "gst": gst,
                 "policy": rng.choice(["uniform", "uniform", "max"]),
                 "pre_gst": {"max_delay": rng.randint(delta, 10 * delta),
                             "loss": round(rng.uniform(0.0, 0.4), 2)}}
    if gst > 0 and rng.random() < 0.5:
        net["fifo_after"] = gst + rng.randint(0, 50)
    rules = []
    if gst > 10 and rng.random() < 0.5:
        # isolate one process for part of the unstable period
        p = rng.randrange(n)
        a = rng.randint(0, gst - 5)
        b = rng.randint(a + 1, gst)
        rules += [{"src": p, "start": a, "end": b, "drop": True},
                  {"dst": p, "start": a, "end": b, "drop": True}]
    if rules:
        net["rules"] = rules
    settle = max(gst, final_start)
    if rng.random() < 0.5:
        a = settle + rng.randint(0, 200)
        net["nice_periods"] = [[a, a + rng.randint(50, 300)]]

    obj = rng.choice(sorted(OBJECTS))
    mix = OBJECTS[obj]
    names = [k for k in mix]
    weights = [mix[k] for k in names]
    ops = []
    window = settle + 20 * (delta + lam) // 2
    for _ in range(rng.randint(1, max_ops)):
        name = rng.choices(names, weights)[0]
        kind: list = [name]
        if name == "write":
            kind.append(rng.randint(0, 3))
        elif name == "add":
            kind.append(rng.randint(0, 3))
        elif name == "cas":
            kind += [rng.randint(0, 2), rng.randint(0, 2)]
        ops.append({"proc": rng.randrange(n), "at": rng.randint(0, window), "op": kind})
    ops.sort(key=lambda o: (o["at"], o["proc"]))

    horizon = settle + 20 * (delta + lam) + 100
    if net.get("nice_periods"):
        horizon = max(horizon, net["nice_periods"][0][1] + 10)
    leadership: dict
    if heartbeat:
        leadership = {"provider": "heartbeat"}
    else:
        leadership = {"segments": segments, "final": {"holder": final, "start": final_start}}
    params = dict(tm["params"])
    analysis = {"bounds": False}
    if underestimate_delta:
        params["delta"] = max(1, delta // 2)
        analysis["liveness"] = False
    return {
        "schema": SCHEMA, "name": f"fuzz-{seed}", "n": n, "seed": seed, "horizon": horizon,
        "object": obj, "network": net, "clocks": {"epsilon": eps, "offsets": offsets},
        "params": params, "leadership": leadership, "crashes": crashes,
        "workload": {"ops": ops}, "analysis": analysis,
    }


def fuzz_scenario(seed: int, max_ops: int = 12, mutations: list[str] | None = None,
                  **variant: bool) -> Scenario:
    d = random_scenario(seed, max_ops, **variant)
    if mutations:
        d["mutations"] = list(mutations)
    return from_dict(d)
