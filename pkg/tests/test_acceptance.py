"""Acceptance checks, one per criterion, each printing a single PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` or ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import functools
import sys

import pytest

from leasereads.analysis.bounds import check_bounds, status_economy
from leasereads.analysis.history import extract_history
from leasereads.analysis.linearizability import DEFAULT_CAP, check_brute_force, check_linearizable
from leasereads.analysis.report import summarize
from leasereads.analysis.safety import check_safety
from leasereads.analysis.tables import TABLES, build_table
from leasereads.cli import read_scenario
from leasereads.objects import CAS, COUNTER, REGISTER
from leasereads.sim import from_dict, run
from leasereads.sim.fuzz import fuzz_scenario, random_scenario

FUZZ_RUNS = 500
REDUCTION_SEEDS = 50
ROBUSTNESS_RUNS = 150

LINES: dict[int, str] = {}


def report(n: int, ok: bool, detail: str) -> bool:
    line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    LINES[n] = line
    print(line, flush=True)
    return ok


@functools.lru_cache(maxsize=None)
def packaged(name: str):
    return run(from_dict(read_scenario(name)))


@functools.lru_cache(maxsize=None)
def fuzz_results(variant: str = "", runs: int = FUZZ_RUNS) -> list[dict]:
    out = []
    for seed in range(runs):
        kw = {variant: True} if variant else {}
        tr = run(fuzz_scenario(seed, **kw))
        safety = check_safety(tr)
        lin = check_linearizable(tr, DEFAULT_CAP)
        hist = extract_history(tr)
        out.append({
            "seed": seed, "n": tr.header["n"], "crashes": len(tr.header.get("crashes", [])),
            "safety": safety.ok, "failures": [c.name for c in safety.failures],
            "liveness": safety.category_ok("liveness"),
            "witness": lin.witness.ok,
            "brute_force": None if lin.brute_force is None else lin.brute_force.ok,
            "completed": len(hist.complete), "ops": len(hist),
        })
    return out


# -- 1 safety suite ---------------------------------------------------------------


def criterion_1() -> bool:
    res = fuzz_results()
    bad = [(r["seed"], r["failures"]) for r in res if not r["safety"]]
    ns = sorted({r["n"] for r in res})
    crashed = sum(1 for r in res if r["crashes"])
    return report(1, len(res) >= 500 and not bad,
                  f"{len(res)} randomized runs (n in {ns}, {crashed} with crashes), "
                  f"safety violations: {bad[:5] or 'none'}")


# -- 2 linearizability -------------------------------------------------------------


def _negative_histories():
    from test_linearizability import DOUBLE_CAS_WIN, NEW_OLD_INVERSION, STALE_READ
    return [(STALE_READ, REGISTER), (NEW_OLD_INVERSION, COUNTER), (DOUBLE_CAS_WIN, CAS)]


def criterion_2() -> bool:
    res = fuzz_results()
    wit_bad = [r["seed"] for r in res if not r["witness"]]
    small = [r for r in res if r["completed"] <= DEFAULT_CAP]
    unchecked = [r["seed"] for r in small if r["brute_force"] is None]
    bf_bad = [r["seed"] for r in small if r["brute_force"] is False]
    rejected = sum(not check_brute_force(h, o).ok for h, o in _negative_histories())
    ok = not wit_bad and not bf_bad and not unchecked and rejected == 3
    return report(2, ok, f"witness failures {wit_bad or 'none'}; brute force on {len(small)} runs "
                         f"with <= {DEFAULT_CAP} completed ops, failures {bf_bad or 'none'}, "
                         f"unchecked {unchecked or 'none'}; negative histories rejected {rejected}/3")


# -- 3 liveness ---------------------------------------------------------------------

LIVENESS_SCENARIOS = ("cht", "alg1-alpha2d", "alg2-ab2ds", "alg1-alpha3d", "alg2-ab3ds",
                      "alg2-a-d3ds-b3ds", "pre-gst-chaos", "leaseholder-crash", "heartbeat",
                      "eps-alg1-alpha3d", "eps-alg2-a-db", "delta-star-misconfig")


def criterion_3() -> bool:
    res = fuzz_results()
    bad = [r["seed"] for r in res if not r["liveness"]]
    short = []
    for r in res:
        sc = fuzz_scenario(r["seed"])
        if sc.horizon < sc.network.gst + 20 * (sc.network.delta + sc.params.lam):
            short.append(r["seed"])
    cur_bad = [n for n in LIVENESS_SCENARIOS if not check_safety(packaged(n)).category_ok("liveness")]
    pre_gst = sum(1 for r in res if random_scenario(r["seed"])["network"]["gst"] > 0)
    ok = not bad and not short and not cur_bad
    return report(3, ok, f"{len(res)} randomized runs ({pre_gst} with gst > 0) and "
                         f"{len(LIVENESS_SCENARIOS)} curated scenarios; incomplete ops in "
                         f"{(bad + cur_bad) or 'none'}; horizons too short {short or 'none'}")


# -- 4, 5 tables ------------------------------------------------------------------------

TIGHT = {"cht": "tight-cht", "alg1-alpha2d": "tight-alg1-alpha2d", "alg2-ab2ds": "tight-alg2-ab2ds"}


@functools.lru_cache(maxsize=None)
def table(name: str):
    return build_table(name, [summarize(packaged(k), linearizability=False) for k in TABLES[name]])


def _cells(t) -> str:
    parts = []
    for (col, period, op), c in sorted(t.cells.items()):
        parts.append(f"{col}/{period}/{op} {c.measured}<={c.theory}")
    return ", ".join(parts)


def criterion_4() -> bool:
    t = table("table1")
    tight = []
    for col, name in TIGHT.items():
        row = check_bounds(packaged(name)).row("stable", "read")
        tight.append((col, row.measured, row.bound,
                      row.measured is not None and row.bound - 1 <= row.measured <= row.bound))
    ok = t.ok and not t.missing() and all(x[3] for x in tight)
    tt = ", ".join(f"{c} {m} vs {b}" for c, m, b, _ in tight)
    return report(4, ok, f"delta={t.delta} delta_star={t.delta_star}: {_cells(t)}; "
                         f"missing {t.missing() or 'none'}; tightness {tt}")


def criterion_5() -> bool:
    t = table("table2")
    ok = t.ok and not t.missing()
    return report(5, ok, f"delta={t.delta} delta_star={t.delta_star}: {_cells(t)}; "
                         f"missing {t.missing() or 'none'}")


# -- 6 epsilon ---------------------------------------------------------------------------


def criterion_6() -> bool:
    parts, ok = [], True
    for name in ("eps-alg1-alpha3d", "eps-alg2-a-db"):
        tr = packaged(name)
        eps = tr.header["epsilon"]
        b = check_bounds(tr)
        reads = [b.row(p, "read").measured for p in ("stable", "nice")]
        lin = check_linearizable(tr).ok
        good = all(m is not None and m <= eps for m in reads) and lin and check_safety(tr).ok
        ok &= good
        parts.append(f"{name} eps={eps} read maxima {reads} linearizable {lin}")
    ce = packaged("eps-counterexample")
    lin = check_linearizable(ce)
    d = read_scenario("eps-counterexample")
    d["mutations"] = ["no_epsilon_correction"]
    broken = check_linearizable(run(from_dict(d)))
    ce_ok = lin.ok and lin.brute_force is not None and not broken.ok
    ok &= ce_ok
    parts.append(f"skew counterexample linearizable {lin.ok}, caught without epsilon waits "
                 f"{not broken.ok}")
    return report(6, ok, "; ".join(parts))


# -- 7 locality ----------------------------------------------------------------------------


def criterion_7() -> bool:
    a, b = packaged("locality-a"), packaged("locality-b")
    reads = [sum(1 for r in extract_history(t).complete if r.read) for t in (a, b)]
    ma, mb = a.summary["messages"], b.summary["messages"]
    ok = ma == mb and reads[1] - reads[0] == 1000
    return report(7, ok, f"messages {ma} vs {mb} with {reads[0]} vs {reads[1]} completed reads")


# -- 8 reductions --------------------------------------------------------------------------


def _variant(seed: int, **params):
    d = random_scenario(seed)
    d["clocks"] = {"epsilon": 0, "offsets": [0] * d["n"]}
    base = {k: d["params"][k] for k in ("lambda", "renew")}
    d["params"] = {**base, **params}
    return run(from_dict(d)).body_lines()


def criterion_8() -> bool:
    cht_bad, beta_bad = [], []
    for s in range(REDUCTION_SEEDS):
        if _variant(s, algorithm="cht", alpha=0) != _variant(s, algorithm=1, alpha=0):
            cht_bad.append(s)
        alpha = s % 7
        if _variant(s, algorithm=2, alpha=alpha, beta=None) != _variant(s, algorithm=1, alpha=alpha):
            beta_bad.append(s)
    triple = [packaged(f"reduce-{k}").body_lines()
              for k in ("cht", "alg1-alpha0", "alg2-beta-inf")]
    tri_ok = triple[0] == triple[1] == triple[2]
    ok = not cht_bad and not beta_bad and tri_ok
    return report(8, ok, f"{REDUCTION_SEEDS} seeds: cht vs alg1 alpha=0 differ on "
                         f"{cht_bad or 'none'}; alg2 beta=inf vs alg1 differ on {beta_bad or 'none'}; "
                         f"curated triple identical {tri_ok}")


# -- 9 status economy ----------------------------------------------------------------------

ECONOMY_SCENARIOS = ("alg2-ab2ds", "alg2-ab3ds", "alg2-a-d3ds-b3ds", "eps-alg2-a-db", "locality-a")


def criterion_9() -> bool:
    parts, ok = [], True
    for name in ECONOMY_SCENARIOS:
        eco = status_economy(packaged(name))
        nice = eco.nice_batches
        multi = [b["j"] for b in nice if b["rounds"] != 1]
        ok &= bool(nice) and not multi
        parts.append(f"{name} {len(nice)} nice batches, multi-round {multi or 'none'}")
    return report(9, ok, "; ".join(parts))


# -- 10 robustness -------------------------------------------------------------------------


def criterion_10() -> bool:
    under = fuzz_results("underestimate_delta", ROBUSTNESS_RUNS)
    mis = fuzz_results("misjudge_delta_star", ROBUSTNESS_RUNS)
    u_bad = [r["seed"] for r in under if not (r["safety"] and r["witness"]
                                              and r["brute_force"] is not False)]
    m_bad = [r["seed"] for r in mis if not (r["safety"] and r["witness"] and r["liveness"]
                                            and r["brute_force"] is not False)]
    du = packaged("delta-underestimate")
    ds = packaged("delta-star-misconfig")
    du_ok = check_safety(du).ok and check_linearizable(du).ok
    ds_s = check_safety(ds)
    ds_ok = ds_s.ok and ds_s.category_ok("liveness") and check_linearizable(ds).ok
    ok = not u_bad and not m_bad and du_ok and ds_ok
    return report(10, ok, f"half delta: {len(under)} runs, failures {u_bad or 'none'}, curated "
                          f"safe {du_ok}; wrong delta_star: {len(mis)} runs, failures "
                          f"{m_bad or 'none'}, curated safe and live {ds_ok}")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9, criterion_10]


@pytest.mark.parametrize("check", CRITERIA, ids=[f"criterion_{i + 1}" for i in range(10)])
def test_criterion(check):
    assert check(), LINES.get(CRITERIA.index(check) + 1)


if __name__ == "__main__":
    sys.path.insert(0, str(__import__("pathlib").Path(__file__).parent))
    results = [c() for c in CRITERIA]
    sys.exit(0 if all(results) else 1)
