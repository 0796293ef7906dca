"""Post-run audit of safety invariants, model assumptions and liveness."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

from ..objects import get_object_type
from ..protocol.messages import dec_time
from ..sim.trace import Trace
from .history import TraceView, extract_history

SAFETY, MODEL, LIVENESS = "safety", "model", "liveness"


@dataclass
class Check:
    name: str
    category: str
    passed: bool = True
    counterexample: dict | None = None
    detail: str = ""

    def fail(self, detail: str, rec: dict | None = None) -> None:
        if self.passed:
            self.passed = False
            self.detail = detail
            self.counterexample = rec

    def to_json(self) -> dict:
        return {"name": self.name, "category": self.category, "passed": self.passed,
                "detail": self.detail, "counterexample": self.counterexample}


@dataclass
class SafetyReport:
    checks: list[Check] = field(default_factory=list)

    def get(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def category_ok(self, category: str) -> bool:
        return all(c.passed for c in self.checks if c.category == category)

    @property
    def ok(self) -> bool:
        """Safety invariants and model audits; liveness is reported separately."""
        return self.category_ok(SAFETY) and self.category_ok(MODEL)

    @property
    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def to_json(self) -> dict:
        return {"ok": self.ok, "liveness_ok": self.category_ok(LIVENESS),
                "checks": [c.to_json() for c in self.checks]}


def _key(opj: list) -> tuple:
    return (opj[0], opj[1])


def check_safety(trace: Trace) -> SafetyReport:
    view = TraceView(trace)
    recs = trace.records
    n = view.n
    obj = get_object_type(trace.header["object"])
    rep = SafetyReport()

    def add(name: str, category: str = SAFETY) -> Check:
        c = Check(name, category)
        rep.checks.append(c)
        return c

    agreement = add("batch_agreement")
    disjoint = add("batch_disjointness")
    exactly_once = add("exactly_once")
    majority = add("majority_persistence")
    nonempty = add("nonempty_batches")
    est_mono = add("estimate_monotonicity")
    lease_mono = add("lease_monotonicity")
    maxt_mono = add("maxT_monotonicity")
    ledger = add("leadership_disjointness")
    promise = add("promise_discipline")
    states = add("state_agreement")
    anomalies = add("no_anomalies")

    # batch agreement, disjointness, nonempty, majority persistence
    ops_of: dict[int, frozenset] = {}
    kinds: dict[tuple, tuple] = {}
    owner: dict[tuple, int] = {}
    holders: dict[int, set[int]] = defaultdict(set)
    need = n // 2 + 1
    prefix = 0  # every Batch[1..prefix] is held by a majority
    for r in recs:
        if r["kind"] != "batch":
            continue
        j = r["j"]
        b = r["batch"]
        if b["promise"] == "inf":
            continue
        ops = frozenset(_key(o) for o in b["ops"])
        for o in b["ops"]:
            kinds[_key(o)] = tuple(o[2])
        if j >= 1:
            if j - 1 > prefix:
                majority.fail(f"p{r['proc']} set Batch[{j}] while Batch[{prefix + 1}] was held "
                              f"by {len(holders[prefix + 1])} < {need} processes", r)
            if not ops:
                nonempty.fail(f"Batch[{j}] committed with no operations", r)
        elif j == 0 and ops:
            nonempty.fail("Batch[0] holds operations", r)
        if j in ops_of:
            if ops_of[j] != ops:
                agreement.fail(f"Batch[{j}] differs across processes", r)
        else:
            ops_of[j] = ops
            for k in ops:
                if k in owner and owner[k] != j:
                    disjoint.fail(f"op {k} in batches {owner[k]} and {j}", r)
                owner.setdefault(k, j)
        if j >= 1:
            holders[j].add(r["proc"])
            while len(holders[prefix + 1]) >= need:
                prefix += 1

    # exactly once: each invoked RMW lands in at most one batch, each completed one in exactly one
    hist = extract_history(trace)
    for h in hist.records:
        if h.read:
            continue
        k = (h.op.issuer, h.op.counter)
        if h.complete and k not in owner:
            exactly_once.fail(f"completed op {h.op!r} is in no batch")
    for r in trace.of_kind("lock"):
        for o in r["ops"]:
            if owner.get(_key(o)) != r["j"]:
                exactly_once.fail(f"op {o} locked at {r['j']} but recorded at {owner.get(_key(o))}", r)

    # per-process monotonicity
    last_est: dict[int, tuple] = {}
    last_lease: dict[int, int] = {}
    last_maxt: dict[int, int] = {}
    for r in recs:
        kind, p = r["kind"], r["proc"]
        if kind == "accept":
            cur = (r["t"], r["j"])
            if p in last_est and not cur > last_est[p]:
                est_mono.fail(f"p{p} accepted {cur} after {last_est[p]}", r)
            last_est[p] = cur
        elif kind == "lease":
            b = r["lease"][0]
            if p in last_lease and b < last_lease[p]:
                lease_mono.fail(f"p{p} lease batch fell from {last_lease[p]} to {b}", r)
            last_lease[p] = b
        elif kind == "maxT":
            if p in last_maxt and not r["value"] > last_maxt[p]:
                maxt_mono.fail(f"p{p} maxT {r['value']} after {last_maxt[p]}", r)
            last_maxt[p] = r["value"]
        elif kind == "anomaly":
            anomalies.fail(f"p{p}: {r['what']}", r)

    # leadership ledger
    for r in trace.of_kind("ledger"):
        spans = sorted((a, float("inf") if b == "inf" else b, p) for p, a, b in r["intervals"])
        for x, (a, b, p) in enumerate(spans):
            for c, d, q in spans[x + 1:]:
                if c > b:
                    break
                if p != q:
                    ledger.fail(f"p{p} [{a},{b}] and p{q} [{c},{d}] both held leadership", r)

    # promise discipline against the global promise of each batch
    if not view.params.cht:
        gprom = view.gpromise()
        eps = view.epsilon
        for h in hist.complete:
            if h.read:
                for j in range(1, (h.k_hat or 0) + 1):
                    ops = ops_of.get(j, frozenset())
                    if not any(obj.conflicts(h.kind, kinds[o]) for o in ops):
                        continue
                    if h.respond_local < gprom.get(j, 0) + eps:
                        promise.fail(f"read {h.op!r} reflected batch {j} at local "
                                     f"{h.respond_local} < promise {gprom.get(j)} + {eps}")
                        break
            else:
                j = owner.get((h.op.issuer, h.op.counter))
                if j is not None and h.respond_local < gprom.get(j, 0) + eps:
                    promise.fail(f"{h.op!r} responded at local {h.respond_local} < promise "
                                 f"{gprom.get(j)} + {eps}")

    # executed states agree
    seen_state: dict[int, object] = {}
    for r in trace.of_kind("execute"):
        j = r["j"]
        if j in seen_state and seen_state[j] != r["state"]:
            states.fail(f"states[{j}] differs across processes", r)
        seen_state.setdefault(j, r["state"])

    _audit_model(view, rep)
    _audit_liveness(view, hist, rep)
    return rep


def _audit_model(view: TraceView, rep: SafetyReport) -> None:
    delay = Check("delay_bounds", MODEL)
    fifo = Check("fifo_links", MODEL)
    crash = Check("crash_silence", MODEL)
    rep.checks += [delay, fifo, crash]
    sends: dict[int, dict] = {}
    last_delivered: dict[tuple[int, int], int] = {}
    crashed_at: dict[int, int] = {}
    nice = view.nice_periods
    for r in view.trace.records:
        kind, p = r["kind"], r["proc"]
        if p is not None and p in crashed_at and kind not in ("final",):
            crash.fail(f"p{p} produced {kind} after crashing", r)
        if kind == "crash":
            crashed_at[p] = r["seq"]
        elif kind == "send":
            sends[r["seq"]] = r
        elif kind == "deliver":
            s = sends[r["mid"]]
            lat = r["real"] - s["real"]
            src, dst = s["proc"], p
            correct = src in view.correct and dst in view.correct
            if s["real"] >= view.gst and correct and lat > view.delta:
                delay.fail(f"{s['msg']} p{src}->p{dst} took {lat} > delta", r)
            for a, b in nice:
                # messages queued behind pre-period traffic may carry up to delta over
                if a + view.delta <= s["real"] <= b and correct and lat > view.delta_star:
                    delay.fail(f"{s['msg']} p{src}->p{dst} took {lat} > delta_star in a nice period", r)
            if s["real"] >= view.fifo_after:
                link = (src, dst)
                if link in last_delivered and s["seq"] < last_delivered[link]:
                    fifo.fail(f"p{src}->p{dst} delivered out of order", r)
                last_delivered[link] = max(last_delivered.get(link, -1), s["seq"])


def _audit_liveness(view: TraceView, hist, rep: SafetyReport) -> None:
    live = Check("operations_complete", LIVENESS)
    leases = Check("eventual_valid_leases", LIVENESS)
    rep.checks += [live, leases]
    for h in hist.records:
        if h.proc in view.correct and not h.complete:
            live.fail(f"{h.op!r} invoked at real {h.invoke_real} by correct p{h.proc} never completed")
            break
    # every correct process must hold a valid lease over a final stretch of at least lambda
    lam = view.params.lam
    offs, base = view.offsets, view.base
    cur: dict[int, tuple[int, float]] = {}
    last_invalid = {p: 0 for p in view.correct}
    for r in view.trace.of_kind("lease"):
        p = r["proc"]
        if p not in view.correct:
            continue
        prev = cur.get(p)
        if prev is None:
            last_invalid[p] = r["real"]
        else:
            expiry_real = prev[1] + lam - offs[p] - base  # first real time it is invalid
            if expiry_real <= r["real"]:
                last_invalid[p] = r["real"]
        cur[p] = (r["lease"][0], dec_time(r["lease"][1]))
    end = view.horizon
    for p in sorted(view.correct):
        if p not in cur:
            leases.fail(f"p{p} never held a lease")
            break
        expiry_real = cur[p][1] + lam - offs[p] - view.base
        if expiry_real <= end:
            leases.fail(f"p{p} lease expired at real {expiry_real} before the horizon")
            break
        if end - last_invalid[p] < lam:
            leases.fail(f"p{p} held valid leases only since real {last_invalid[p]}")
            break
