"""Linearizability checking.

Two independent checkers:

* ``check_witness`` rebuilds the linearization order from the trace. Batches
  take effect at the later of their first lock and the earliest real time some
  clock passes the batch's global promise plus epsilon. A read takes effect at
  the later of its lease reading and the take-effect time of the batch it read
  after. Every operation must take effect inside its own invocation window and
  a sequential replay in that order must reproduce every response.
* ``check_brute_force`` is a Wing and Gong search with memoization, using only
  the client history and the object type. Pending operations may be placed
  anywhere after their invocation or left out.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any

from ..objects import ObjectType, Operation, get_object_type
from ..sim.trace import Trace
from .history import History, OpRecord, TraceView, extract_history

DEFAULT_CAP = 12


class HistoryTooLarge(ValueError):
    """The brute-force search was asked to handle more operations than its cap."""


@dataclass
class Verdict:
    ok: bool
    checker: str
    order: list[str] = field(default_factory=list)     # witness order when ok
    blocking: list[str] = field(default_factory=list)  # minimal failing subset otherwise
    reason: str = ""

    def to_json(self) -> dict:
        return {"ok": self.ok, "checker": self.checker, "order": self.order,
                "blocking": self.blocking, "reason": self.reason}


# -- witness checker ------------------------------------------------------------


def check_witness(trace: Trace) -> Verdict:
    view = TraceView(trace)
    obj = get_object_type(trace.header["object"])
    hist = extract_history(trace)
    locks = view.locks()
    gprom = view.gpromise()
    eps = view.epsilon

    batch_ops: dict[int, list[Operation]] = {}
    tau_batch: dict[int, tuple[float, int]] = {}
    placed: dict[Operation, int] = {}
    for j, recs in locks.items():
        first = min(recs, key=lambda r: r["seq"])
        ops = sorted(Operation.from_json(o) for o in first["ops"])
        batch_ops[j] = ops
        tau_batch[j] = max((first["real"], first["seq"]), (view.greal(gprom[j] + eps), -1))
        for op in ops:
            if op in placed and placed[op] != j:
                return Verdict(False, "witness", reason=f"{op!r} locked in batches {placed[op]} and {j}")
            placed[op] = j
    tau_batch.setdefault(0, (0, -1))
    batch_ops.setdefault(0, [])

    lease_reads = {(r["op"][0], r["op"][1]): (r["real"], r["seq"])
                   for r in trace.of_kind("read_lease")}
    by_id = hist.by_id()

    # (tau, rank, batch, op) with rank 0 for RMWs so they precede reads at equal tau
    entries: list[tuple[tuple, int, int, Operation]] = []
    for j, ops in batch_ops.items():
        for op in ops:
            entries.append((tau_batch[j], 0, j, op))
    for rec in hist.records:
        if rec.read:
            if not rec.complete:
                continue
            key = (rec.op.issuer, rec.op.counter)
            if rec.k_hat not in tau_batch:
                return Verdict(False, "witness", reason=f"{rec.op!r} read after unlocked batch {rec.k_hat}")
            tau = max(lease_reads[key], tau_batch[rec.k_hat])
            entries.append((tau, 1, rec.k_hat, rec.op))
        elif rec.complete and rec.op not in placed:
            return Verdict(False, "witness", reason=f"completed {rec.op!r} is in no locked batch")

    for tau, _, j, op in entries:
        rec = by_id.get(op)
        if rec is None:
            continue
        if tau < (rec.invoke_real, rec.invoke_seq):
            return Verdict(False, "witness", reason=f"{op!r} takes effect at {tau} before its invocation")
        if rec.complete and tau > (rec.respond_real, rec.respond_seq):
            return Verdict(False, "witness", reason=f"{op!r} takes effect at {tau} after its response")

    entries.sort(key=lambda e: (e[0], e[1], e[2], e[3]))
    state = obj.initial
    order = []
    for _, _, _, op in entries:
        state, value = obj.apply(state, op.kind)
        order.append(repr(op))
        rec = by_id.get(op)
        if rec is not None and rec.complete and value != rec.value:
            return Verdict(False, "witness", order=order,
                           reason=f"{op!r} returned {rec.value!r}, replay gives {value!r}")
    return Verdict(True, "witness", order=order)


# -- brute-force checker --------------------------------------------------------


def _search(recs: list[OpRecord], obj: ObjectType) -> list[int] | None:
    """A legal linearization as indexes into ``recs``, or None."""
    n = len(recs)
    must = 0
    for i, r in enumerate(recs):
        if r.complete:
            must |= 1 << i
    # preds[i]: operations that responded before i was invoked
    preds = [0] * n
    for i, a in enumerate(recs):
        for k, b in enumerate(recs):
            if b.complete and b.respond_seq < a.invoke_seq:
                preds[i] |= 1 << k
    seen: set[tuple[int, Any]] = set()
    path: list[int] = []

    def dfs(mask: int, state: Any) -> bool:
        if mask & must == must:
            return True
        key = (mask, _freeze(state))
        if key in seen:
            return False
        seen.add(key)
        for i in range(n):
            bit = 1 << i
            if mask & bit or preds[i] & ~mask & must:
                continue
            r = recs[i]
            nxt, value = obj.apply(state, r.kind)
            if r.complete and value != r.value:
                continue
            path.append(i)
            if dfs(mask | bit, nxt):
                return True
            path.pop()
        return False

    return list(path) if dfs(0, obj.initial) else None


def _freeze(x: Any) -> Any:
    if isinstance(x, list):
        return tuple(_freeze(v) for v in x)
    if isinstance(x, dict):
        return tuple(sorted((k, _freeze(v)) for k, v in x.items()))
    return x


def _relax(r: OpRecord) -> OpRecord:
    """An op that may be placed anywhere or left out, with its response unchecked."""
    return replace(r, invoke_seq=-1, respond_real=None, respond_seq=None, respond_local=None)


def _minimal_failing(recs: list[OpRecord], obj: ObjectType) -> list[OpRecord]:
    """A minimal set of completed ops whose constraints alone admit no linearization.

    Ops outside the set stay available as relaxed ops, so an RMW a read depends
    on is not needed in the set unless its own response or timing matters.
    """
    core = [i for i, r in enumerate(recs) if r.complete]
    i = 0
    while i < len(core):
        trial = core[:i] + core[i + 1:]
        keep = set(trial)
        relaxed = [r if k in keep else _relax(r) for k, r in enumerate(recs)]
        if _search(relaxed, obj) is None:
            core = trial
        else:
            i += 1
    return [recs[k] for k in core]


def check_brute_force(history: History, obj: ObjectType, cap: int = DEFAULT_CAP) -> Verdict:
    recs = list(history.records)
    if len(history.complete) > cap:
        raise HistoryTooLarge(f"{len(history.complete)} completed operations exceed the cap {cap}")
    found = _search(recs, obj)
    if found is not None:
        return Verdict(True, "brute_force", order=[repr(recs[i].op) for i in found])
    blocking = _minimal_failing(recs, obj)
    return Verdict(False, "brute_force", blocking=[repr(r.op) for r in blocking],
                   reason="no legal linearization")


@dataclass
class LinReport:
    witness: Verdict
    brute_force: Verdict | None  # None when over the cap

    @property
    def ok(self) -> bool:
        return self.witness.ok and (self.brute_force is None or self.brute_force.ok)

    def to_json(self) -> dict:
        return {"ok": self.ok, "witness": self.witness.to_json(),
                "brute_force": None if self.brute_force is None else self.brute_force.to_json()}


def check_linearizable(trace: Trace, cap: int = DEFAULT_CAP) -> LinReport:
    """The witness verdict, cross-checked by brute force when the history is small."""
    wit = check_witness(trace)
    hist = extract_history(trace)
    obj = get_object_type(trace.header["object"])
    bf = None
    if len(hist.complete) <= cap and len(hist) <= cap + 4:
        bf = check_brute_force(hist, obj, cap)
    return LinReport(wit, bf)
