"""Operation histories and shared views over a finished trace."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

from ..objects import Operation
from ..protocol.messages import dec_time
from ..protocol.params import ProtocolParams
from ..sim.trace import Trace

INF = math.inf


@dataclass(frozen=True)
class OpRecord:
    """One client operation: invocation and, if complete, its response."""

    op: Operation
    read: bool
    proc: int
    invoke_real: int
    invoke_seq: int
    invoke_local: int
    respond_real: int | None = None
    respond_seq: int | None = None
    respond_local: int | None = None
    value: Any = None
    k_hat: int | None = None
    case: int | None = None
    leader_idle: bool = False

    @property
    def complete(self) -> bool:
        return self.respond_seq is not None

    @property
    def kind(self) -> tuple:
        return self.op.kind

    @property
    def blocking(self) -> int | None:
        if not self.complete:
            return None
        return self.respond_local - self.invoke_local


@dataclass
class History:
    records: list[OpRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def complete(self) -> list[OpRecord]:
        return [r for r in self.records if r.complete]

    @property
    def pending(self) -> list[OpRecord]:
        return [r for r in self.records if not r.complete]

    def by_id(self) -> dict[Operation, OpRecord]:
        return {r.op: r for r in self.records}


def extract_history(trace: Trace) -> History:
    """Client operations in invocation order; NoOps of leaders are not client operations."""
    open_: dict[tuple, dict] = {}
    done: list[dict] = []
    for r in trace.records:
        kind = r["kind"]
        if kind == "invoke":
            key = (r["op"][0], r["op"][1])
            if key in open_:
                raise ValueError(f"operation {key} invoked twice")
            open_[key] = {
                "op": Operation.from_json(r["op"]), "read": r["read"], "proc": r["proc"],
                "invoke_real": r["real"], "invoke_seq": r["seq"], "invoke_local": r["local"],
                "leader_idle": bool(r.get("leader_idle", False)),
            }
        elif kind == "respond":
            key = (r["op"][0], r["op"][1])
            rec = open_.pop(key, None)
            if rec is None:
                raise ValueError(f"response to {key} without a matching invocation")
            rec.update(respond_real=r["real"], respond_seq=r["seq"], respond_local=r["local"],
                       value=r["value"], k_hat=r.get("k_hat"), case=r.get("case"))
            done.append(rec)
    recs = [OpRecord(**d) for d in done + list(open_.values())]
    recs.sort(key=lambda x: x.invoke_seq)
    return History(recs)


class TraceView:
    """Header facts and indexes over a trace, shared by the checkers."""

    def __init__(self, trace: Trace):
        self.trace = trace
        h = trace.header
        self.header = h
        self.n: int = h["n"]
        self.epsilon: int = h["epsilon"]
        self.offsets: list[int] = list(h["offsets"])
        self.base: int = h.get("clock_base", max(0, -min(self.offsets)))
        self.gst: int = h["gst"]
        self.delta: int = h["delta"]
        self.delta_star: int = h["delta_star"]
        self.fifo_after: int = h.get("fifo_after", self.gst)
        self.nice_periods: list[tuple[int, int]] = [tuple(x) for x in h.get("nice_periods", [])]
        self.crash_times: dict[int, int] = {p: t for p, t in h.get("crashes", [])}
        self.params = ProtocolParams.from_json(h["params"]).normalized()
        self.analysis: dict = h.get("analysis", {})
        self.horizon: int = h["horizon"]
        # processes that actually crashed within the run
        self.crashed: dict[int, int] = {r["proc"]: r["seq"] for r in trace.of_kind("crash")}
        self.correct = frozenset(p for p in range(self.n) if p not in self.crash_times)

    def greal(self, local: float) -> float:
        """Earliest real time at which some process' clock shows at least ``local``."""
        if local in (INF, -INF):
            return local
        return min(max(0, math.ceil(local) - off - self.base) for off in self.offsets)

    def locks(self) -> dict[int, list[dict]]:
        out: dict[int, list[dict]] = {}
        for r in self.trace.of_kind("lock"):
            out.setdefault(r["j"], []).append(r)
        return out

    def gpromise(self) -> dict[int, float]:
        """Per locked batch: the promise of its main-loop lock, else 0."""
        out: dict[int, float] = {}
        for j, recs in self.locks().items():
            if self.params.cht:
                out[j] = 0
                continue
            main = [dec_time(r["promise"]) for r in recs if r["main_loop"]]
            out[j] = main[0] if main else 0
        return out

    def stabilization(self) -> int:
        """Start of the measured window: every instability source plus a warm-up."""
        last = self.gst
        if self.crash_times:
            last = max(last, max(self.crash_times.values()))
        ready = [r["real"] for r in self.trace.of_kind("lw_ready")]
        if ready:
            last = max(last, ready[-1])
        if self.crash_times:
            # leaseholder sets shed crashed processes at the first commit proposed afterwards
            proposed: dict[tuple, int] = {}
            for r in self.trace.of_kind("propose", "status_round", "lock"):
                key = (r["t"], r["j"])
                if r["kind"] != "lock":
                    proposed.setdefault(key, r["real"])
                elif proposed.get(key, -1) >= last:
                    last = r["real"]
                    break
        warmup = self.analysis.get("warmup")
        return last + (self.params.lam if warmup is None else warmup)

    @property
    def nice_margin(self) -> int:
        m = self.analysis.get("nice_margin")
        return self.params.lam if m is None else m
