"""Blocking-time measurement per operation and per (period, kind) bucket."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..sim.trace import Trace
from .history import OpRecord, TraceView, extract_history

UNSTABLE, STABLE, NICE = "unstable", "stable", "nice"
BUCKETS = (STABLE, NICE)
KINDS = ("rmw", "read")


@dataclass(frozen=True)
class Sample:
    op: str
    proc: int
    kind: str  # "read" or "rmw"
    blocking: int
    invoke_real: int
    respond_real: int
    period: str
    counted: bool  # RMWs count only when issued by an idle leader


@dataclass
class BlockingReport:
    stabilization: int
    samples: list[Sample] = field(default_factory=list)

    def maxima(self) -> dict[tuple[str, str], int | None]:
        out: dict[tuple[str, str], int | None] = {(b, k): None for b in BUCKETS for k in KINDS}
        for s in self.samples:
            if not s.counted or s.period not in BUCKETS:
                continue
            cur = out[(s.period, s.kind)]
            out[(s.period, s.kind)] = s.blocking if cur is None else max(cur, s.blocking)
        return out

    def counts(self) -> dict[tuple[str, str], int]:
        out = {(b, k): 0 for b in BUCKETS for k in KINDS}
        for s in self.samples:
            if s.counted and s.period in BUCKETS:
                out[(s.period, s.kind)] += 1
        return out

    def to_json(self) -> dict:
        return {
            "stabilization": self.stabilization,
            "maxima": {f"{b}/{k}": v for (b, k), v in self.maxima().items()},
            "counts": {f"{b}/{k}": v for (b, k), v in self.counts().items()},
        }


def classify(view: TraceView, rec: OpRecord, stab: int) -> str:
    """The period containing the op's whole execution window."""
    if rec.invoke_real < stab:
        return UNSTABLE
    margin = view.nice_margin
    for a, b in view.nice_periods:
        if a + margin <= rec.invoke_real and rec.respond_real <= b:
            return NICE
    return STABLE


def blocking_times(trace: Trace) -> BlockingReport:
    view = TraceView(trace)
    stab = view.stabilization()
    rep = BlockingReport(stab)
    for rec in extract_history(trace).complete:
        period = classify(view, rec, stab)
        counted = rec.read or rec.leader_idle
        rep.samples.append(Sample(repr(rec.op), rec.proc, "read" if rec.read else "rmw",
                                  rec.blocking, rec.invoke_real, rec.respond_real, period,
                                  counted))
    return rep
