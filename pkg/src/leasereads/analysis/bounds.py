"""Closed-form maximum blocking times and their comparison with measurements."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..sim.trace import Trace
from .blocking import BUCKETS, KINDS, BlockingReport, blocking_times
from .history import TraceView

INF = math.inf


class BoundError(ValueError):
    """Parameters outside the range where the closed forms hold."""


@dataclass(frozen=True)
class BoundQuery:
    algorithm: int | str  # 1, 2 or "cht"
    period: str           # "stable" or "nice"
    op: str               # "read" or "rmw"
    alpha: int
    beta: float
    delta: int
    delta_star: int
    epsilon: int = 0


def theoretical_bound(q: BoundQuery, strict: bool = False) -> int:
    """Maximum blocking time for the query's table cell, in ticks."""
    if q.period not in BUCKETS:
        raise BoundError(f"period must be one of {BUCKETS}")
    if q.op not in KINDS:
        raise BoundError(f"op must be one of {KINDS}")
    a, b, d, ds, e = q.alpha, q.beta, q.delta, q.delta_star, q.epsilon
    if min(a, d, ds, e) < 0 or ds > d:
        raise BoundError("need alpha, delta, delta_star, epsilon >= 0 and delta_star <= delta")
    alg = q.algorithm
    if alg == "cht":
        if a != 0:
            raise BoundError("the cht baseline has alpha = 0")
        alg = 1
    if alg == 2 and b == INF:
        alg = 1
    if alg == 1:
        if not a <= 3 * d:
            raise BoundError(f"algorithm 1 requires alpha <= 3*delta (alpha={a}, delta={d})")
    elif alg == 2:
        if not a <= d + b:
            raise BoundError(f"algorithm 2 requires alpha <= delta + beta (alpha={a}, beta={b})")
        if not 2 * ds <= b <= 2 * d:
            raise BoundError(f"algorithm 2 requires 2*delta_star <= beta <= 2*delta (beta={b})")
        if strict and q.op == "rmw" and (2 * d) % b != 0:
            raise BoundError(f"strict mode requires beta to divide 2*delta (beta={b}, delta={d})")
    else:
        raise BoundError(f"unknown algorithm {q.algorithm!r}")

    if q.period == "nice":
        if q.op == "rmw":
            return max(2 * ds, a + e)
        return max(3 * ds - a, e)
    if alg == 1:
        if q.op == "rmw":
            return max(2 * d, a + e)
        return max(3 * d - a, e)
    if q.op == "rmw":
        return max(2 * d, 2 * d - b + a + e)
    return max(d + b - a, e)


def query_for(view: TraceView, period: str, op: str) -> BoundQuery:
    p = view.params
    return BoundQuery(p.algorithm, period, op, p.alpha, p.beta, view.delta, view.delta_star,
                      view.epsilon)


@dataclass
class BoundRow:
    period: str
    op: str
    measured: int | None
    bound: int | None
    count: int
    status: str  # pass, fail, no data, n/a
    note: str = ""

    def to_json(self) -> dict:
        return {"period": self.period, "op": self.op, "measured": self.measured,
                "bound": self.bound, "count": self.count, "status": self.status,
                "note": self.note}


@dataclass
class BoundsReport:
    rows: list[BoundRow] = field(default_factory=list)
    blocking: BlockingReport | None = None

    @property
    def ok(self) -> bool:
        return all(r.status != "fail" for r in self.rows)

    def row(self, period: str, op: str) -> BoundRow:
        for r in self.rows:
            if (r.period, r.op) == (period, op):
                return r
        raise KeyError((period, op))

    def to_json(self) -> dict:
        return {"ok": self.ok, "rows": [r.to_json() for r in self.rows],
                "blocking": None if self.blocking is None else self.blocking.to_json()}


def check_bounds(trace: Trace, strict: bool = False) -> BoundsReport:
    view = TraceView(trace)
    blk = blocking_times(trace)
    maxima, counts = blk.maxima(), blk.counts()
    slack = view.analysis.get("slack") or 0
    rep = BoundsReport(blocking=blk)
    for period in BUCKETS:
        for op in KINDS:
            measured = maxima[(period, op)]
            try:
                bound = theoretical_bound(query_for(view, period, op), strict)
            except BoundError as e:
                rep.rows.append(BoundRow(period, op, measured, None, counts[(period, op)],
                                         "n/a", str(e)))
                continue
            if measured is None:
                status = "no data"
            else:
                status = "pass" if measured <= bound + slack else "fail"
            rep.rows.append(BoundRow(period, op, measured, bound, counts[(period, op)], status))
    return rep


@dataclass
class StatusEconomy:
    """Status rounds per main-loop batch of algorithm 2."""

    batches: list[dict] = field(default_factory=list)

    @property
    def nice_batches(self) -> list[dict]:
        return [b for b in self.batches if b["in_nice"]]

    @property
    def ok(self) -> bool:
        return all(b["rounds"] == 1 for b in self.nice_batches)

    def to_json(self) -> dict:
        return {"ok": self.ok, "nice_batches": len(self.nice_batches), "batches": self.batches}


def status_economy(trace: Trace) -> StatusEconomy:
    view = TraceView(trace)
    rounds: dict[tuple[int, int], list[int]] = {}
    for r in trace.of_kind("status_round"):
        rounds.setdefault((r["t"], r["j"]), []).append(r["real"])
    out = StatusEconomy()
    margin = view.nice_margin
    for r in trace.of_kind("lock"):
        key = (r["t"], r["j"])
        if not r["main_loop"] or key not in rounds:
            continue
        start, end = rounds[key][0], r["real"]
        in_nice = any(a + margin <= start and end <= b for a, b in view.nice_periods)
        out.batches.append({"j": r["j"], "t": r["t"], "rounds": len(rounds[key]),
                            "first_round": start, "lock": end, "in_nice": in_nice})
    return out
