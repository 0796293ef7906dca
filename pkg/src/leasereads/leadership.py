"""Leader oracle ``leader()`` and the interval query ``AmLeader(t1, t2)``.

Two providers share one interface:

* ``ArbiterProvider`` answers from a scripted timeline of leadership
  segments, each a closed interval on the holder's own clock. Segments are
  pairwise disjoint as numbers, so the safety contract holds by construction.
* ``HeartbeatProvider`` trusts the smallest id heard from within a timeout
  and hands out grants through a ledger that refuses overlapping intervals.

Both record every interval on which ``am_leader`` answered true, so the
disjointness contract can be audited after a run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

from .protocol.messages import Heartbeat

INF = math.inf


class ContractError(ValueError):
    """A caller violated the ``AmLeader`` precondition ``t1 <= t2``."""


@dataclass(frozen=True)
class Segment:
    holder: int
    start: float
    end: float  # inclusive; INF for the final segment

    def covers(self, t1: float, t2: float) -> bool:
        return self.start <= t1 and t2 <= self.end


@dataclass
class GrantLedger:
    """Spans on which ``am_leader`` returned true, keyed by (holder, grant id)."""

    spans: dict[tuple[int, int], list[float]] = field(default_factory=dict)

    def record(self, pid: int, grant: int, t1: float, t2: float) -> None:
        span = self.spans.get((pid, grant))
        if span is None:
            self.spans[(pid, grant)] = [t1, t2]
        else:
            span[0] = min(span[0], t1)
            span[1] = max(span[1], t2)

    def intervals(self) -> list[tuple[int, float, float]]:
        return sorted((pid, a, b) for (pid, _), (a, b) in self.spans.items())


def ledger_overlaps(intervals: list[tuple[int, float, float]]) -> list[tuple]:
    """Pairs of intervals held by distinct processes that intersect."""
    bad = []
    ordered = sorted(intervals, key=lambda x: (x[1], x[2], x[0]))
    for i, (p, a, b) in enumerate(ordered):
        for q, c, d in ordered[i + 1:]:
            if c > b:
                break
            if p != q and c <= b and a <= d:
                bad.append(((p, a, b), (q, c, d)))
    return bad


class LeadershipProvider:
    kind = "abstract"

    def __init__(self) -> None:
        self.ledger = GrantLedger()

    def attach(self, local_time: Callable[[int], int], send: Callable, n: int) -> None:
        self.local_time = local_time
        self.send = send
        self.n = n

    def leader(self, pid: int) -> int:
        raise NotImplementedError

    def am_leader(self, pid: int, t1: float, t2: float) -> bool:
        raise NotImplementedError

    def next_change(self, pid: int, now: int) -> float:
        """Local time by which the answer to am_leader(x, x) may change."""
        return INF

    def on_timer(self, pid: int) -> None:
        pass

    def on_message(self, pid: int, src: int, msg) -> None:
        pass

    def on_crash(self, pid: int) -> None:
        pass

    def timer_period(self) -> int | None:
        return None


def _check(t1: float, t2: float) -> None:
    if t1 > t2:
        raise ContractError(f"AmLeader called with t1={t1} > t2={t2}")


class ArbiterProvider(LeadershipProvider):
    """Scripted leadership timeline with a final stable holder from ``final_start`` on."""

    kind = "arbiter"

    def __init__(self, segments: list[tuple[int, int, int]], final_holder: int, final_start: int):
        super().__init__()
        segs = [Segment(h, s, e) for h, s, e in segments]
        segs.append(Segment(final_holder, final_start, INF))
        segs.sort(key=lambda g: g.start)
        for g in segs:
            if g.start > g.end:
                raise ValueError(f"segment {g} has start after end")
        for a, b in zip(segs, segs[1:]):
            if not a.end < b.start:
                raise ValueError(f"leadership segments {a} and {b} intersect")
        self.segments = segs
        self.final_holder = final_holder
        self.final_start = final_start
        self.by_holder: dict[int, list[tuple[int, Segment]]] = {}
        for i, g in enumerate(segs):
            self.by_holder.setdefault(g.holder, []).append((i, g))

    def leader(self, pid: int) -> int:
        now = self.local_time(pid)
        current = self.final_holder
        for g in self.segments:
            if g.start > now:
                break
            current = g.holder
        return current

    def am_leader(self, pid: int, t1: float, t2: float) -> bool:
        _check(t1, t2)
        for i, g in self.by_holder.get(pid, ()):
            if g.covers(t1, t2):
                self.ledger.record(pid, i, t1, t2)
                return True
        return False

    def next_change(self, pid: int, now: int) -> float:
        best = INF
        for _, g in self.by_holder.get(pid, ()):
            for x in (g.start, g.end + 1):
                if now < x < best:
                    best = x
        return best


class HeartbeatProvider(LeadershipProvider):
    """Smallest id heard within ``timeout`` is trusted; grants go through a ledger."""

    kind = "heartbeat"

    def __init__(self, n: int, timeout: int, period: int):
        super().__init__()
        self.timeout = timeout
        self.period = period
        self.last_heard = [[-INF] * n for _ in range(n)]
        self.crashed: set[int] = set()
        self.open_grant: tuple[int, int, float] | None = None  # (pid, grant id, start)
        self.closed: list[tuple[int, float, float]] = []
        self.max_end = -INF
        self.grant_ids = 0

    def trusted(self, pid: int) -> int:
        now = self.local_time(pid)
        alive = [q for q in range(self.n) if q == pid or now - self.last_heard[pid][q] <= self.timeout]
        return min(alive)

    def _refresh(self, pid: int) -> None:
        if pid in self.crashed:
            return
        now = self.local_time(pid)
        trusts_self = self.trusted(pid) == pid
        og = self.open_grant
        if og is not None and og[0] == pid and not trusts_self:
            self._close(now - 1)
        elif og is None and trusts_self and now > self.max_end:
            self.open_grant = (pid, self.grant_ids, now)
            self.grant_ids += 1

    def _close(self, end: float) -> None:
        pid, gid, start = self.open_grant
        span = self.ledger.spans.get((pid, gid))
        if span is not None:
            end = max(end, span[1])
        end = max(end, start - 1)
        if end >= start:
            self.closed.append((pid, start, end))
        self.max_end = max(self.max_end, end)
        self.open_grant = None

    def leader(self, pid: int) -> int:
        self._refresh(pid)
        return self.trusted(pid)

    def am_leader(self, pid: int, t1: float, t2: float) -> bool:
        _check(t1, t2)
        self._refresh(pid)
        og = self.open_grant
        if og is not None and og[0] == pid and og[2] <= t1 and t2 <= self.local_time(pid):
            self.ledger.record(pid, og[1], t1, t2)
            return True
        return False

    def next_change(self, pid: int, now: int) -> float:
        return now + self.period

    def timer_period(self) -> int:
        return self.period

    def on_timer(self, pid: int) -> None:
        for q in range(self.n):
            if q != pid:
                self.send(pid, q, Heartbeat())
        self._refresh(pid)

    def on_message(self, pid: int, src: int, msg) -> None:
        self.last_heard[pid][src] = self.local_time(pid)
        self._refresh(pid)

    def on_crash(self, pid: int) -> None:
        self.crashed.add(pid)
        og = self.open_grant
        if og is not None and og[0] == pid:
            self._close(self.local_time(pid) - 1)
        # others may now claim; the ledger keeps numeric disjointness
        for q in range(self.n):
            if q not in self.crashed:
                self._refresh(q)
