"""Protocol message kinds.

Each message is an immutable record; ``to_json`` gives the trace payload.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import ClassVar

from ..objects import Operation

INF = math.inf


def enc_time(x: float) -> int | str:
    """Encode a time value for JSON; infinities become strings."""
    if x == INF:
        return "inf"
    if x == -INF:
        return "-inf"
    return int(x)


def dec_time(x) -> float:
    if x == "inf":
        return INF
    if x == "-inf":
        return -INF
    return x


@dataclass(frozen=True)
class Batch:
    """A batch: a set of RMW operations plus a promise time."""

    ops: frozenset = frozenset()
    promise: float = INF

    @property
    def is_init(self) -> bool:
        return not self.ops and self.promise == INF

    def sorted_ops(self) -> list[Operation]:
        return sorted(self.ops)

    def to_json(self) -> dict:
        return {"ops": [o.to_json() for o in self.sorted_ops()], "promise": enc_time(self.promise)}

    @classmethod
    def from_json(cls, d: dict) -> "Batch":
        return cls(frozenset(Operation.from_json(o) for o in d["ops"]), dec_time(d["promise"]))


INIT_BATCH = Batch()
EMPTY_BATCH0 = Batch(frozenset(), 0)


@dataclass(frozen=True, order=True)
class Lease:
    """Read lease ``(batch, start)``; ordered lexicographically."""

    batch: int = 0
    start: float = -INF

    def valid_at(self, t: float, lam: int) -> bool:
        return t < self.start + lam

    def to_json(self) -> list:
        return [self.batch, enc_time(self.start)]


INITIAL_LEASE = Lease(0, -INF)


def lease_compare(a: Lease, b: Lease) -> int:
    """Three-way comparison of leases: -1, 0 or 1."""
    if a < b:
        return -1
    if a > b:
        return 1
    return 0


def _ops_json(ops) -> list:
    return [o.to_json() for o in sorted(ops)]


class Message:
    kind: ClassVar[str] = "message"
    # messages handled by PCM in thread 2; everything else is absorbed at once
    pcm: ClassVar[bool] = False

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class OpRequest(Message):
    kind: ClassVar[str] = "OpRequest"
    op: Operation

    def to_json(self):
        return {"op": self.op.to_json()}


@dataclass(frozen=True)
class EstRequest(Message):
    kind: ClassVar[str] = "EstRequest"
    pcm: ClassVar[bool] = True
    t: int

    def to_json(self):
        return {"t": self.t}


@dataclass(frozen=True)
class EstReply(Message):
    kind: ClassVar[str] = "EstReply"
    t: int
    ops: frozenset
    ts: int
    k: int
    prev: Batch

    def to_json(self):
        return {"t": self.t, "ops": _ops_json(self.ops), "ts": self.ts, "k": self.k,
                "prev": self.prev.to_json()}


@dataclass(frozen=True)
class Prepare(Message):
    kind: ClassVar[str] = "Prepare"
    pcm: ClassVar[bool] = True
    ops: frozenset
    s: float
    t: int
    j: int
    prev: Batch

    def to_json(self):
        return {"ops": _ops_json(self.ops), "s": enc_time(self.s), "t": self.t, "j": self.j,
                "prev": self.prev.to_json()}


@dataclass(frozen=True)
class Status(Prepare):
    kind: ClassVar[str] = "Status"


@dataclass(frozen=True)
class PAck(Message):
    kind: ClassVar[str] = "PAck"
    t: int
    j: int

    def to_json(self):
        return {"t": self.t, "j": self.j}


@dataclass(frozen=True)
class CommitLease(Message):
    kind: ClassVar[str] = "CommitLease"
    pcm: ClassVar[bool] = True
    batch: Batch
    j: int
    lease: Lease
    holders: frozenset

    def to_json(self):
        return {"batch": self.batch.to_json(), "j": self.j, "lease": self.lease.to_json(),
                "holders": sorted(self.holders)}


@dataclass(frozen=True)
class RequestLease(Message):
    kind: ClassVar[str] = "RequestLease"

    def to_json(self):
        return {}


@dataclass(frozen=True)
class MyGaps(Message):
    kind: ClassVar[str] = "MyGaps"
    gaps: tuple

    def to_json(self):
        return {"gaps": list(self.gaps)}


@dataclass(frozen=True)
class MyBatch(Message):
    kind: ClassVar[str] = "MyBatch"
    j: int
    batch: Batch

    def to_json(self):
        return {"j": self.j, "batch": self.batch.to_json()}


@dataclass(frozen=True)
class Heartbeat(Message):
    """Leader-election traffic of the heartbeat provider (not a protocol message)."""

    kind: ClassVar[str] = "Heartbeat"

    def to_json(self):
        return {}


PROTOCOL_KINDS = ("OpRequest", "EstRequest", "EstReply", "Prepare", "Status", "PAck",
                  "CommitLease", "RequestLease", "MyGaps", "MyBatch")
