"""Per-process replica state machine for algorithms 1 and 2 and the CHT baseline.

The three cooperating threads of a process are generator tasks that yield
``Wait`` records. The driver resumes a task when its condition holds or its
local-time deadline passes. Message absorption (thread 3) runs synchronously
on delivery; the PCM handlers queue up for thread 2, which never runs them
while it is inside leader work.
"""

from __future__ import annotations

import math
from collections import defaultdict, deque
from dataclasses import dataclass
from typing import Any, Callable, Generator, Protocol

from ..objects import NOOP, ObjectType, Operation
from .messages import (INIT_BATCH, EMPTY_BATCH0, INITIAL_LEASE, Batch, CommitLease, EstReply,
                       EstRequest, Lease, Message, MyBatch, MyGaps, OpRequest, PAck, Prepare,
                       RequestLease, Status, enc_time)
from .params import ProtocolParams

INF = math.inf
DONE, FAILED = "done", "failed"

# idle loops are not logged as waits
QUIET_WAITS = frozenset({"idle", "client_idle", "main_idle"})


class Host(Protocol):
    """What a process needs from its environment."""

    def local_time(self, pid: int) -> int: ...
    def send(self, src: int, dst: int, msg: Message) -> None: ...
    def emit(self, pid: int, kind: str, **payload) -> None: ...
    def leader(self, pid: int) -> int: ...
    def am_leader(self, pid: int, t1: int, t2: int) -> bool: ...
    def on_response(self, pid: int, op: Operation, value: Any, meta: Any) -> None: ...


@dataclass
class Wait:
    reason: str
    cond: Callable[[], bool] | None = None
    until: float | None = None

    def satisfied(self, now: int, timers: bool = True) -> bool:
        # without timers a deadline on this very tick waits for the tick's deliveries
        if self.until is not None and (now > self.until or (timers and now == self.until)):
            return True
        return self.cond is not None and bool(self.cond())


@dataclass
class Task:
    name: str
    gen: Generator
    wait: Wait | None = None
    blocked_since: int | None = None
    started: bool = False


Gen = Generator[Wait, None, Any]


class ProtocolViolation(RuntimeError):
    """Internal precondition of the pseudocode broken (a bug, never expected)."""


def ops_json(ops) -> list:
    return [o.to_json() for o in sorted(ops)]


class Process:
    def __init__(self, pid: int, n: int, params: ProtocolParams, obj: ObjectType, host: Host):
        self.pid, self.n, self.obj, self.host = pid, n, obj, host
        self.params = params.normalized()
        p = self.params
        self.alg2 = p.algorithm == 2
        self.cht = p.cht
        self.eps = p.eps_wait
        self.need = 0 if "weak_quorum" in p.mutations else n // 2

        self.maxT = -1
        self.est: tuple[frozenset, int, int] = (frozenset(), -1, 0)
        self.batches: dict[int, Batch] = {-1: INIT_BATCH, 0: EMPTY_BATCH0}
        self.known_prefix = 0  # every Batch[1..known_prefix] is non-initial
        self.states: dict[int, Any] = {-1: obj.initial, 0: obj.initial}
        self.replies: dict[Operation, Any] = {}
        self.takes_effect: dict[Operation, float] = {}
        self.counter = 0
        self.ops_requested: set[Operation] = set()
        self.ops_done: set[Operation] = set()
        self.outstanding: set[Operation] = set()  # ops_requested - ops_done
        self.mbd = 0
        self.replied: dict[int, set[int]] = defaultdict(set)
        self.est_replies: dict[int, set] = defaultdict(set)
        self.packed: dict[tuple[int, int], set[int]] = defaultdict(set)
        self.pending: dict[int, Batch] = {}
        self.max_pending = 0
        self.lease_holders: set[int] = set()
        self.next_send_time = 0
        self.lease: Lease = INITIAL_LEASE

        self.pcm_queue: deque = deque()
        self.lease_requests: deque = deque()
        self.client_queue: deque = deque()
        self.crashed = False
        self.stopped = False
        self.last_lw_t = -1
        self.in_main_loop = False
        self.in_doops = False
        self.tasks: list[Task] = [Task("thread2", self._thread2()), Task("client", self._client())]

    # -- environment helpers ------------------------------------------------

    def now(self) -> int:
        return self.host.local_time(self.pid)

    def emit(self, kind: str, **payload) -> None:
        self.host.emit(self.pid, kind, **payload)

    def am_leader(self, t1: int, t2: int) -> bool:
        return self.host.am_leader(self.pid, t1, t2)

    def send(self, dst: int, msg: Message) -> None:
        self.host.send(self.pid, dst, msg)

    def broadcast(self, msg: Message) -> None:
        for q in range(self.n):
            if q != self.pid:
                self.host.send(self.pid, q, msg)

    # -- driver interface -----------------------------------------------------

    def invoke(self, kind: tuple, meta: Any = None) -> None:
        self.obj.is_read(kind)  # rejects unknown kinds early
        self.client_queue.append((kind, meta))

    def deliver(self, src: int, msg: Message) -> None:
        """Thread 3: absorb a message, or queue it for the PCM handlers."""
        if self.crashed:
            return
        if msg.pcm:
            self.pcm_queue.append((src, msg))
            return
        kind = msg.kind
        if kind == "OpRequest":
            self._add_requested(msg.op)
        elif kind == "EstReply":
            self.set_batch(msg.k - 1, msg.prev, "estreply")
            self.replied[msg.t].add(src)
            self.est_replies[msg.t].add((msg.ops, msg.ts, msg.k))
        elif kind == "PAck":
            self.packed[(msg.t, msg.j)].add(src)
        elif kind == "MyGaps":
            for j in msg.gaps:
                b = self.batch(j)
                if not b.is_init:
                    self.send(src, MyBatch(j, b))
        elif kind == "MyBatch":
            self.set_batch(msg.j, msg.batch, "mybatch")
        elif kind == "RequestLease":
            self.lease_requests.append(src)
        else:
            raise ProtocolViolation(f"unexpected message kind {kind}")

    def crash(self) -> None:
        self.crashed = True
        for task in self.tasks:
            task.gen.close()
        self.tasks = []

    def stop(self) -> None:
        """End of run: drop the tasks without tracing their teardown."""
        self.stopped = True
        for task in self.tasks:
            task.gen.close()
        self.tasks = []

    def run(self, max_steps: int = 100000, timers: bool = True) -> None:
        """Resume every task whose wait is over, until no task can progress.

        With ``timers`` off only conditions are evaluated, so a deadline falling on
        this tick cannot fire before every message delivered at this tick is absorbed.
        """
        steps = 0
        progressed = True
        while progressed and not self.crashed:
            progressed = False
            for task in list(self.tasks):
                if self.crashed:
                    return
                now = self.now()
                if task.started and not task.wait.satisfied(now, timers):
                    continue
                self._resume(task, timers)
                progressed = True
                steps += 1
                if steps > max_steps:
                    raise ProtocolViolation(f"p{self.pid} made no time progress in {max_steps} steps")

    def _resume(self, task: Task, timers: bool = True) -> None:
        if task.blocked_since is not None:
            self.emit("wait_end", task=task.name, reason=task.wait.reason,
                      waited=self.now() - task.blocked_since)
            task.blocked_since = None
        task.started = True
        while True:
            try:
                w = task.gen.send(None)
            except StopIteration:
                self.tasks.remove(task)
                return
            task.wait = w
            if not w.satisfied(self.now(), timers):
                break
        if w.reason not in QUIET_WAITS:
            task.blocked_since = self.now()
            self.emit("wait_start", task=task.name, reason=w.reason,
                      until=None if w.until is None else enc_time(w.until))

    def next_deadline(self) -> float:
        """Earliest local time at which some blocked task times out."""
        best = INF
        for task in self.tasks:
            if task.wait is not None and task.wait.until is not None:
                best = min(best, task.wait.until)
        return best

    # -- state mutation with tracing -----------------------------------------

    def batch(self, j: int) -> Batch:
        return self.batches.get(j, INIT_BATCH)

    def set_batch(self, j: int, b: Batch, source: str) -> None:
        old = self.batch(j)
        if old == b:
            return
        if b.is_init and not old.is_init:
            self.emit("anomaly", what="batch_reset", j=j, source=source)
        self.batches[j] = b
        self.emit("batch", j=j, batch=b.to_json(), source=source)
        while not self.batch(self.known_prefix + 1).is_init:
            self.known_prefix += 1

    def set_lease(self, lease: Lease, source: str) -> None:
        self.lease = lease
        self.emit("lease", lease=lease.to_json(), source=source)

    def accept(self, ops: frozenset, t: int, j: int) -> None:
        self.est = (ops, t, j)
        self.emit("accept", ops=ops_json(ops), t=t, j=j)

    def _add_requested(self, op: Operation) -> None:
        if op in self.ops_requested:
            return
        self.ops_requested.add(op)
        if op not in self.ops_done:
            self.outstanding.add(op)

    def conflicts_any(self, op: Operation, ops) -> bool:
        return any(self.obj.conflicts(op.kind, o.kind) for o in ops)

    # -- batch execution ------------------------------------------------------

    def execute_batch(self, j: int) -> None:
        b = self.batch(j)
        if b.is_init:
            raise ProtocolViolation(f"p{self.pid} executing unknown batch {j}")
        sigma = self.states[j - 1]
        for op in b.sorted_ops():
            sigma, self.replies[op] = self.obj.apply(sigma, op.kind)
            self.takes_effect[op] = b.promise
        self.states[j] = sigma
        self.emit("execute", j=j, state=sigma, promise=enc_time(b.promise), nops=len(b.ops))

    def execute_up_to(self, jp: int) -> None:
        for j in range(self.mbd + 1, jp + 1):
            self.execute_batch(j)
            ops = self.batch(j).ops
            self.ops_done |= ops
            self.outstanding -= ops
            self.mbd = max(self.mbd, j)

    # -- shared procedures ----------------------------------------------------

    def _wait_until(self, local: float, reason: str) -> Gen:
        yield Wait(reason, until=local)

    def _fill_gaps(self, kp: int) -> Gen:
        while True:
            gaps = tuple(j for j in range(self.known_prefix + 1, kp + 1) if self.batch(j).is_init)
            if not gaps:
                return
            self.broadcast(MyGaps(gaps))
            yield Wait("fill_gaps", cond=lambda: self.known_prefix >= kp,
                       until=self.now() + self.params.retx)

    # -- thread 1 -------------------------------------------------------------

    def _client(self) -> Gen:
        while True:
            if not self.client_queue:
                yield Wait("client_idle", cond=lambda: bool(self.client_queue))
                continue
            kind, meta = self.client_queue.popleft()
            self.counter += 1
            op = Operation(self.pid, self.counter, kind)
            if self.obj.is_read(kind):
                self.emit("invoke", op=op.to_json(), read=True, meta=meta)
                value, info = yield from self._read(op)
                self.emit("respond", op=op.to_json(), read=True, value=value, **info)
            else:
                idle = self.in_main_loop and not self.in_doops and not self.outstanding
                self.emit("invoke", op=op.to_json(), read=False, meta=meta, leader_idle=idle)
                value = yield from self._rmw(op)
                self.emit("respond", op=op.to_json(), read=False, value=value)
            self.host.on_response(self.pid, op, value, meta)

    def _request(self, op: Operation) -> None:
        ldr = self.host.leader(self.pid)
        if ldr == self.pid:
            self._add_requested(op)
        else:
            self.send(ldr, OpRequest(op))

    def _rmw(self, op: Operation) -> Gen:
        while op not in self.replies:
            self._request(op)
            yield Wait("rmw_reply", cond=lambda: op in self.replies,
                       until=self.now() + self.params.retx)
        if not self.cht and "ignore_promise_wait" not in self.params.mutations:
            yield Wait("rmw_promise", until=self.takes_effect[op] + self.eps)
        return self.replies[op]

    def _noop(self) -> Gen:
        self.counter += 1
        op = Operation(self.pid, self.counter, NOOP)
        self.emit("noop_invoke", op=op.to_json())
        value = yield from self._rmw(op)
        self.emit("noop_respond", op=op.to_json(), value=value)

    def _read(self, op: Operation) -> Gen:
        p = self.params
        while True:
            t1 = self.now()
            lease = self.lease
            if lease.valid_at(t1, p.lam):
                break
            yield Wait("no_valid_lease", cond=lambda: self.lease != lease)
        self.emit("read_lease", op=op.to_json(), t=t1, lease=lease.to_json())
        k_star, t_star = lease.batch, lease.start
        if not self.cht and t1 < t_star:
            case = 1
            k_hat = 0
            for j in range(k_star, 0, -1):
                b = self.batch(j)
                if b.promise <= t1 and (p.strict_figure1 or self.conflicts_any(op, b.ops)):
                    k_hat = j
                    break
        else:
            case = 2
            u = self.max_pending

            def compute() -> int:
                best = k_star
                for j in range(u, k_star, -1):
                    pb = self.pending.get(j)
                    if pb is None or not self.conflicts_any(op, pb.ops):
                        continue
                    if self.cht or pb.promise <= t1:
                        best = j
                        break
                return best

            box = [compute()]

            def batches_known() -> bool:
                if self.alg2:
                    box[0] = compute()
                return self.known_prefix >= box[0] or all(
                    not self.batch(j).is_init for j in range(k_star + 1, box[0] + 1))

            if not batches_known():
                yield Wait("read_pending_batch", cond=batches_known)
            k_hat = box[0]
        if not (self.cht or p.skip_read_promise_wait or "ignore_promise_wait" in p.mutations):
            yield Wait("read_promise", until=self.batch(k_hat).promise + self.eps)
        self.execute_up_to(k_hat)
        _, value = self.obj.apply(self.states[k_hat], op.kind)
        return value, {"k_hat": k_hat, "case": case}

    # -- thread 2 -------------------------------------------------------------

    def _thread2(self) -> Gen:
        while True:
            t = self.now()
            if t > self.last_lw_t and self.am_leader(t, t):
                self.last_lw_t = t
                yield from self._leader_work(t)
            if self.pcm_queue:
                yield from self._pcm()
                continue
            yield Wait("idle", cond=self._thread2_ready, until=self._thread2_retry())

    def _thread2_ready(self) -> bool:
        if self.pcm_queue:
            return True
        now = self.now()
        return now > self.last_lw_t and self.am_leader(now, now)

    def _thread2_retry(self) -> float | None:
        now = self.now()
        if now == self.last_lw_t and self.am_leader(now, now):
            return now + 1
        return None

    def _pcm(self) -> Gen:
        src, msg = self.pcm_queue.popleft()
        kind = msg.kind
        if kind == "EstRequest":
            if msg.t > self.maxT:
                self.maxT = msg.t
                self.emit("maxT", value=msg.t)
            ops, ts, k = self.est
            self.send(src, EstReply(msg.t, ops, ts, k, self.batch(k - 1)))
        elif kind in ("Prepare", "Status"):
            self.set_batch(msg.j - 1, msg.prev, "prepare")
            ops, ts, k = self.est
            if msg.t >= self.maxT and (msg.t, msg.j) > (ts, k):
                self.accept(msg.ops, msg.t, msg.j)
                self.pending[msg.j] = Batch(msg.ops, msg.s)
                self.max_pending = max(self.max_pending, msg.j)
                self.emit("pending", j=msg.j, promise=enc_time(msg.s))
            if kind == "Status":
                cur = self.pending.get(msg.j, INIT_BATCH)
                if msg.s > cur.promise:
                    self.pending[msg.j] = Batch(cur.ops, msg.s)
                    self.emit("pending", j=msg.j, promise=enc_time(msg.s))
            if self.est == (msg.ops, msg.t, msg.j):
                self.send(src, PAck(msg.t, msg.j))
        elif kind == "CommitLease":
            self.set_batch(msg.j, msg.batch, "commit")
            yield from self._fill_gaps(msg.j - 1)
            self.execute_up_to(msg.j)
            if self.pid in msg.holders and msg.lease > self.lease:
                self.set_lease(msg.lease, "commit")
            else:
                self.send(src, RequestLease())
        else:
            raise ProtocolViolation(f"unexpected PCM message {kind}")

    def _leader_work(self, t: int) -> Gen:
        p = self.params
        self.emit("lw_start", t=t)
        reason = "lost"
        try:
            yield Wait("leader_init", until=t + p.alpha + p.lam + self.eps)
            if not self.am_leader(t, self.now()):
                return
            self.lease_holders = set()

            def est_done() -> bool:
                return len(self.replied[t]) >= self.need or not self.am_leader(t, self.now())

            while True:
                self.broadcast(EstRequest(t))
                yield Wait("estimates", cond=est_done, until=self.now() + p.retx)
                if est_done():
                    break
            if len(self.replied[t]) < self.need:
                return
            cands = list(self.est_replies[t]) + [self.est]
            o_star, ts_star, k_star = max(cands, key=lambda e: (e[1], e[2], sorted(e[0])))
            if ts_star >= t:
                reason = "superseded"
                return
            yield from self._fill_gaps(k_star - 2)
            res = yield from self._do_ops(o_star, 0, t, k_star, main_loop=False)
            if res == FAILED:
                reason = "recommit_failed"
                return
            self.emit("lw_ready", t=t, k=k_star)
            self.tasks.append(Task("noop", self._noop()))
            self.in_main_loop = True
            while True:
                t1 = self.now()
                if not self.am_leader(t, t1):
                    return
                if t1 >= self.next_send_time:
                    k = self.est[2]
                    self.set_lease(Lease(k, t1), "renew")
                    self.broadcast(CommitLease(self.batch(k), k, self.lease,
                                               frozenset(self.lease_holders)))
                    self.next_send_time = t1 + p.renew
                while self.lease_requests:
                    self.lease_holders.add(self.lease_requests.popleft())
                if self.outstanding:
                    next_ops = frozenset(self.outstanding)
                    k = self.est[2]
                    if self.alg2:
                        res = yield from self._do_ops_status(next_ops, t, k + 1)
                    else:
                        res = yield from self._do_ops(next_ops, t1 + p.alpha, t, k + 1,
                                                      main_loop=True)
                    if res == FAILED:
                        reason = "doops_failed"
                        return
                    continue
                yield Wait("main_idle",
                           cond=lambda: bool(self.lease_requests) or bool(self.outstanding)
                           or not self.am_leader(t, self.now()),
                           until=self.next_send_time)
        finally:
            self.in_main_loop = False
            if not (self.crashed or self.stopped):
                self.emit("lw_end", t=t, reason=reason)

    def _do_ops(self, ops: frozenset, s: float, t: int, j: int, main_loop: bool) -> Gen:
        p = self.params
        if t < self.maxT:
            return FAILED
        self.accept(ops, t, j)
        self.in_doops = True
        try:
            key = (t, j)
            msg_cls = Status if self.alg2 else Prepare

            def done() -> bool:
                return len(self.packed[key]) >= self.need or not self.am_leader(t, self.now())

            first = self.now()
            self.emit("propose", t=t, j=j, s=enc_time(s), main_loop=main_loop)
            while True:
                self.broadcast(msg_cls(ops, s, t, j, self.batch(j - 1)))
                yield Wait("acks", cond=done, until=self.now() + p.retx)
                if done():
                    break
            if len(self.packed[key]) < self.need:
                return FAILED
            return (yield from self._commit(ops, s, t, j, first, main_loop))
        finally:
            self.in_doops = False

    def _do_ops_status(self, ops: frozenset, t: int, j: int) -> Gen:
        p = self.params
        if t < self.maxT:
            return FAILED
        self.accept(ops, t, j)
        self.in_doops = True
        try:
            key = (t, j)
            first = None
            rnd = 0

            def enough() -> bool:
                # rounds go on until the commit point so a blocked reader sees a
                # fresher promise or the commit within beta
                if len(self.packed[key]) < self.need:
                    return False
                if p.strict_figure2:
                    return True
                return (self.lease_holders <= self.packed[key]
                        or self.now() >= first + 2 * p.delta)
            while True:
                t1 = self.now()
                if not self.am_leader(t, t1):
                    return FAILED
                s = t1 + p.alpha
                self.broadcast(Status(ops, s, t, j, self.batch(j - 1)))
                self.emit("status_round", t=t, j=j, s=s, round=rnd)
                if first is None:
                    first = t1
                rnd += 1
                cutoff = first + 2 * p.delta
                while True:
                    wake = t1 + p.beta
                    if self.now() < cutoff < wake:
                        wake = cutoff
                    yield Wait("status_acks", cond=enough, until=wake)
                    if enough() or self.now() >= t1 + p.beta:
                        break
                if enough():
                    break
            return (yield from self._commit(ops, s, t, j, first, True))
        finally:
            self.in_doops = False

    def _commit(self, ops: frozenset, s: float, t: int, j: int, first: int,
                main_loop: bool) -> Gen:
        p = self.params
        key = (t, j)

        def covered() -> bool:
            return self.lease_holders <= self.packed[key]

        yield Wait("leaseholder_acks", cond=covered, until=first + 2 * p.delta)
        if (not covered() and "no_lease_expiry_wait" not in p.mutations
                and (self.cht or s < self.lease.start + p.lam)):
            yield Wait("lease_expiry", until=self.lease.start + p.lam + self.eps)
        self.lease_holders = set(self.packed[key])
        self.set_batch(j, Batch(ops, s), "lock")
        self.emit("lock", j=j, t=t, ops=ops_json(ops), promise=enc_time(s), main_loop=main_loop)
        self.set_lease(Lease(j, s), "lock")
        self.execute_up_to(j)
        self.broadcast(CommitLease(self.batch(j), j, self.lease, frozenset(self.lease_holders)))
        self.next_send_time = s + p.renew
        return DONE
