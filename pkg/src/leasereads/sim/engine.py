"""Deterministic discrete-event simulator driving the replica processes."""

from __future__ import annotations

import heapq
import math
import random
from collections import Counter
from typing import Any

from ..leadership import ArbiterProvider, HeartbeatProvider, LeadershipProvider
from ..objects import Operation, get_object_type
from ..protocol.messages import Message
from ..protocol.process import Process
from .network import ClockModel, Network
from .scenario import Scenario
from .trace import Trace

INF = math.inf

# same-tick ordering: crashes, then deliveries, then timers, then invocations
PRIO = {"crash": 0, "deliver": 1, "timer": 2, "wake": 2, "invoke": 3}


def make_provider(sc: Scenario) -> LeadershipProvider:
    ld = sc.leadership
    if ld.provider == "arbiter":
        return ArbiterProvider(list(ld.segments), ld.final_holder, ld.final_start)
    delta = sc.params.delta
    return HeartbeatProvider(sc.n, timeout=ld.timeout or 2 * delta,
                             period=ld.period or max(1, delta // 2))


def op_kind_for(name: str, rng: random.Random) -> tuple:
    if name == "write":
        return ("write", rng.randint(0, 9))
    if name == "cas":
        return ("cas", rng.randint(0, 2), rng.randint(0, 2))
    if name == "add":
        return ("add", rng.randint(0, 3))
    return (name,)


class Simulator:
    """One run of a scenario. ``run()`` returns the trace."""

    def __init__(self, sc: Scenario):
        self.sc = sc
        self.n = sc.n
        self.obj = get_object_type(sc.object)
        self.clock = ClockModel(sc.offsets)
        self.net = Network(sc.network, random.Random(f"{sc.seed}:net"))
        self.provider = make_provider(sc)
        self.provider.attach(self.local_time, self._send_raw, sc.n)
        header = sc.header()
        header["clock_base"] = self.clock.base
        self.trace = Trace(header)
        self.real = 0
        self.queue: list = []
        self._seq = 0
        self.wakes: list[set[int]] = [set() for _ in range(sc.n)]
        self.crashed: set[int] = set()
        self.procs = [Process(p, sc.n, sc.params, self.obj, self) for p in range(sc.n)]
        self.msg_counts: Counter = Counter()
        self.gen_rngs = [random.Random(f"{sc.seed}:gen{i}") for i in range(len(sc.workload.generators))]
        self.gen_counts = [0] * len(sc.workload.generators)

    # -- host interface used by processes -----------------------------------

    def local_time(self, pid: int) -> int:
        return self.clock.local(pid, self.real)

    def emit(self, pid: int | None, kind: str, **payload) -> None:
        local = None if pid is None else self.local_time(pid)
        self.trace.add(kind, self.real, pid, local, **payload)

    def send(self, src: int, dst: int, msg: Message) -> None:
        self._send_raw(src, dst, msg)

    def _send_raw(self, src: int, dst: int, msg: Message) -> None:
        at = self.net.schedule(src, dst, msg.kind, self.real)
        rec = self.trace.add("send", self.real, src, self.local_time(src), dst=dst, msg=msg.kind,
                             body=msg.to_json(), at=at)
        self.msg_counts[msg.kind] += 1
        if at is not None:
            self._push(at, "deliver", (src, dst, msg, rec["seq"]))

    def leader(self, pid: int) -> int:
        return self.provider.leader(pid)

    def am_leader(self, pid: int, t1: int, t2: int) -> bool:
        return self.provider.am_leader(pid, t1, t2)

    def on_response(self, pid: int, op: Operation, value: Any, meta: Any) -> None:
        # closed-loop generators issue their next op after a response
        gi = meta.get("gen") if meta else None
        if gi is None:
            return
        g = self.sc.workload.generators[gi]
        if g.type == "closed_loop":
            nxt = self.real + max(g.think, 0)
            if nxt < g.stop and (g.max_ops is None or self.gen_counts[gi] < g.max_ops):
                self._push(nxt, "invoke", (g.proc, None, {"gen": gi}))

    # -- event loop ----------------------------------------------------------------

    def _push(self, real: float, kind: str, data: Any) -> None:
        heapq.heappush(self.queue, (real, PRIO[kind], self._seq, kind, data))
        self._seq += 1

    def _schedule_wake(self, pid: int) -> None:
        if pid in self.crashed:
            return
        proc = self.procs[pid]
        now = self.local_time(pid)
        d = min(proc.next_deadline(), self.provider.next_change(pid, now))
        if d == INF:
            return
        # an overdue deadline fires at this tick, after the remaining deliveries
        r = max(self.clock.real_at(pid, d), self.real)
        if r not in self.wakes[pid]:
            self.wakes[pid].add(r)
            self._push(r, "wake", pid)

    def _run_proc(self, pid: int, timers: bool = True) -> None:
        if pid in self.crashed:
            return
        self.procs[pid].run(timers=timers)
        self._schedule_wake(pid)

    def _pick_kind(self, gi: int) -> tuple:
        g = self.sc.workload.generators[gi]
        rng = self.gen_rngs[gi]
        names = [m for m, _ in g.mix]
        weights = [w for _, w in g.mix]
        return op_kind_for(rng.choices(names, weights)[0], rng)

    def _setup(self) -> None:
        sc = self.sc
        for p, tm in sc.crashes:
            self._push(tm, "crash", p)
        for i, (p, tm, kind) in enumerate(sc.workload.ops):
            self._push(tm, "invoke", (p, tuple(kind), {"script": i}))
        for gi, g in enumerate(sc.workload.generators):
            if g.type == "closed_loop":
                if g.start < g.stop:
                    self._push(g.start, "invoke", (g.proc, None, {"gen": gi}))
            else:
                tm = g.start
                count = 0
                while tm < g.stop and (g.max_ops is None or count < g.max_ops):
                    self._push(tm, "invoke", (g.proc, None, {"gen": gi}))
                    tm += g.period
                    count += 1
        period = self.provider.timer_period()
        for p in range(self.n):
            self._push(0, "wake", p)
            self.wakes[p].add(0)
            if period:
                self._push(0, "timer", p)

    def run(self) -> Trace:
        self._setup()
        horizon = self.sc.horizon
        while self.queue:
            real, _, _, kind, data = heapq.heappop(self.queue)
            if real > horizon:
                break
            self.real = real
            getattr(self, "_on_" + kind)(data)
        self.real = horizon
        self._finish()
        return self.trace

    def _on_crash(self, pid: int) -> None:
        if pid in self.crashed:
            return
        self.emit(pid, "crash")
        self.crashed.add(pid)
        self.procs[pid].crash()
        self.provider.on_crash(pid)
        for q in range(self.n):
            self._run_proc(q)

    def _on_deliver(self, data) -> None:
        src, dst, msg, mid = data
        if dst in self.crashed:
            self.trace.add("lost", self.real, None, None, src=src, dst=dst, mid=mid, msg=msg.kind)
            return
        self.emit(dst, "deliver", src=src, mid=mid, msg=msg.kind)
        if msg.kind == "Heartbeat":
            self.provider.on_message(dst, src, msg)
        else:
            self.procs[dst].deliver(src, msg)
        self._run_proc(dst, timers=False)

    def _on_wake(self, pid: int) -> None:
        self.wakes[pid].discard(self.real)
        self._run_proc(pid)

    def _on_timer(self, pid: int) -> None:
        if pid in self.crashed:
            return
        self.provider.on_timer(pid)
        self._push(self.real + self.provider.timer_period(), "timer", pid)
        self._run_proc(pid)

    def _on_invoke(self, data) -> None:
        pid, kind, meta = data
        if kind is None:
            gi = meta["gen"]
            kind = self._pick_kind(gi)
            self.gen_counts[gi] += 1
        if pid in self.crashed:
            self.trace.add("invoke_rejected", self.real, None, None, pid=pid, op_kind=list(kind),
                           meta=meta)
            return
        self.procs[pid].invoke(kind, meta)
        self._run_proc(pid)

    def _finish(self) -> None:
        ledger = [[p, a, b if b != INF else "inf"] for p, a, b in self.provider.ledger.intervals()]
        self.trace.add("ledger", self.real, None, None, intervals=ledger)
        for p in range(self.n):
            if p in self.crashed:
                continue
            proc = self.procs[p]
            self.emit(p, "final", lease=proc.lease.to_json(), mbd=proc.mbd,
                      pending_client=len(proc.client_queue))
        for proc in self.procs:
            proc.stop()
        self.trace.summary = {
            "messages": sum(self.msg_counts.values()),
            "by_kind": dict(sorted(self.msg_counts.items())),
        }


def run(sc: Scenario) -> Trace:
    return Simulator(sc).run()
