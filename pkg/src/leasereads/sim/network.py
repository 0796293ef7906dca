"""Clock and link models."""

from __future__ import annotations

import math
import random

from .scenario import NetworkConfig

INF = math.inf


class ClockModel:
    """Integer clocks ``local = real + offset + base``.

    ``base`` shifts all clocks so none is negative; pairwise skew equals the
    offset difference, so offsets spread by at most epsilon give
    epsilon-synchronized clocks.
    """

    def __init__(self, offsets: tuple[int, ...]):
        self.offsets = tuple(offsets)
        self.base = max(0, -min(self.offsets)) if self.offsets else 0

    def local(self, pid: int, real: int) -> int:
        return real + self.offsets[pid] + self.base

    def real_at(self, pid: int, local: float) -> float:
        """Earliest real time at which ``pid``'s clock shows ``local``."""
        if local in (INF, -INF):
            return local
        return max(0, math.ceil(local) - self.offsets[pid] - self.base)

    def earliest_real(self, local: float) -> float:
        """Earliest real time at which any clock shows at least ``local``."""
        return min(self.real_at(p, local) for p in range(len(self.offsets)))


class Network:
    """Per-link delay and loss decisions, FIFO after ``fifo_after``."""

    def __init__(self, cfg: NetworkConfig, rng: random.Random):
        self.cfg = cfg
        self.rng = rng
        self.last_fifo: dict[tuple[int, int], int] = {}

    def bound_at(self, real: int) -> int:
        return self.cfg.delta_star if self.cfg.in_nice(real) else self.cfg.delta

    def schedule(self, src: int, dst: int, kind: str, real: int) -> int | None:
        """Delivery real time for a message sent now, or None if lost."""
        cfg = self.cfg
        delay = None
        for rule in cfg.rules:
            if rule.matches(src, dst, kind, real):
                if rule.drop:
                    return None
                delay = rule.delay
                break
        if delay is None:
            if real < cfg.gst:
                if self.rng.random() < cfg.pre_gst_loss:
                    return None
                delay = self.rng.randint(cfg.min_delay, cfg.pre_max)
            else:
                bound = self.bound_at(real)
                delay = bound if cfg.policy == "max" else self.rng.randint(cfg.min_delay, bound)
        at = real + delay
        if real >= cfg.fifo_from:
            link = (src, dst)
            at = max(at, self.last_fifo.get(link, at))
            self.last_fifo[link] = at
        return at
