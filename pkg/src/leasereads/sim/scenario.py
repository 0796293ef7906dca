"""Scenario configuration: loading, defaults and validation.

Scenario files are YAML documents tagged ``schema: leasereads-scenario/1``.
Every field is documented in the README; unknown keys are rejected.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from ..objects import REGISTRY
from ..protocol.params import ConfigError, ProtocolParams

SCHEMA = "leasereads-scenario/1"
INF = math.inf


@dataclass(frozen=True)
class LinkRule:
    """Overrides delay (or drops) for matching messages sent in ``[start, end)``."""

    src: int | None = None
    dst: int | None = None
    kinds: tuple[str, ...] | None = None
    start: int = 0
    end: float = INF
    delay: int | None = None
    drop: bool = False

    def matches(self, src: int, dst: int, kind: str, real: int) -> bool:
        return ((self.src is None or self.src == src) and (self.dst is None or self.dst == dst)
                and (self.kinds is None or kind in self.kinds) and self.start <= real < self.end)


@dataclass(frozen=True)
class NetworkConfig:
    delta: int = 4
    delta_star: int = 1
    gst: int = 0
    fifo_after: int | None = None
    min_delay: int = 1
    policy: str = "uniform"
    pre_gst_max_delay: int | None = None
    pre_gst_loss: float = 0.2
    nice_periods: tuple[tuple[int, int], ...] = ()
    rules: tuple[LinkRule, ...] = ()

    @property
    def fifo_from(self) -> int:
        return self.gst if self.fifo_after is None else self.fifo_after

    @property
    def pre_max(self) -> int:
        return 10 * self.delta if self.pre_gst_max_delay is None else self.pre_gst_max_delay

    def in_nice(self, real: int) -> bool:
        return any(a <= real <= b for a, b in self.nice_periods)


@dataclass(frozen=True)
class LeadershipConfig:
    provider: str = "arbiter"
    segments: tuple[tuple[int, int, int], ...] = ()
    final_holder: int = 0
    final_start: int = 0
    timeout: int | None = None
    period: int | None = None


@dataclass(frozen=True)
class Generator:
    type: str
    proc: int
    start: int
    stop: int
    mix: tuple[tuple[str, float], ...]
    think: int = 0
    period: int = 10
    max_ops: int | None = None


@dataclass(frozen=True)
class Workload:
    ops: tuple[tuple[int, int, tuple], ...] = ()  # (proc, real time, op kind)
    generators: tuple[Generator, ...] = ()


@dataclass(frozen=True)
class AnalysisConfig:
    warmup: int | None = None      # default lambda
    slack: int | None = None       # default 3 * alpha0
    nice_margin: int | None = None  # default lambda
    liveness: bool = True          # assert that every op of a correct process completes
    bounds: bool = True            # assert the blocking-time bounds


@dataclass(frozen=True)
class Scenario:
    name: str
    n: int
    seed: int
    horizon: int
    object: str
    network: NetworkConfig
    epsilon: int
    offsets: tuple[int, ...]
    params: ProtocolParams
    leadership: LeadershipConfig
    crashes: tuple[tuple[int, int], ...] = ()
    workload: Workload = field(default_factory=Workload)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    raw: Any = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        validate(self)

    @property
    def correct(self) -> frozenset[int]:
        crashed = {p for p, _ in self.crashes}
        return frozenset(p for p in range(self.n) if p not in crashed)

    @property
    def warmup(self) -> int:
        return self.params.lam if self.analysis.warmup is None else self.analysis.warmup

    @property
    def slack(self) -> int:
        return 3 * self.params.alpha0 if self.analysis.slack is None else self.analysis.slack

    @property
    def nice_margin(self) -> int:
        return self.params.lam if self.analysis.nice_margin is None else self.analysis.nice_margin

    def header(self) -> dict:
        net = self.network
        return {
            "name": self.name, "n": self.n, "seed": self.seed, "horizon": self.horizon,
            "object": self.object, "epsilon": self.epsilon, "offsets": list(self.offsets),
            "gst": net.gst, "delta": net.delta, "delta_star": net.delta_star,
            "fifo_after": net.fifo_from, "nice_periods": [list(x) for x in net.nice_periods],
            "crashes": [list(c) for c in self.crashes], "params": self.params.to_json(),
            "leadership": {"provider": self.leadership.provider,
                           "final_holder": self.leadership.final_holder,
                           "final_start": self.leadership.final_start},
            "analysis": {"warmup": self.warmup, "slack": self.slack,
                         "nice_margin": self.nice_margin, "liveness": self.analysis.liveness,
                         "bounds": self.analysis.bounds},
        }


def validate(sc: Scenario) -> None:
    n = sc.n
    if n < 1:
        raise ConfigError("n must be >= 1")
    if sc.object not in REGISTRY:
        raise ConfigError(f"unknown object type {sc.object!r}; known: {sorted(REGISTRY)}")
    if sc.horizon <= 0:
        raise ConfigError("horizon must be positive")
    crashed = [p for p, _ in sc.crashes]
    for p, tm in sc.crashes:
        if not 0 <= p < n:
            raise ConfigError(f"crash of unknown process {p}")
        if tm < 0:
            raise ConfigError("crash times must be >= 0")
        if tm > sc.network.gst:
            raise ConfigError(f"crash of p{p} at {tm} is after gst={sc.network.gst}")
    if len(set(crashed)) != len(crashed):
        raise ConfigError("a process may crash at most once")
    if not 2 * len(crashed) < n:
        raise ConfigError(f"majority-correct violated: {len(crashed)} crashes with n={n} "
                          "(fewer than n/2 may crash)")
    net = sc.network
    if net.delta < 1 or net.delta_star < 1:
        raise ConfigError("delta and delta_star must be >= 1")
    if net.delta_star > net.delta:
        raise ConfigError("delta_star <= delta violated")
    if net.min_delay < 1 or net.min_delay > net.delta_star:
        raise ConfigError("min_delay must be in [1, delta_star]")
    if net.policy not in ("uniform", "max"):
        raise ConfigError("network policy must be 'uniform' or 'max'")
    if net.pre_max < net.min_delay:
        raise ConfigError("pre_gst max_delay must be >= min_delay")
    if not 0 <= net.pre_gst_loss < 1:
        raise ConfigError("pre_gst loss must be in [0, 1)")
    if net.fifo_from < net.gst:
        raise ConfigError("fifo_after must be >= gst")
    for a, b in net.nice_periods:
        if not net.gst <= a < b:
            raise ConfigError(f"nice period {(a, b)} must satisfy gst <= start < end")
    for r in net.rules:
        if r.drop and r.end > net.gst:
            raise ConfigError(f"rule {r} drops messages after gst")
        if r.delay is not None:
            if r.delay < net.min_delay:
                raise ConfigError(f"rule {r} delay below min_delay")
            if r.end > net.gst and r.delay > net.delta:
                raise ConfigError(f"rule {r} exceeds delta after gst")
            for a, b in net.nice_periods:
                if r.start <= b and r.end > a and r.delay > net.delta_star:
                    raise ConfigError(f"rule {r} exceeds delta_star inside nice period {(a, b)}")
    if len(sc.offsets) != n:
        raise ConfigError("clock offsets must list one integer per process")
    if sc.epsilon < 0:
        raise ConfigError("epsilon must be >= 0")
    if max(sc.offsets) - min(sc.offsets) > sc.epsilon:
        raise ConfigError("clock offsets differ by more than epsilon")
    if sc.params.epsilon != sc.epsilon:
        raise ConfigError("params.epsilon must equal clocks.epsilon")
    ld = sc.leadership
    if ld.provider not in ("arbiter", "heartbeat"):
        raise ConfigError("leadership provider must be 'arbiter' or 'heartbeat'")
    if ld.provider == "arbiter":
        if ld.final_holder in crashed or not 0 <= ld.final_holder < n:
            raise ConfigError("final leader must be a correct process")
        for h, s, e in ld.segments:
            if not 0 <= h < n or s > e:
                raise ConfigError(f"bad leadership segment {(h, s, e)}")
        spans = sorted([(s, e) for _, s, e in ld.segments] + [(ld.final_start, INF)])
        for (a, b), (c, d) in zip(spans, spans[1:]):
            if not b < c:
                raise ConfigError(f"leadership segments {(a, b)} and {(c, d)} intersect")
    for p, tm, kind in sc.workload.ops:
        if not 0 <= p < n:
            raise ConfigError(f"workload op for unknown process {p}")
        REGISTRY[sc.object].is_read(tuple(kind))
    for g in sc.workload.generators:
        if g.type not in ("closed_loop", "periodic"):
            raise ConfigError(f"unknown generator type {g.type!r}")
        if not 0 <= g.proc < n:
            raise ConfigError(f"generator for unknown process {g.proc}")
        if g.type == "periodic" and g.period < 1:
            raise ConfigError("periodic generator needs period >= 1")


# -- YAML loading -------------------------------------------------------------

TOP_KEYS = {"schema", "name", "n", "seed", "horizon", "object", "network", "clocks", "params",
            "leadership", "crashes", "workload", "analysis", "mutations"}
NET_KEYS = {"delta", "delta_star", "gst", "fifo_after", "min_delay", "policy", "pre_gst",
            "nice_periods", "rules"}


def _only(d: dict, keys: set, where: str) -> None:
    extra = set(d) - keys
    if extra:
        raise ConfigError(f"unknown keys in {where}: {sorted(extra)}")


def _inf(x) -> float:
    return INF if x is None or x == "inf" else x


def from_dict(d: dict, seed: int | None = None) -> Scenario:
    if not isinstance(d, dict):
        raise ConfigError("scenario must be a mapping")
    _only(d, TOP_KEYS, "scenario")
    if d.get("schema", SCHEMA) != SCHEMA:
        raise ConfigError(f"unsupported schema {d.get('schema')!r}; expected {SCHEMA}")
    try:
        n = int(d["n"])
    except KeyError:
        raise ConfigError("scenario needs n") from None
    nd = dict(d.get("network") or {})
    _only(nd, NET_KEYS, "network")
    pre = dict(nd.pop("pre_gst", None) or {})
    _only(pre, {"max_delay", "loss"}, "network.pre_gst")
    rules = []
    for r in nd.pop("rules", None) or []:
        r = dict(r)
        _only(r, {"src", "dst", "kinds", "start", "end", "delay", "drop"}, "network.rules")
        if "kinds" in r and r["kinds"] is not None:
            r["kinds"] = tuple(r["kinds"])
        r["end"] = _inf(r.get("end"))
        rules.append(LinkRule(**r))
    net = NetworkConfig(
        rules=tuple(rules),
        nice_periods=tuple(tuple(x) for x in nd.pop("nice_periods", None) or ()),
        pre_gst_max_delay=pre.get("max_delay"),
        pre_gst_loss=pre.get("loss", 0.2),
        **nd)
    cd = dict(d.get("clocks") or {})
    _only(cd, {"epsilon", "offsets"}, "clocks")
    eps = int(cd.get("epsilon", 0))
    offsets = tuple(cd.get("offsets") or [0] * n)
    pd = dict(d.get("params") or {})
    pd.setdefault("delta", net.delta)
    pd.setdefault("epsilon", eps)
    if d.get("mutations"):
        pd["mutations"] = list(d["mutations"])
    params = ProtocolParams.from_json(pd)
    ld = dict(d.get("leadership") or {})
    _only(ld, {"provider", "segments", "final", "timeout", "period"}, "leadership")
    final = dict(ld.get("final") or {})
    _only(final, {"holder", "start"}, "leadership.final")
    leadership = LeadershipConfig(
        provider=ld.get("provider", "arbiter"),
        segments=tuple(tuple(s) for s in ld.get("segments") or ()),
        final_holder=final.get("holder", 0), final_start=final.get("start", 0),
        timeout=ld.get("timeout"), period=ld.get("period"))
    wd = dict(d.get("workload") or {})
    _only(wd, {"ops", "generators"}, "workload")
    ops = []
    for o in wd.get("ops") or []:
        _only(o, {"proc", "at", "op"}, "workload.ops")
        ops.append((int(o["proc"]), int(o["at"]), tuple(o["op"])))
    gens = []
    for g in wd.get("generators") or []:
        g = dict(g)
        _only(g, {"type", "proc", "start", "stop", "mix", "think", "period", "max_ops"},
              "workload.generators")
        g["mix"] = tuple(sorted(dict(g["mix"]).items()))
        gens.append(Generator(**g))
    ad = dict(d.get("analysis") or {})
    _only(ad, {"warmup", "slack", "nice_margin", "liveness", "bounds"}, "analysis")
    try:
        return Scenario(
            name=str(d.get("name", "unnamed")), n=n,
            seed=int(d.get("seed", 0) if seed is None else seed),
            horizon=int(d["horizon"]), object=d.get("object", "counter"),
            network=net, epsilon=eps, offsets=offsets, params=params, leadership=leadership,
            crashes=tuple(tuple(c) for c in d.get("crashes") or ()),
            workload=Workload(tuple(ops), tuple(gens)), analysis=AnalysisConfig(**ad),
            raw=copy.deepcopy(d))
    except KeyError as e:
        raise ConfigError(f"scenario missing required key {e}") from None
    except TypeError as e:
        raise ConfigError(str(e)) from None


def load(path: str | Path, seed: int | None = None) -> Scenario:
    with open(path) as f:
        d = yaml.safe_load(f)
    return from_dict(d, seed=seed)


def loads(text: str, seed: int | None = None) -> Scenario:
    return from_dict(yaml.safe_load(text), seed=seed)
