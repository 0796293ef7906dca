"""Protocol parameters and their validity conditions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

INF = math.inf

ALGORITHMS = (1, 2, "cht")

# fault injections used only to validate the checkers
MUTATIONS = frozenset({
    "ignore_promise_wait",     # reads/RMWs skip the promise wait
    "no_lease_expiry_wait",    # leader never waits for unresponsive leaseholders
    "no_epsilon_correction",   # extra-epsilon waits dropped
    "weak_quorum",             # leader commits without any acknowledgement
})


class ConfigError(ValueError):
    """A configuration violates a documented constraint."""


@dataclass(frozen=True)
class ProtocolParams:
    """Timing parameters, all in integer clock ticks.

    ``beta = inf`` means no status rounds. ``algorithm="cht"`` is the
    promise-free baseline and requires ``alpha = 0``.
    """

    algorithm: int | str = 1
    alpha: int = 0
    beta: float = INF
    lam: int = 40
    renew: int = 5
    epsilon: int = 0
    delta: int = 4
    retx: int | None = None
    strict_figure1: bool = False
    strict_figure2: bool = False
    skip_read_promise_wait: bool = False
    alpha0: int = 0
    mutations: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.retx is None:
            object.__setattr__(self, "retx", max(1, self.delta // 2))
        object.__setattr__(self, "mutations", frozenset(self.mutations))
        self.validate()

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        for name in ("alpha", "lam", "renew", "epsilon", "delta", "retx", "alpha0"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool):
                raise ConfigError(f"{name} must be an integer number of ticks, got {v!r}")
        if self.alpha < 0:
            raise ConfigError("alpha must be finite and >= 0")
        if self.epsilon < 0 or self.alpha0 < 0:
            raise ConfigError("epsilon and alpha0 must be >= 0")
        if self.delta < 1 or self.retx < 1:
            raise ConfigError("delta and retx must be >= 1")
        if self.lam <= 0:
            raise ConfigError("lambda must be positive and finite")
        floor = 3 * self.delta + self.alpha0
        if not self.lam > floor:
            raise ConfigError(f"lambda > 3*delta + alpha0 violated: lambda={self.lam}, "
                              f"3*delta+alpha0={floor}")
        if not 0 < self.renew < self.lam - floor:
            raise ConfigError(f"0 < R < lambda - (3*delta + alpha0) violated: R={self.renew}, "
                              f"lambda-(3*delta+alpha0)={self.lam - floor}")
        if self.beta != INF and (not isinstance(self.beta, int) or self.beta < 1):
            raise ConfigError("beta must be an integer >= 1 or infinity")
        if self.algorithm == "cht" and self.alpha != 0:
            raise ConfigError("the cht baseline requires alpha = 0")
        if self.algorithm != 2 and self.beta != INF:
            raise ConfigError("beta is only meaningful for algorithm 2")
        if self.strict_figure1 and self.epsilon != 0:
            raise ConfigError("strict_figure1 requires epsilon = 0")
        unknown = self.mutations - MUTATIONS
        if unknown:
            raise ConfigError(f"unknown mutations {sorted(unknown)}")

    def normalized(self) -> "ProtocolParams":
        """Algorithm 2 with an infinite status period is algorithm 1."""
        if self.algorithm == 2 and self.beta == INF:
            return replace(self, algorithm=1)
        return self

    @property
    def cht(self) -> bool:
        return self.algorithm == "cht"

    @property
    def eps_wait(self) -> int:
        return 0 if "no_epsilon_correction" in self.mutations else self.epsilon

    def to_json(self) -> dict:
        return {
            "algorithm": self.algorithm, "alpha": self.alpha,
            "beta": None if self.beta == INF else self.beta, "lambda": self.lam,
            "renew": self.renew, "epsilon": self.epsilon, "delta": self.delta,
            "retx": self.retx, "strict_figure1": self.strict_figure1,
            "strict_figure2": self.strict_figure2,
            "skip_read_promise_wait": self.skip_read_promise_wait, "alpha0": self.alpha0,
            "mutations": sorted(self.mutations),
        }

    @classmethod
    def from_json(cls, d: dict) -> "ProtocolParams":
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        beta = d.get("beta", None)
        d["beta"] = INF if beta is None or beta == "inf" else beta
        if "mutations" in d:
            d["mutations"] = frozenset(d["mutations"])
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown protocol parameters {sorted(extra)}")
        return cls(**d)
