"""Replicated object types, operations and the read/RMW conflict relation.

An object type is a deterministic transition function over a state domain.
Operation kinds are tuples ``(name, *args)`` so they serialize cleanly into
traces and scenario files, e.g. ``("read",)``, ``("write", 3)``,
``("cas", 0, 1)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Iterable

OpKind = tuple
State = Hashable

NOOP: OpKind = ("noop",)
ACK = "ack"


class UnknownOperation(TypeError):
    """Raised when an operation kind is not part of an object type."""


@dataclass(frozen=True, order=True)
class Operation:
    """An operation instance: a kind plus a globally unique id ``(issuer, counter)``.

    Ordering is lexicographic on ``(issuer, counter)``; ``kind`` only breaks
    ties between equal ids, which never happens for distinct operations.
    """

    issuer: int
    counter: int
    kind: OpKind = field(compare=True)

    @property
    def id(self) -> tuple[int, int]:
        return (self.issuer, self.counter)

    def to_json(self) -> list:
        return [self.issuer, self.counter, list(self.kind)]

    @classmethod
    def from_json(cls, data: list) -> "Operation":
        issuer, counter, kind = data
        return cls(issuer, counter, tuple(kind))

    def __repr__(self) -> str:
        args = ",".join(map(str, self.kind[1:]))
        return f"{self.kind[0]}({args})@p{self.issuer}.{self.counter}"


def op_order(a: Operation, b: Operation) -> int:
    """Three-way comparison of operation ids: -1, 0 or 1."""
    if a.id < b.id:
        return -1
    if a.id > b.id:
        return 1
    return 0


@dataclass(frozen=True)
class ObjectType:
    """A sequential object specification.

    ``transition`` maps ``(state, kind)`` to ``(state, response)``;
    ``read_names`` lists the kinds that never change state; ``declared_conflict``
    answers whether a read kind conflicts with an RMW kind; ``sample_kinds``
    enumerates representative kinds for brute-force checks.
    """

    name: str
    initial: State
    transition: Callable[[State, OpKind], tuple[State, Any]]
    read_names: frozenset[str]
    rmw_names: frozenset[str]
    declared_conflict: Callable[[OpKind, OpKind], bool]
    sample_kinds: tuple[OpKind, ...]
    finite_states: tuple[State, ...] | None = None

    def is_read(self, kind: OpKind) -> bool:
        self._check(kind)
        return kind[0] in self.read_names

    def _check(self, kind: OpKind) -> None:
        if not isinstance(kind, tuple) or not kind:
            raise UnknownOperation(f"malformed operation kind {kind!r}")
        if kind[0] not in self.read_names and kind[0] not in self.rmw_names:
            raise UnknownOperation(f"{self.name} has no operation {kind[0]!r}")

    def apply(self, state: State, kind: OpKind) -> tuple[State, Any]:
        self._check(kind)
        if kind == NOOP:
            return state, ACK
        return self.transition(state, kind)

    def conflicts(self, read_kind: OpKind, rmw_kind: OpKind) -> bool:
        if not self.is_read(read_kind):
            raise UnknownOperation(f"{read_kind!r} is not a read")
        if self.is_read(rmw_kind):
            raise UnknownOperation(f"{rmw_kind!r} is not an RMW")
        if rmw_kind == NOOP:
            return False
        return self.declared_conflict(read_kind, rmw_kind)

    def validation_states(self, depth: int = 4) -> list[State]:
        """The finite state domain used to validate conflicts and read purity.

        Finite objects use their whole domain; unbounded ones use the states
        reachable from the initial state within ``depth`` sample RMWs.
        """
        if self.finite_states is not None:
            return list(self.finite_states)
        seen = [self.initial]
        frontier = [self.initial]
        rmws = [k for k in self.sample_kinds if not self.is_read(k)]
        for _ in range(depth):
            nxt = []
            for s in frontier:
                for k in rmws:
                    s2, _ = self.apply(s, k)
                    if s2 not in seen:
                        seen.append(s2)
                        nxt.append(s2)
            frontier = nxt
        return seen


def brute_force_conflict(obj: ObjectType, read_kind: OpKind, rmw_kind: OpKind,
                         states: Iterable[State] | None = None) -> bool:
    """A read conflicts with an RMW iff some state makes its value depend on their order."""
    for s in states if states is not None else obj.validation_states():
        _, before = obj.apply(s, read_kind)
        s2, _ = obj.apply(s, rmw_kind)
        _, after = obj.apply(s2, read_kind)
        if before != after:
            return True
    return False


# -- built-in object types -------------------------------------------------

REGISTER_VALUES = (0, 1)


def _register(state, kind):
    if kind[0] == "read":
        return state, state
    return kind[1], ACK


REGISTER = ObjectType(
    name="register",
    initial=0,
    transition=_register,
    read_names=frozenset({"read"}),
    rmw_names=frozenset({"write", "noop"}),
    declared_conflict=lambda r, w: True,
    sample_kinds=(("read",), ("write", 0), ("write", 1), NOOP),
    finite_states=REGISTER_VALUES,
)


def _counter(state, kind):
    if kind[0] == "read":
        return state, state
    if kind[0] == "inc":
        return state + 1, state
    if kind[0] == "add":
        return state + kind[1], state
    raise UnknownOperation(kind)


COUNTER = ObjectType(
    name="counter",
    initial=0,
    transition=_counter,
    read_names=frozenset({"read"}),
    rmw_names=frozenset({"inc", "add", "noop"}),
    declared_conflict=lambda r, w: w[0] == "inc" or (w[0] == "add" and w[1] != 0),
    sample_kinds=(("read",), ("inc",), ("add", 0), ("add", 2), NOOP),
)

CAS_VALUES = (0, 1, 2)


def _cas(state, kind):
    if kind[0] == "read":
        return state, state
    _, expected, new = kind
    if state == expected:
        return new, True
    return state, False


CAS = ObjectType(
    name="cas",
    initial=0,
    transition=_cas,
    read_names=frozenset({"read"}),
    rmw_names=frozenset({"cas", "noop"}),
    declared_conflict=lambda r, w: w[1] != w[2],
    sample_kinds=(("read",),) + tuple(
        ("cas", a, b) for a, b in itertools.product(CAS_VALUES, repeat=2)) + (NOOP,),
    finite_states=CAS_VALUES,
)

REGISTRY: dict[str, ObjectType] = {o.name: o for o in (REGISTER, COUNTER, CAS)}


def get_object_type(name: str) -> ObjectType:
    try:
        return REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown object type {name!r}; known: {sorted(REGISTRY)}") from None


def apply(obj: ObjectType, state: State, kind: OpKind) -> tuple[State, Any]:
    return obj.apply(state, kind)


def conflicts(obj: ObjectType, read_kind: OpKind, rmw_kind: OpKind) -> bool:
    return obj.conflicts(read_kind, rmw_kind)
