"""Trace records and their JSON-lines encoding.

The first line is a header tagged ``leasereads-trace/1`` that embeds the
scenario summary. Every following line is one record with ``kind``,
``real``, ``proc``, ``local`` and ``seq`` plus a kind-specific payload.
Records are totally ordered by ``seq``, which increases with real time.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

TRACE_SCHEMA = "leasereads-trace/1"


class TraceFormatError(ValueError):
    """A trace file is malformed."""


def _dump(rec: dict) -> str:
    return json.dumps(rec, separators=(",", ":"))


@dataclass
class Trace:
    header: dict
    records: list[dict] = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def add(self, kind: str, real: int, proc: int | None, local: int | None, **payload) -> dict:
        rec = {"kind": kind, "real": real, "proc": proc, "local": local, "seq": len(self.records)}
        rec.update(payload)
        self.records.append(rec)
        return rec

    def of_kind(self, *kinds: str) -> Iterator[dict]:
        ks = set(kinds)
        return (r for r in self.records if r["kind"] in ks)

    def body_lines(self) -> list[str]:
        return [_dump(r) for r in self.records]

    def to_jsonl(self) -> str:
        head = {"kind": "header", "schema": TRACE_SCHEMA, **self.header}
        lines = [_dump(head)] + self.body_lines()
        if self.summary:
            lines.append(_dump({"kind": "summary", **self.summary}))
        return "\n".join(lines) + "\n"

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl())

    @classmethod
    def from_jsonl(cls, text: str) -> "Trace":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise TraceFormatError("empty trace")
        try:
            recs = [json.loads(ln) for ln in lines]
        except json.JSONDecodeError as e:
            raise TraceFormatError(f"invalid JSON in trace: {e}") from None
        head = recs[0]
        if head.get("kind") != "header" or head.get("schema") != TRACE_SCHEMA:
            raise TraceFormatError(f"first record must be a {TRACE_SCHEMA} header")
        header = {k: v for k, v in head.items() if k not in ("kind", "schema")}
        body, summary = [], {}
        for i, r in enumerate(recs[1:]):
            if not isinstance(r, dict) or "kind" not in r:
                raise TraceFormatError(f"record {i + 1} has no kind")
            if r["kind"] == "summary":
                summary = {k: v for k, v in r.items() if k != "kind"}
                continue
            for key in ("real", "proc", "local", "seq"):
                if key not in r:
                    raise TraceFormatError(f"record {i + 1} lacks {key!r}")
            body.append(r)
        for i, r in enumerate(body):
            if r["seq"] != i:
                raise TraceFormatError(f"record sequence broken at {i}")
        return cls(header, body, summary)

    @classmethod
    def read(cls, path: str | Path) -> "Trace":
        return cls.from_jsonl(Path(path).read_text())
