"""The two blocking-time comparison tables: parameter columns, theory cells, CSV output.

Each column is a parameter setting written in terms of delta and delta_star.
Run summaries are matched to a column by their parameters; the measured cell
is the largest maximum over all matching summaries.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

from .bounds import BoundError, BoundQuery, theoretical_bound

ROWS = (("stable", "rmw"), ("stable", "read"), ("nice", "rmw"), ("nice", "read"))
NO_DATA = "no data"


@dataclass(frozen=True)
class Column:
    key: str
    label: str
    algorithm: int | str
    alpha: Callable[[int, int], int]
    beta: Callable[[int, int], float]
    symbolic: tuple[str, str, str, str]  # cells in ROWS order

    def params(self, delta: int, delta_star: int) -> tuple[int | str, int, float]:
        return self.algorithm, self.alpha(delta, delta_star), self.beta(delta, delta_star)

    def matches(self, p: dict) -> bool:
        d, ds = p["delta"], p["delta_star"]
        beta = math.inf if p.get("beta") is None else p["beta"]
        return (p.get("epsilon", 0) == 0
                and (p["algorithm"], p["alpha"], beta) == self.params(d, ds))

    def theory(self, delta: int, delta_star: int) -> list[int | None]:
        alg, a, b = self.params(delta, delta_star)
        out = []
        for period, op in ROWS:
            try:
                out.append(theoretical_bound(BoundQuery(alg, period, op, a, b, delta, delta_star)))
            except BoundError:
                out.append(None)
        return out


def _inf(d: int, ds: int) -> float:
    return math.inf


COLUMNS = {c.key: c for c in (
    Column("cht", "CHT", "cht", lambda d, ds: 0, _inf,
           ("2δ", "3δ", "2δ*", "3δ*")),
    Column("alg1-alpha2d", "Alg. 1 α = 2δ", 1, lambda d, ds: 2 * d, _inf,
           ("2δ", "δ", "2δ", "0")),
    Column("alg2-ab2ds", "Alg. 2 α = β = 2δ*", 2, lambda d, ds: 2 * ds, lambda d, ds: 2 * ds,
           ("2δ", "δ", "2δ*", "δ*")),
    Column("alg1-alpha3d", "Alg. 1 α = 3δ", 1, lambda d, ds: 3 * d, _inf,
           ("3δ", "0", "3δ", "0")),
    Column("alg2-ab3ds", "Alg. 2 α = β = 3δ*", 2, lambda d, ds: 3 * ds, lambda d, ds: 3 * ds,
           ("2δ", "δ", "3δ*", "0")),
    Column("alg2-a-d3ds-b3ds", "Alg. 2 α = δ + 3δ*, β = 3δ*", 2, lambda d, ds: d + 3 * ds,
           lambda d, ds: 3 * ds, ("3δ", "0", "δ + 3δ*", "0")),
)}

TABLES = {
    "table1": ("cht", "alg1-alpha2d", "alg2-ab2ds"),
    "table2": ("cht", "alg1-alpha3d", "alg2-ab3ds", "alg2-a-d3ds-b3ds"),
}


def match_column(params: dict, keys: Iterable[str] | None = None) -> str | None:
    for k in keys or COLUMNS:
        if COLUMNS[k].matches(params):
            return k
    return None


@dataclass
class Cell:
    symbolic: str
    theory: int | None
    measured: int | None
    count: int

    @property
    def within(self) -> bool | None:
        if self.measured is None or self.theory is None:
            return None
        return self.measured <= self.theory


@dataclass
class Table:
    name: str
    columns: tuple[str, ...]
    delta: int | None
    delta_star: int | None
    cells: dict[tuple[str, str, str], Cell]  # (column, period, op)

    @property
    def ok(self) -> bool:
        return all(c.within is not False for c in self.cells.values())

    def missing(self) -> list[tuple[str, str, str]]:
        return [k for k, c in self.cells.items() if c.measured is None]

    def csv_rows(self) -> list[list[str]]:
        head = ["period", "op"]
        for k in self.columns:
            lab = COLUMNS[k].label
            head += [f"{lab} (formula)", f"{lab} (bound)", f"{lab} (measured)"]
        rows = [head]
        for period, op in ROWS:
            row = [period, op]
            for k in self.columns:
                c = self.cells[(k, period, op)]
                row += [c.symbolic, "" if c.theory is None else str(c.theory),
                        NO_DATA if c.measured is None else str(c.measured)]
            rows.append(row)
        return rows

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as f:
            csv.writer(f).writerows(self.csv_rows())


def build_table(name: str, summaries: Iterable[dict]) -> Table:
    """Aggregate run summaries (``report.summarize`` output) into one table."""
    keys = TABLES[name]
    measured: dict[tuple[str, str, str], int] = {}
    counts: dict[tuple[str, str, str], int] = {}
    delta = delta_star = None
    for s in summaries:
        p = s["params"]
        k = match_column(p, keys)
        if k is None:
            continue
        if delta is None:
            delta, delta_star = p["delta"], p["delta_star"]
        elif (delta, delta_star) != (p["delta"], p["delta_star"]):
            raise ValueError("summaries mix different (delta, delta_star) settings: "
                             f"{(delta, delta_star)} and {(p['delta'], p['delta_star'])}")
        for period, op in ROWS:
            m = s["maxima"].get(f"{period}/{op}")
            cell = (k, period, op)
            counts[cell] = counts.get(cell, 0) + s["counts"].get(f"{period}/{op}", 0)
            if m is not None:
                measured[cell] = max(measured.get(cell, m), m)
    cells = {}
    for k in keys:
        col = COLUMNS[k]
        theory = col.theory(delta, delta_star) if delta is not None else [None] * len(ROWS)
        for i, (period, op) in enumerate(ROWS):
            cell = (k, period, op)
            cells[cell] = Cell(col.symbolic[i], theory[i], measured.get(cell), counts.get(cell, 0))
    return Table(name, keys, delta, delta_star, cells)
