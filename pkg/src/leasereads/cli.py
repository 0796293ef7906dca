"""Command line: run scenarios, check traces, sweep parameters, build the tables.

Exit codes: 0 when every check passes, 1 when some check fails, 2 for usage,
configuration or trace-format errors.
"""

from __future__ import annotations

import argparse
import ast
import copy
import itertools
import json
import math
import operator
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

import yaml

from .analysis.bounds import BoundError, BoundQuery, check_bounds, theoretical_bound
from .analysis.linearizability import DEFAULT_CAP, check_linearizable
from .analysis.report import summarize
from .analysis.safety import check_safety
from .analysis.tables import TABLES, build_table
from .protocol.params import ConfigError
from .sim import run as simulate
from .sim.scenario import from_dict
from .sim.trace import Trace, TraceFormatError

OK, FAILED, USAGE = 0, 1, 2
SEED_ENV = "LEASEREADS_SEED"
FLAG_PARAMS = ("strict_figure1", "strict_figure2", "skip_read_promise_wait")


class UsageError(Exception):
    pass


# -- scenario resolution ------------------------------------------------------


def packaged_scenarios() -> list[str]:
    root = resources.files("leasereads") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def read_scenario(arg: str) -> dict:
    """A scenario mapping from a file path or the name of a packaged scenario."""
    path = Path(arg)
    if path.exists():
        text = path.read_text()
    else:
        res = resources.files("leasereads") / "scenarios" / f"{arg}.yaml"
        if not res.is_file():
            raise UsageError(f"no scenario file or packaged scenario named {arg!r}")
        text = res.read_text()
    try:
        d = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"{arg}: invalid YAML: {e}") from None
    if not isinstance(d, dict):
        raise ConfigError(f"{arg}: scenario must be a mapping")
    return d


def seed_override(args) -> int | None:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return None


def apply_flags(d: dict, args) -> dict:
    d = copy.deepcopy(d)
    for name in FLAG_PARAMS:
        if getattr(args, name, False):
            d.setdefault("params", {})[name] = True
    return d


# -- grid expressions ---------------------------------------------------------

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.FloorDiv: operator.floordiv, ast.Div: operator.truediv}


def eval_expr(text: str, names: dict) -> float:
    """Evaluate an arithmetic expression over integers and the given names."""
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError:
        raise UsageError(f"bad grid expression {text!r}") from None

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, int):
            return node.value
        if isinstance(node, ast.Name):
            if node.id not in names:
                raise UsageError(f"unknown name {node.id!r} in {text!r}; known: {sorted(names)}")
            return names[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
            return -ev(node.operand)
        raise UsageError(f"unsupported syntax in grid expression {text!r}")

    v = ev(tree)
    if isinstance(v, float) and v != math.inf:
        if not v.is_integer():
            raise UsageError(f"{text!r} is not a whole number of ticks")
        v = int(v)
    return v


def _names(d: dict) -> dict:
    net = d.get("network") or {}
    p = d.get("params") or {}
    names = {"inf": math.inf, "delta": net.get("delta", 4),
             "delta_star": net.get("delta_star", 1)}
    for k in ("alpha", "beta", "lambda", "renew"):
        if k in p:
            names[k] = math.inf if p[k] in (None, "inf") else p[k]
    return names


def _set_path(d: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    cur = d
    for k in keys[:-1]:
        cur = cur.setdefault(k, {})
    cur[keys[-1]] = "inf" if value == math.inf else value


def parse_assign(item: str) -> tuple[str, str]:
    if "=" not in item:
        raise UsageError(f"expected key=value, got {item!r}")
    key, _, val = item.partition("=")
    return key.strip(), val


def expand_grid(template: dict, grid: list[str], sets: list[str]) -> list[tuple[dict, dict]]:
    """Scenario mappings for every grid cell, with the cell's assignments."""
    axes = []
    for item in grid:
        key, vals = parse_assign(item)
        exprs = [v for v in vals.split(",") if v.strip()]
        axes.append((key, exprs))
    if not axes or any(not ex for _, ex in axes):
        return []
    cells = []
    for combo in itertools.product(*[ex for _, ex in axes]):
        d = copy.deepcopy(template)
        cell = {}
        for (key, _), expr in zip(axes, combo):
            v = eval_expr(expr, _names(d))
            _set_path(d, key, v)
            cell[key] = v
        for item in sets:
            key, expr = parse_assign(item)
            v = eval_expr(expr, _names(d))
            _set_path(d, key, v)
            cell[key] = v
        cells.append((d, cell))
    return cells


def table_conditions(d: dict) -> None:
    """Reject cells outside the ranges where the closed-form bounds hold."""
    net = d.get("network") or {}
    p = d.get("params") or {}
    beta = p.get("beta")
    q = BoundQuery(p.get("algorithm", 1), "stable", "read", p.get("alpha", 0),
                   math.inf if beta in (None, "inf") else beta, net.get("delta", 4),
                   net.get("delta_star", 1), (d.get("clocks") or {}).get("epsilon", 0))
    theoretical_bound(q)


# -- commands -----------------------------------------------------------------


def _print_summary(s: dict, out=sys.stdout) -> None:
    print(f"scenario {s['name']} seed {s['seed']}", file=out)
    print(f"  params {json.dumps(s['params'])}", file=out)
    print(f"  ops {json.dumps(s['ops'])}  messages {s['messages']}", file=out)
    print(f"  stabilization at real {s['stabilization']}", file=out)
    for r in s["bounds"]:
        bound = "-" if r["bound"] is None else r["bound"]
        meas = "no data" if r["measured"] is None else r["measured"]
        print(f"  {r['period']:>6} {r['op']:<4} max {meas!s:>7}  bound {bound!s:>4}  "
              f"n={r['count']:<5} {r['status']}", file=out)
    print(f"  safety {'pass' if s['safety_ok'] else 'FAIL'}", file=out)
    for c in s["safety_failures"]:
        print(f"    {c['name']}: {c['detail']}", file=out)


def cmd_run(args) -> int:
    d = apply_flags(read_scenario(args.scenario), args)
    sc = from_dict(d, seed=seed_override(args))
    trace = simulate(sc)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{sc.name}-seed{sc.seed}"
    trace.write(out / f"{stem}.trace.jsonl")
    s = summarize(trace, linearizability=False)
    (out / f"{stem}.summary.json").write_text(json.dumps(s, indent=2) + "\n")
    _print_summary(s)
    print(f"  wrote {out / (stem + '.trace.jsonl')}")
    return OK if s["safety_ok"] else FAILED


def check_trace(trace: Trace, strict: bool, cap: int) -> dict:
    analysis = trace.header.get("analysis", {})
    safety = check_safety(trace)
    lin = check_linearizable(trace, cap)
    rep = {"name": trace.header.get("name"), "safety": safety.to_json(),
           "linearizability": lin.to_json()}
    ok = safety.ok and lin.ok
    if analysis.get("liveness", True):
        ok = ok and safety.category_ok("liveness")
    if analysis.get("bounds", True):
        b = check_bounds(trace, strict)
        rep["bounds"] = b.to_json()
        ok = ok and b.ok
    rep["ok"] = ok
    return rep


def cmd_check(args) -> int:
    worst = OK
    reports = []
    for path in args.traces:
        try:
            trace = Trace.read(path)
        except OSError as e:
            raise UsageError(str(e)) from None
        rep = check_trace(trace, args.strict_bounds, args.brute_force_cap)
        rep["trace"] = str(path)
        reports.append(rep)
        print(f"{path}: {'pass' if rep['ok'] else 'FAIL'}")
        for c in rep["safety"]["checks"]:
            if not c["passed"]:
                print(f"  {c['category']}/{c['name']}: {c['detail']}")
        lin = rep["linearizability"]
        if not lin["ok"]:
            for v in (lin["witness"], lin["brute_force"]):
                if v and not v["ok"]:
                    print(f"  linearizability/{v['checker']}: {v['reason']} {v['blocking']}")
        for r in rep.get("bounds", {}).get("rows", []):
            if r["status"] == "fail":
                print(f"  bounds/{r['period']}-{r['op']}: measured {r['measured']} > {r['bound']}")
        if not rep["ok"]:
            worst = FAILED
    if args.out:
        Path(args.out).write_text(json.dumps(reports, indent=2) + "\n")
    return worst


def _sweep_cell(job: tuple) -> dict:
    d, cell, seed, strict = job
    res = {"cell": cell, "seed": seed}
    try:
        table_conditions(d)
        sc = from_dict(d, seed=seed)
    except (BoundError, ConfigError) as e:
        res.update(status="invalid", error=str(e))
        return res
    trace = simulate(sc)
    s = summarize(trace, strict_bounds=strict, linearizability=False)
    res.update(summary=s, status="ok" if s["safety_ok"] and s["bounds_ok"] else "fail")
    return res


def _parse_seeds(item: str | None, default: int) -> list[int]:
    if not item:
        return [default]
    seeds = []
    for part in item.split(","):
        if "-" in part.strip()[1:]:
            a, b = part.split("-", 1)
            seeds.extend(range(int(a), int(b) + 1))
        elif part.strip():
            seeds.append(int(part))
    return seeds


def cmd_sweep(args) -> int:
    template = apply_flags(read_scenario(args.template), args)
    over = seed_override(args)
    seeds = _parse_seeds(args.seeds, over if over is not None else template.get("seed", 0))
    cells = expand_grid(template, args.grid or [], args.set or [])
    jobs = [(d, cell, s, args.strict_bounds) for d, cell in cells for s in seeds]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            results = list(ex.map(_sweep_cell, jobs))
    else:
        results = [_sweep_cell(j) for j in jobs]
    for r in results:
        cell = " ".join(f"{k}={v}" for k, v in r["cell"].items())
        if r["status"] == "invalid":
            print(f"[skipped] {cell} seed {r['seed']}: {r['error']}")
            continue
        m = r["summary"]["maxima"]
        cells = "  ".join(f"{k} {'-' if v is None else v}" for k, v in m.items())
        print(f"[{r['status']}] {cell} seed {r['seed']}: {cells}")
    out = {"template": args.template, "grid": args.grid or [], "set": args.set or [],
           "seeds": seeds, "results": results}
    if args.out:
        Path(args.out).write_text(json.dumps(out, indent=2) + "\n")
    return FAILED if any(r["status"] == "fail" for r in results) else OK


def _load_summaries(paths: list[str]) -> list[dict]:
    out = []
    for p in paths:
        path = Path(p)
        if not path.exists():
            raise UsageError(f"no such file {p}")
        if path.name.endswith(".jsonl"):
            out.append(summarize(Trace.read(path), linearizability=False))
            continue
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise UsageError(f"{p}: not JSON: {e}") from None
        if isinstance(data, dict) and "results" in data:
            out += [r["summary"] for r in data["results"] if "summary" in r]
        elif isinstance(data, dict) and "maxima" in data:
            out.append(data)
        else:
            raise UsageError(f"{p}: neither sweep results nor a run summary")
    return out


def cmd_table(args) -> int:
    summaries = _load_summaries(args.results)
    if args.curated:
        names = sorted({k for keys in TABLES.values() for k in keys})
        for name in names:
            sc = from_dict(read_scenario(name), seed=seed_override(args))
            summaries.append(summarize(simulate(sc), linearizability=False))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    status = OK
    for name in TABLES:
        table = build_table(name, summaries)
        table.write_csv(out / f"{name}.csv")
        print(f"{name} (delta={table.delta}, delta_star={table.delta_star}) -> {out / (name + '.csv')}")
        for row in table.csv_rows()[1:]:
            print("  " + " | ".join(row))
        if not table.ok:
            status = FAILED
    return status


# -- entry point --------------------------------------------------------------


def _add_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, help=f"override the scenario seed (also ${SEED_ENV})")
    p.add_argument("--strict-figure1", action="store_true",
                   help="unfiltered case-1 read rule (epsilon = 0 only)")
    p.add_argument("--strict-figure2", action="store_true",
                   help="stop status rounds at the first majority of acknowledgements")
    p.add_argument("--skip-read-promise-wait", action="store_true",
                   help="reads do not wait for the promise of the batch they read after")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="leasereads", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one scenario; write its trace and summary")
    p.add_argument("scenario", help="scenario file or packaged scenario name")
    p.add_argument("--out", default="out", help="output directory (default: out)")
    _add_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("check", help="audit trace files")
    p.add_argument("traces", nargs="+")
    p.add_argument("--strict-bounds", action="store_true",
                   help="require beta to divide 2*delta for algorithm 2 RMW bounds")
    p.add_argument("--brute-force-cap", type=int, default=DEFAULT_CAP,
                   help=f"largest history for the exhaustive checker (default {DEFAULT_CAP})")
    p.add_argument("--out", help="write the JSON report here")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("sweep", help="run a scenario template over a parameter grid")
    p.add_argument("template", help="scenario file or packaged scenario name")
    p.add_argument("--grid", action="append", metavar="KEY=EXPR,EXPR,...",
                   help="grid axis, e.g. params.alpha=0,delta,2*delta")
    p.add_argument("--set", action="append", metavar="KEY=EXPR",
                   help="per-cell assignment evaluated after the grid, e.g. params.alpha=beta")
    p.add_argument("--seeds", help="comma list or ranges, e.g. 1-5,9")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.add_argument("--strict-bounds", action="store_true")
    p.add_argument("--out", help="write the result matrix as JSON")
    _add_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("table", help="build the two comparison tables as CSV")
    p.add_argument("results", nargs="*",
                   help="sweep result files, run summaries or trace files")
    p.add_argument("--curated", action="store_true",
                   help="also run the packaged scenario of every table column")
    p.add_argument("--out", default="tables", help="output directory (default: tables)")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("list", help="list the packaged scenarios")
    p.set_defaults(func=lambda args: print("\n".join(packaged_scenarios())) or OK)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError, TraceFormatError) as e:
        print(f"error: {e}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
