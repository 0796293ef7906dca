"""One-page run summaries shared by the command line, sweeps and tables."""

from __future__ import annotations

from collections import Counter

from ..sim.trace import Trace
from .bounds import check_bounds
from .history import TraceView, extract_history
from .linearizability import DEFAULT_CAP, check_linearizable
from .safety import check_safety


def params_key(view: TraceView) -> dict:
    p = view.params
    return {"algorithm": p.algorithm, "alpha": p.alpha,
            "beta": None if p.beta == float("inf") else p.beta,
            "delta": view.delta, "delta_star": view.delta_star, "epsilon": view.epsilon}


def summarize(trace: Trace, strict_bounds: bool = False, cap: int = DEFAULT_CAP,
              linearizability: bool = True) -> dict:
    """Op counts, blocking maxima, message counts and check verdicts of one run."""
    view = TraceView(trace)
    hist = extract_history(trace)
    ops = Counter()
    for r in hist.records:
        ops[("read" if r.read else "rmw", "complete" if r.complete else "pending")] += 1
    safety = check_safety(trace)
    bounds = check_bounds(trace, strict=strict_bounds)
    out = {
        "name": trace.header.get("name"),
        "seed": trace.header.get("seed"),
        "params": params_key(view),
        "ops": {f"{k}/{s}": v for (k, s), v in sorted(ops.items())},
        "messages": trace.summary.get("messages"),
        "messages_by_kind": trace.summary.get("by_kind"),
        "stabilization": bounds.blocking.stabilization,
        "maxima": {f"{r.period}/{r.op}": r.measured for r in bounds.rows},
        "counts": {f"{r.period}/{r.op}": r.count for r in bounds.rows},
        "bounds": [r.to_json() for r in bounds.rows],
        "bounds_ok": bounds.ok,
        "safety_ok": safety.ok,
        "liveness_ok": safety.category_ok("liveness"),
        "safety_failures": [c.to_json() for c in safety.failures],
    }
    if linearizability:
        lin = check_linearizable(trace, cap)
        out["linearizable"] = lin.ok
        out["brute_force_checked"] = lin.brute_force is not None
    return out
