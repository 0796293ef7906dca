from .bounds import BoundError, BoundQuery, check_bounds, status_economy, theoretical_bound
from .linearizability import check_brute_force, check_linearizable, check_witness
from .report import summarize
from .safety import check_safety
from .tables import build_table

__all__ = ["BoundError", "BoundQuery", "check_bounds", "status_economy", "theoretical_bound",
           "check_brute_force", "check_linearizable", "check_witness", "summarize",
           "check_safety", "build_table"]
