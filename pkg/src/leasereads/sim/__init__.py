from .engine import Simulator, run
from .scenario import Scenario, load, loads, from_dict
from .trace import Trace

__all__ = ["Simulator", "run", "Scenario", "load", "loads", "from_dict", "Trace"]
