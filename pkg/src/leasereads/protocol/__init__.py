from .messages import Batch, Lease, lease_compare
from .params import ConfigError, ProtocolParams
from .process import Process

__all__ = ["Batch", "Lease", "lease_compare", "ConfigError", "ProtocolParams", "Process"]
