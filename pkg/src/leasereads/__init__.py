"""Linearizable replicated objects with leases and promises, in a deterministic simulator."""

__version__ = "0.1.0"
