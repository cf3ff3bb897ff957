"""Condition-based maintenance engine.

Simulated sensor-array telemetry, robust ingest, four condition-assessment
methods, P-F-interval inspection scheduling, maintenance-policy comparison,
append-only storage with deterministic replay, and an operator service.
"""

from ._kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
