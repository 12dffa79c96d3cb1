"""Assisted indoor navigation over text-based topological maps.

The package wires a validated topological map, a constraint-aware route
planner, dual vector stores for place recognition, and an interactive
guidance agent into a deterministic simulated pipeline, a scenario CLI,
and a session service.
"""

__version__ = "0.1.0"
