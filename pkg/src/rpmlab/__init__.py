"""Exact enumeration of the random path model for O(N) spins, with switching
lemma and Griffiths-inequality checks."""

from __future__ import annotations

from .config import LinkConfig, ParitySpec, enumerate_configs, in_F, in_parity_class
from .graph import EXTERNAL, Graph, GhostGraph, attach_ghosts, build_graph, load_graph
from .measure import (
    FREE,
    PLUS,
    ModelParams,
    converge,
    correlation,
    first_description_sum,
    partition_sum,
    vertex_weight,
)
from .pairing import count_maximal_pairings, enumerate_maximal_pairings, trace_paths
from .switching import (
    derivative_check,
    griffiths_gap,
    inject,
    switching_sides,
    verify_injectivity,
    weight_identity_even,
    weight_identity_odd,
)

__all__ = [
    "EXTERNAL",
    "FREE",
    "PLUS",
    "Graph",
    "GhostGraph",
    "LinkConfig",
    "ModelParams",
    "ParitySpec",
    "attach_ghosts",
    "build_graph",
    "converge",
    "correlation",
    "count_maximal_pairings",
    "derivative_check",
    "enumerate_configs",
    "enumerate_maximal_pairings",
    "first_description_sum",
    "griffiths_gap",
    "in_F",
    "in_parity_class",
    "inject",
    "load_graph",
    "partition_sum",
    "switching_sides",
    "trace_paths",
    "verify_injectivity",
    "vertex_weight",
    "weight_identity_even",
    "weight_identity_odd",
]
