"""Turn an achievability plan into a runnable program."""

from __future__ import annotations

from ..achievability import Plan
from ..graph import CausalGraph
from . import builders
from .ir import Program, Unsupported

BUILDERS = {
    "single-system": builders.build_single_system,
    "rails": builders.build_rails,
    "rails-open-pair": builders.build_rails_open_pair,
    "label-parallel": builders.build_label_parallel,
    "label-open-pair": builders.build_label_open_pair,
    "global-two-sources": builders.build_global_two_sources,
    "square": builders.build_square,
    "entanglement-s-set": builders.build_entanglement_s_set,
    "entanglement-bidirected-pair": builders.build_ent_bidirected_pair,
    "entanglement-global": builders.build_ent_global,
}


def build_plan(plan: Plan, graph: CausalGraph) -> Program:
    """Program for ``plan``, wrapped for a late start point when the plan asks for it.

    ``graph`` is the task graph; the builder runs on the plan's spanning subgraph.
    """
    try:
        make = BUILDERS[plan.builder]
    except KeyError:
        raise Unsupported(f"no builder named {plan.builder!r}") from None
    program = make(plan.graph)
    if plan.late_start:
        program = builders.relax_start_point(program, graph)
    return program
