"""Summoning tasks on causal diamonds: graphs, achievability deciders, and a
causality-checked protocol engine on a qudit simulator."""

from .achievability import Status, Verdict, decide
from .graph import CausalGraph
from .task import Assistance, CallPattern, Kind, TaskSpec, load_task, parse_task

__all__ = ["Assistance", "CallPattern", "CausalGraph", "Kind", "Status", "TaskSpec", "Verdict", "decide",
           "load_task", "parse_task"]
