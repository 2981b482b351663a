from __future__ import annotations

import pytest
from hypothesis import strategies as st

from summoning import graph as G
from summoning.graph import CausalGraph

ACCEPTANCE: list[tuple[str, bool, str]] = []


@st.composite
def causal_graphs(draw, min_n: int = 1, max_n: int = 5, bidirected: bool = False) -> CausalGraph:
    n = draw(st.integers(min_n, max_n))
    top = G.BOTH if bidirected else G.BWD
    states = draw(st.lists(st.integers(0, top), min_size=len(G.pairs(n)), max_size=len(G.pairs(n))))
    return CausalGraph.from_pair_states(n, states)


@st.composite
def tournaments(draw, min_n: int = 1, max_n: int = 5) -> CausalGraph:
    n = draw(st.integers(min_n, max_n))
    states = draw(st.lists(st.sampled_from([G.FWD, G.BWD]), min_size=len(G.pairs(n)), max_size=len(G.pairs(n))))
    return CausalGraph.from_pair_states(n, states)


@pytest.fixture
def record_acceptance():
    def record(name: str, ok: bool, detail: str = "") -> None:
        ACCEPTANCE.append((name, ok, detail))

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else ""))
