import os

import pytest
from hypothesis import HealthCheck, settings

from multitree import GraphState

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=15,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def perfect_tree(levels, cap=2):
    """Single-color perfect binary tree on 2**(levels+1)-1 nodes, heap-numbered."""
    n = 2 ** (levels + 1) - 1
    links = [(1, (v // 2), v) for v in range(2, n + 1)]
    return GraphState.from_links(n, 1, 1, [cap] * n, links)


@pytest.fixture
def chain():
    # 1 -> 5 -> 9 in color 1
    return GraphState.from_links(10, 1, 1, [2] * 10, [(1, 1, 5), (1, 5, 9)])


@pytest.fixture
def double_tree():
    # two spanning trees on 7 nodes; every node holds both colors
    links = [(1, 1, 2), (1, 1, 3), (1, 2, 4), (1, 2, 5), (1, 3, 6), (1, 3, 7),
             (2, 2, 1), (2, 2, 6), (2, 6, 3), (2, 6, 4), (2, 1, 5), (2, 1, 7)]
    return GraphState.from_links(7, 2, 2, [4] * 7, links)
