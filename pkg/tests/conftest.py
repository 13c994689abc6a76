from __future__ import annotations

import itertools
from pathlib import Path

import pytest

from byznet.graph import Topology

REPO_ROOT = Path(__file__).resolve().parent.parent
GRAPHS_DIR = REPO_ROOT / "graphs"

# 5-connected 7-node fixture (the sparsest one): K7 minus a perfect matching
# on six of the nodes. Used for every f=2 sweep.
K7_MINUS_MATCHING_EDGES = frozenset(
    itertools.combinations(range(7), 2)
) - {(1, 2), (3, 4), (5, 6)}


@pytest.fixture(scope="session")
def k7_minus_matching() -> Topology:
    return Topology.from_edges(7, K7_MINUS_MATCHING_EDGES)


@pytest.fixture(scope="session")
def k7_graph_file() -> str:
    path = GRAPHS_DIR / "k7_minus_matching.txt"
    assert path.exists(), "fixture graph file missing from graphs/"
    return str(path)
