import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from nldgraph.graph_core import load_corpus_graph  # noqa: E402


@pytest.fixture(scope="session")
def star():
    return load_corpus_graph("three_star")


@pytest.fixture(scope="session")
def tadpole():
    return load_corpus_graph("tadpole")


@pytest.fixture(scope="session")
def segment():
    return load_corpus_graph("segment")


@pytest.fixture(scope="session")
def core_loop():
    return load_corpus_graph("core_loop")
