import numpy as np
import pytest

from netfiles import write_network
from oracles import random_network, random_overlay

ACCEPTANCE_LINES: list[str] = []

SAMPLE_CONFIG = {
    "lambda": 1.1, "hub_coords": [0.0, 0.0], "k_routes": 3, "gamma": [0, 1, 16],
    "B": 12, "C": 80, "n_eval_scenarios": 5, "seed": 3,
}


def sample_network():
    """Eight stops with coordinates; five disjoint routes exist in each direction."""
    rng = np.random.default_rng(0)
    net = random_network(rng, 8, lam="1.1", coords=True)
    return net, random_overlay(rng, net)


@pytest.fixture
def sample_dir(tmp_path):
    net, overlay = sample_network()
    return write_network(tmp_path / "net", net, overlay, SAMPLE_CONFIG)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
