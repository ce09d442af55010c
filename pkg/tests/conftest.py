"""Shared fixtures: the seven-node Z_3 chain, its ring and a Stuart-Landau orbit."""

from pathlib import Path

import numpy as np
import pytest

from src.dynamics import IntegratorConfig, assemble, find_periodic_orbit, initial_state, lift_orbit
from src.models import read_model_file, read_params, stuart_landau
from src.network import Arrow, Colouring, Network, Node, read_network

FIXTURES = Path(__file__).parent.parent / "data" / "fixtures"

SL_PERIOD = 2 * np.pi / (1.0 + 0.2 * np.sqrt(3) / 2)


def ring_network(node_type="cell", state_type="plane", dim=2) -> Network:
    nodes = tuple(Node(c, node_type, state_type, dim) for c in (1, 2, 3))
    arrows = (Arrow(1, "edge", 1, 3), Arrow(2, "edge", 2, 1), Arrow(3, "edge", 3, 2))
    return Network(nodes, arrows)


def chain_network(length=4, node_type="cell", state_type="plane", dim=2) -> Network:
    """Ring 1-2-3 feeding a chain 4, 5, ... of the given length."""
    ring = ring_network(node_type, state_type, dim)
    nodes = list(ring.nodes)
    arrows = list(ring.arrows)
    for k in range(length):
        c = 4 + k
        nodes.append(Node(c, node_type, state_type, dim))
        arrows.append(Arrow(c, "edge", c, c - 1))
    return Network(tuple(nodes), tuple(arrows))


def chain_colouring(length=4) -> Colouring:
    names = ("W", "G", "B")
    return Colouring({c: names[(c - 1) % 3] for c in range(1, 4 + length)})


@pytest.fixture
def chain7():
    return chain_network(4)


@pytest.fixture
def wgb():
    return chain_colouring(4)


@pytest.fixture(scope="session")
def config():
    return IntegratorConfig()


@pytest.fixture(scope="session")
def sl_setup():
    """Stuart-Landau ring in its rotating wave, lifted onto the seven-node chain."""
    models = read_model_file(FIXTURES / "sl_model.json")
    params = read_params(FIXTURES / "sl_params.json")
    doc = read_network(FIXTURES / "chain7.json")
    cpg_net = doc.network.induced((1, 2, 3))
    cpg_system = assemble(cpg_net, models.models, params)
    lift_system = assemble(doc.network, models.models, params)
    orbit = find_periodic_orbit(cpg_system, initial_state(cpg_net, models.seed), IntegratorConfig())
    lifted = lift_orbit(orbit, doc.colouring, doc.network, source=cpg_net)
    return {
        "doc": doc,
        "kappa": doc.colouring,
        "cpg_net": cpg_net,
        "cpg_system": cpg_system,
        "lift_system": lift_system,
        "orbit": orbit,
        "lifted": lifted,
        "params": params,
        "models": models.models,
    }


@pytest.fixture
def sl_models():
    return {"cell": stuart_landau()}
