import logging

import pytest

from kgplan.config import DEFAULT_DOMAIN_PATH, RunConfig
from kgplan.graph.world import Entity, Triplet, WorldGraph
from kgplan.lm.backends import OracleBackend, TruthBook
from kgplan.lm.gateway import LmGateway
from kgplan.pddl.parser import parse_domain
from kgplan.simulator.demo import load_demo_world, demo_truth_book

logging.getLogger('kgplan').setLevel(logging.DEBUG)


@pytest.fixture(scope='session')
def household_domain():
    return parse_domain(DEFAULT_DOMAIN_PATH.read_text('utf-8'), str(DEFAULT_DOMAIN_PATH))


@pytest.fixture
def demo_world(household_domain):
    return load_demo_world(household_domain)


@pytest.fixture
def truth_book() -> TruthBook:
    return demo_truth_book()


@pytest.fixture
def oracle_gateway(truth_book):
    return LmGateway(OracleBackend(truth_book), retry_delay=0)


@pytest.fixture
def oracle_config() -> RunConfig:
    return RunConfig(backend='oracle')


@pytest.fixture
def tiny_world(household_domain):
    """Two rooms, a robot, a sink and a pen; small enough to reason about by hand"""
    entities = [
        Entity('kitchen', 'room'),
        Entity('bathroom', 'room'),
        Entity('robot', 'robot'),
        Entity('bathroom_sink', 'sink'),
        Entity.of('red_pen', 'pen', color='red'),
        Entity('kitchen_table', 'table'),
    ]
    triplets = [
        Triplet('kitchen', 'connected', 'bathroom'),
        Triplet('bathroom', 'connected', 'kitchen'),
        Triplet('bathroom_sink', 'in_room', 'bathroom'),
        Triplet('kitchen_table', 'in_room', 'kitchen'),
        Triplet('bathroom_sink', 'faucet_on'),
        Triplet('robot', 'robot_in_room', 'kitchen'),
        Triplet('robot', 'hand_empty'),
        Triplet('red_pen', 'placed_at_table', 'kitchen_table'),
    ]
    return WorldGraph(household_domain, entities, triplets)
