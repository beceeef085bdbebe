import threading

import pytest

from kgplan.agent import Agent, build_backend, build_similarity
from kgplan.config import RunConfig
from kgplan.core.constants import F_DROP_ADDITION
from kgplan.core.exceptions import ConfigError, UpdateFailed
from kgplan.graph.persistence import load
from kgplan.graph.similarity import LexicalSimilarity
from kgplan.graph.world import Triplet, GraphDelta
from kgplan.lm.backends import OracleBackend, FaultyBackend
from kgplan.retrieval.retrievers import BaselineRetriever
from kgplan.simulator.demo import GARY_UPDATE, FAUCET_TASK, MUG_TASK, MUG_UPDATE


@pytest.fixture
def agent(demo_world, truth_book, oracle_config):
    return Agent.from_config(oracle_config, graph=demo_world, book=truth_book)


def test_update_commits_to_store(agent):
    outcome = agent.update(GARY_UPDATE.text)
    assert outcome.success
    assert agent.graph.revision == 1
    assert Triplet('red_pen', 'placed_at_table', 'alexander_bedroom_table') in agent.graph.triplets
    assert agent.store.history == (outcome.delta,)


def test_failed_update_leaves_graph(demo_world, truth_book, oracle_config):
    config = oracle_config.updated(backend='faulty', fault_rates={F_DROP_ADDITION: 1.0}, retry_cap=2)
    agent = Agent.from_config(config, graph=demo_world, book=truth_book)
    outcome = agent.update(GARY_UPDATE.text)
    assert not outcome.success
    assert agent.graph is demo_world
    with pytest.raises(UpdateFailed) as exc_info:
        agent.update(GARY_UPDATE.text, raise_on_failure=True)
    assert exc_info.value.outcome.attempts == 2


def test_plan_and_replan(agent):
    first = agent.plan(MUG_TASK.text)
    assert first.success, first.error
    assert first.plan.steps[-1].name == 'give_to_person'
    assert first.plan.steps[-1].args[:2] == ('mug', 'gary')

    second = agent.replan_on_update(MUG_UPDATE.text)
    assert second.success, second.error
    assert second.plan.steps[-1].args[:2] == ('bowl', 'gary')
    assert second.revision == first.revision + 1
    assert agent.pipeline.history == [first, second]


def test_replan_requires_task(agent):
    with pytest.raises(ConfigError):
        agent.replan_on_update(MUG_UPDATE.text)


def test_plans_use_their_snapshot(agent):
    outcome = agent.plan(FAUCET_TASK.text)
    agent.perceive(GraphDelta({Triplet('bathroom_sink', 'faucet_on')}, ()))
    assert outcome.revision == 0
    assert agent.graph.revision == 1
    assert outcome.success


def test_perceive(agent):
    graph = agent.graph
    assert agent.perceive(GraphDelta()) is graph
    new = agent.perceive(GraphDelta((), {Triplet('mug', 'container_full')}))
    assert Triplet('mug', 'container_full') in new.triplets
    assert agent.graph is new


def test_concurrent_updates_are_serialized(agent):
    texts = [GARY_UPDATE.text, MUG_UPDATE.text]
    threads = [threading.Thread(target=agent.update, args=(text,)) for text in texts]
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join()
    assert agent.graph.revision == 2
    assert [delta.revision for delta in agent.store.history] == [0, 1]


def test_save(agent, tmp_path, household_domain):
    agent.update(GARY_UPDATE.text)
    path = tmp_path.joinpath('world.json')
    agent.save(path)
    assert load(path, household_domain).triplets == agent.graph.triplets


def test_from_config(demo_world, truth_book):
    config = RunConfig(backend='oracle', retriever='baseline', verifier=False, retry_cap=5)
    agent = Agent.from_config(config, graph=demo_world, book=truth_book)
    assert isinstance(agent.retriever, BaselineRetriever)
    assert agent.verifier is False
    assert agent.pipeline.retry_cap == 5
    assert agent.gateway.transcript.backend_id == 'oracle'


def test_from_config_requires_graph(oracle_config):
    with pytest.raises(ConfigError):
        Agent.from_config(oracle_config)


def test_build_backend(truth_book, monkeypatch):
    assert isinstance(build_backend(RunConfig(), truth_book), OracleBackend)
    faulty = build_backend(RunConfig(backend='faulty', seed=3, fault_rates={F_DROP_ADDITION: 0.5}), truth_book)
    assert isinstance(faulty, FaultyBackend)
    assert faulty.seed == 3
    with pytest.raises(ConfigError):
        build_backend(RunConfig())
    monkeypatch.delenv('KGPLAN_LM_URL', raising=False)
    with pytest.raises(ConfigError):
        build_backend(RunConfig(backend='http'))


def test_build_similarity(household_domain, monkeypatch):
    assert isinstance(build_similarity(RunConfig(), household_domain), LexicalSimilarity)
    monkeypatch.delenv('KGPLAN_EMBEDDING_URL', raising=False)
    with pytest.raises(ConfigError):
        build_similarity(RunConfig(similarity='embedding'))
