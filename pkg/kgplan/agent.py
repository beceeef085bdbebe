"""
The agent ties the updater and the task pipeline together around a guarded world graph.

:author: Doug Skrypa
"""

import logging
from pathlib import Path
from typing import Optional, Union

from .config import RunConfig
from .core.exceptions import UpdateFailed, ConfigError
from .graph.persistence import load as load_graph, save as save_graph
from .graph.similarity import SimilarityProvider, LexicalSimilarity, EmbeddingSimilarity
from .graph.store import GraphStore
from .graph.world import WorldGraph, GraphDelta
from .lm.backends import LmBackend, OracleBackend, FaultyBackend, ScriptedBackend, HttpChatBackend, TruthBook
from .lm.gateway import LmGateway
from .lm.transcript import LmTranscript
from .pddl.model import Domain
from .pddl.parser import parse_domain
from .pipeline import TaskPipeline, PlanOutcome
from .planner.external import ExternalPlanner
from .planner.search import PlannerConfig
from .retrieval.retrievers import Retriever, build_retriever
from .updater import UpdateOutcome, process_nl_update, process_perception_update

__all__ = ['Agent', 'build_backend', 'build_similarity', 'load_domain']
log = logging.getLogger(__name__)


class Agent:
    def __init__(
        self,
        graph: WorldGraph,
        gateway: LmGateway,
        retriever: Retriever,
        pipeline: Optional[TaskPipeline] = None,
        retry_cap: int = 3,
        verifier: bool = True,
    ):
        self.store = GraphStore(graph)
        self.gateway = gateway
        self.retriever = retriever
        self.pipeline = pipeline or TaskPipeline(gateway, retriever, retry_cap=retry_cap)
        self.retry_cap = retry_cap
        self.verifier = verifier
        self.last_task: Optional[str] = None

    def __repr__(self):
        return f'<{self.__class__.__name__}[{self.graph!r}, {self.retriever!r}, verifier={self.verifier}]>'

    @property
    def graph(self) -> WorldGraph:
        return self.store.snapshot

    @property
    def domain(self) -> Domain:
        return self.graph.domain

    def update(self, text: str, raise_on_failure: bool = False) -> UpdateOutcome:
        """
        Register a natural-language state change.  Updates are serialized; plans computed concurrently keep using the
        snapshot they started from.
        """
        with self.store.lock:
            graph = self.store.snapshot
            outcome, new = process_nl_update(
                graph, text, self.gateway, self.retriever, self.retry_cap, self.verifier, label='update'
            )
            if outcome.success and outcome.delta:
                self.store.commit(new, outcome.delta, graph.revision)

        if raise_on_failure and not outcome.success:
            raise UpdateFailed(outcome)
        return outcome

    def perceive(self, delta: GraphDelta) -> WorldGraph:
        """Apply a change observed on the perception channel"""
        with self.store.lock:
            graph = self.store.snapshot
            new = process_perception_update(graph, delta)
            if new is not graph:
                self.store.commit(new, delta, graph.revision)
            return new

    def plan(self, text: str) -> PlanOutcome:
        self.last_task = text
        return self.pipeline.plan_task(self.store.snapshot, text, label='plan')

    def replan_on_update(self, text: str) -> PlanOutcome:
        """
        Register the update, then plan the most recent task again against the updated graph.  Earlier plan outcomes
        stay in the pipeline history.
        """
        if self.last_task is None:
            raise ConfigError('There is no earlier task to plan again')
        self.update(text, raise_on_failure=True)
        return self.plan(self.last_task)

    def save(self, path: Union[str, Path]):
        save_graph(self.graph, path)

    @classmethod
    def from_config(
        cls,
        config: RunConfig,
        graph: Optional[WorldGraph] = None,
        book: Optional[TruthBook] = None,
        transcript: Optional[LmTranscript] = None,
        backend: Optional[LmBackend] = None,
    ) -> 'Agent':
        """
        :param config: The run configuration
        :param graph: The initial world graph (default: loaded from ``config.graph``)
        :param book: Ground truth for the oracle and faulty backends
        :param transcript: Transcript to append to (default: a new one)
        :param backend: Use this backend instead of the one named by ``config.backend``
        """
        if graph is None:
            if not config.graph:
                raise ConfigError('A world graph is required')
            graph = load_graph(config.graph, load_domain(config))
        backend = backend or build_backend(config, book)
        gateway = LmGateway(backend, transcript or LmTranscript(backend.backend_id), config.token_budget)
        similarity = build_similarity(config, graph.domain)
        retriever = build_retriever(
            config.retriever, gateway, similarity, config.cutoff, config.depth, config.edge_weight, config.label_bonus,
            config.retry_cap,
        )
        planner_config = PlannerConfig(
            config.planner_timeout, config.expansion_cap, config.grounding_cap, config.plateau_threshold
        )
        external = ExternalPlanner(config.external_planner, config.planner_timeout) if config.external_planner else None
        pipeline = TaskPipeline(
            gateway, retriever, planner_config, config.always_include, config.restrict_objects,
            config.diagnose_failures, config.retry_cap, config.run_dir, external,
        )
        return cls(graph, gateway, retriever, pipeline, config.retry_cap, config.verifier)


def load_domain(config: RunConfig) -> Domain:
    path = config.domain_path
    return parse_domain(path.read_text('utf-8'), str(path))


def build_backend(config: RunConfig, book: Optional[TruthBook] = None) -> LmBackend:
    if config.backend in ('oracle', 'faulty') and book is None:
        raise ConfigError(f'The {config.backend} backend needs ground truth; use it through the simulator or demo')
    if config.backend == 'oracle':
        return OracleBackend(book)
    elif config.backend == 'faulty':
        return FaultyBackend(
            book, config.seed, config.fault_rates, config.retry_fault_rates, config.fault_context_scale
        )
    elif config.backend == 'scripted':
        return ScriptedBackend(LmTranscript.load(config.transcript))
    return HttpChatBackend.from_env()


def build_similarity(config: RunConfig, domain: Optional[Domain] = None) -> SimilarityProvider:
    if config.similarity == 'embedding':
        return EmbeddingSimilarity.from_env(domain)
    return LexicalSimilarity(domain)
