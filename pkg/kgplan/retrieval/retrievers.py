"""
Retrievers select the part of the world graph that is relevant to an update or task.

- ``search``: query-graph extraction, similarity-ranked subgraph matching, and neighborhood expansion
- ``baseline``: the model picks entity names from an inventory of the graph; their incident triplets are returned
- ``full``: the whole graph

:author: Doug Skrypa
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from typing import FrozenSet, Dict, Any, Optional, Type, Iterable, List

from ..core.constants import (
    RETRIEVER_SEARCH, RETRIEVER_BASELINE, RETRIEVER_FULL, DEFAULT_CUTOFF, DEFAULT_DEPTH, DEFAULT_EDGE_WEIGHT,
    DEFAULT_LABEL_BONUS, DEFAULT_RETRY_CAP,
)
from ..core.exceptions import ConfigError, RetrievalError
from ..core.utils import normalize_name
from ..graph.similarity import SimilarityProvider, LexicalSimilarity
from ..graph.world import WorldGraph, Triplet
from ..lm.gateway import LmGateway
from ..lm.parsing import extract_json
from ..lm.prompts import build_prompt, format_entities, format_errors, TEMPLATE_ENTITY_SELECTION
from .matching import QueryMapping, SubgraphMatcher
from .query import QueryGraph, extract_query_graph

__all__ = ['RetrievalResult', 'Retriever', 'SearchRetriever', 'BaselineRetriever', 'FullRetriever', 'build_retriever']
log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RetrievalResult:
    entities: FrozenSet[str]            # matched seed entities
    relevant: FrozenSet[Triplet]
    irrelevant: FrozenSet[Triplet]      # every other graph triplet
    diagnostics: Dict[str, Any] = field(default_factory=dict, compare=False)
    query_graph: Optional[QueryGraph] = field(default=None, compare=False)
    mapping: Optional[QueryMapping] = field(default=None, compare=False)

    @classmethod
    def partition(
        cls, graph: WorldGraph, entities: Iterable[str], relevant: Iterable[Triplet], **kwargs
    ) -> 'RetrievalResult':
        relevant = frozenset(relevant)
        if stray := relevant.difference(graph.triplets):
            raise RetrievalError(f'Retrieved triplets that are not in the graph: {", ".join(map(str, sorted(stray)))}')
        return cls(frozenset(entities), relevant, graph.triplets - relevant, **kwargs)

    @classmethod
    def empty(cls, graph: WorldGraph, **kwargs) -> 'RetrievalResult':
        return cls.partition(graph, (), (), **kwargs)

    def with_extra(self, triplets: Iterable[Triplet]) -> 'RetrievalResult':
        """Move the given triplets (which must be in the graph) from the irrelevant to the relevant set"""
        moved = frozenset(triplets) & self.irrelevant
        if not moved:
            return self
        return replace(self, relevant=self.relevant | moved, irrelevant=self.irrelevant - moved)

    @property
    def objects(self) -> FrozenSet[str]:
        """The seed entities together with every entity that appears in a relevant triplet"""
        return self.entities.union(name for t in self.relevant for name in t.endpoints)


class Retriever(ABC):
    _retrievers: Dict[str, Type['Retriever']] = {}
    retriever_id: Optional[str] = None

    # noinspection PyMethodOverriding
    def __init_subclass__(cls, retriever_id: str):
        cls.retriever_id = retriever_id
        Retriever._retrievers[retriever_id] = cls

    @classmethod
    def for_id(cls, retriever_id: str) -> Type['Retriever']:
        try:
            return cls._retrievers[retriever_id]
        except KeyError:
            choices = ', '.join(sorted(cls._retrievers))
            raise ConfigError(f'Unknown retriever: {retriever_id!r} (choose from: {choices})')

    def __repr__(self):
        return f'<{self.__class__.__name__}>'

    @abstractmethod
    def retrieve(self, graph: WorldGraph, text: str, label: Optional[str] = None) -> RetrievalResult:
        raise NotImplementedError


class SearchRetriever(Retriever, retriever_id=RETRIEVER_SEARCH):
    def __init__(
        self,
        gateway: LmGateway,
        similarity: Optional[SimilarityProvider] = None,
        cutoff: float = DEFAULT_CUTOFF,
        depth: float = DEFAULT_DEPTH,
        edge_weight: float = DEFAULT_EDGE_WEIGHT,
        label_bonus: float = DEFAULT_LABEL_BONUS,
        retry_cap: int = DEFAULT_RETRY_CAP,
    ):
        if not 0 < cutoff <= 1:
            raise ConfigError(f'Invalid {cutoff=} - must be in (0, 1]')
        if depth < 1:
            raise ConfigError(f'Invalid {depth=} - must be >= 1')
        self.gateway = gateway
        self.similarity = similarity or LexicalSimilarity()
        self.cutoff = cutoff
        self.depth = depth
        self.edge_weight = edge_weight
        self.label_bonus = label_bonus
        self.retry_cap = retry_cap

    def __repr__(self):
        return f'<{self.__class__.__name__}({self.cutoff=}, {self.depth=}, {self.edge_weight=})>'

    def retrieve(self, graph: WorldGraph, text: str, label: Optional[str] = None) -> RetrievalResult:
        query = extract_query_graph(self.gateway, text, self.retry_cap, label)
        if not query or not graph.entities:
            log.debug(f'Nothing to match for {text!r} ({len(query)} query entities, {len(graph.entities)} entities)')
            return RetrievalResult.empty(graph, diagnostics={'query_entities': len(query)}, query_graph=query)

        entities = sorted(graph.entities.values(), key=lambda e: e.name)
        matrix = self.similarity.matrix(query.entities, entities, graph.domain)
        matcher = SubgraphMatcher(matrix, query, graph, self.cutoff, self.edge_weight, self.label_bonus)
        mapping = matcher.run()
        if not mapping.complete:
            unmapped = [str(e) for i, e in enumerate(query.entities) if mapping.get(i) is None]
            log.warning(f'Incomplete match for {text!r}; unmapped query entities: {", ".join(unmapped)}')

        seeds = mapping.entities
        relevant = graph.neighborhood(seeds, self.depth) if seeds else frozenset()
        diagnostics = {
            'query_entities': len(query),
            'query_relations': len(query.relations),
            'candidate_counts': matcher.candidate_counts,
            'best_scores': [round(matrix.best(i), 4) for i in range(len(query))],
            'mapping_score': round(mapping.score, 4),
            'complete': mapping.complete,
            'explored': mapping.explored,
        }
        log.debug(f'Retrieved {len(relevant)} triplets around {sorted(seeds)} for {text!r}')
        return RetrievalResult.partition(
            graph, seeds, relevant, diagnostics=diagnostics, query_graph=query, mapping=mapping
        )


class BaselineRetriever(Retriever, retriever_id=RETRIEVER_BASELINE):
    """
    Name-only selection: the model is shown every entity name and picks the relevant ones; the triplets incident to
    the selection are returned.  Relations between the picked entities and others are not considered when
    selecting.
    """

    def __init__(self, gateway: LmGateway, depth: float = 1, retry_cap: int = DEFAULT_RETRY_CAP):
        self.gateway = gateway
        self.depth = depth
        self.retry_cap = retry_cap

    def retrieve(self, graph: WorldGraph, text: str, label: Optional[str] = None) -> RetrievalResult:
        if not text.strip() or not graph.entities:
            return RetrievalResult.empty(graph, diagnostics={'selected': 0})

        selected = self._select(graph, text, label)
        relevant = graph.neighborhood(selected, self.depth) if selected else frozenset()
        diagnostics = {'selected': len(selected), 'inventory': len(graph.entities)}
        return RetrievalResult.partition(graph, selected, relevant, diagnostics=diagnostics)

    def _select(self, graph: WorldGraph, text: str, label: Optional[str]) -> FrozenSet[str]:
        errors: List[str] = []
        inventory = format_entities(graph.entities.values())
        for attempt in range(1, self.retry_cap + 1):
            bundle = build_prompt(
                TEMPLATE_ENTITY_SELECTION, attempt, entities=inventory, text=text, errors=format_errors(errors)
            )
            completion = self.gateway.complete(bundle, label)
            try:
                names = _selected_names(extract_json(completion.text))
            except ValueError as e:
                log.debug(f'Malformed entity selection on {attempt=}: {e}')
                errors.append(str(e))
                continue

            if unknown := sorted(names.difference(graph.entities)):
                log.debug(f'Ignoring selected names that are not entities: {", ".join(unknown)}')
            return frozenset(names.intersection(graph.entities))

        raise RetrievalError(f'No valid entity selection after {self.retry_cap} attempts: {errors[-1]}')


def _selected_names(data: Any) -> FrozenSet[str]:
    if not isinstance(data, dict) or not isinstance(names := data.get('entities'), list):
        raise ValueError('expected {"entities": [<name>, ...]}')
    return frozenset(normalize_name(str(name)) for name in names)


class FullRetriever(Retriever, retriever_id=RETRIEVER_FULL):
    def retrieve(self, graph: WorldGraph, text: str, label: Optional[str] = None) -> RetrievalResult:
        return RetrievalResult.partition(graph, graph.entities, graph.triplets, diagnostics={})


def build_retriever(
    retriever_id: str,
    gateway: LmGateway,
    similarity: Optional[SimilarityProvider] = None,
    cutoff: float = DEFAULT_CUTOFF,
    depth: float = DEFAULT_DEPTH,
    edge_weight: float = DEFAULT_EDGE_WEIGHT,
    label_bonus: float = DEFAULT_LABEL_BONUS,
    retry_cap: int = DEFAULT_RETRY_CAP,
) -> Retriever:
    cls = Retriever.for_id(retriever_id)
    if cls is SearchRetriever:
        return SearchRetriever(gateway, similarity, cutoff, depth, edge_weight, label_bonus, retry_cap)
    elif cls is BaselineRetriever:
        return BaselineRetriever(gateway, retry_cap=retry_cap)
    return cls()

