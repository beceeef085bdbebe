"""
Subgraph matching: find the injective assignment of query-graph entities to world entities with the highest
combined node similarity and relational consistency.

The search is a depth-first backtracking search over the candidate space (the world entities whose similarity to a
query node passes the cutoff filter), visiting query nodes in descending order of their best similarity and pruning
branches whose optimistic bound cannot beat the best mapping found so far.

:author: Doug Skrypa
"""

import logging
from dataclasses import dataclass, field
from typing import Tuple, Dict, FrozenSet, List, Optional, Set, Mapping

from ..core.constants import DEFAULT_CUTOFF, DEFAULT_EDGE_WEIGHT, DEFAULT_LABEL_BONUS
from ..graph.similarity import SimilarityMatrix, text_similarity
from ..graph.world import WorldGraph
from .query import QueryGraph, QueryRelation

__all__ = ['QueryMapping', 'EdgeCredit', 'mapping_score', 'match', 'SubgraphMatcher']
log = logging.getLogger(__name__)


@dataclass(frozen=True)
class QueryMapping:
    """A partial injective map from query entity indexes to world entity names"""
    pairs: Tuple[Tuple[int, str], ...] = ()     # sorted by query index
    score: float = 0.0
    complete: bool = True
    explored: int = field(default=0, compare=False)

    def __post_init__(self):
        targets = [name for _, name in self.pairs]
        if len(set(targets)) != len(targets):
            raise ValueError(f'Mapping is not injective: {self.pairs}')

    def __len__(self):
        return len(self.pairs)

    def __getitem__(self, index: int) -> str:
        return self.as_dict()[index]

    def get(self, index: int) -> Optional[str]:
        return self.as_dict().get(index)

    def as_dict(self) -> Dict[int, str]:
        return dict(self.pairs)

    @property
    def entities(self) -> FrozenSet[str]:
        return frozenset(name for _, name in self.pairs)

    @property
    def rank(self) -> Tuple[bool, float]:
        """Complete mappings outrank partial ones; ties are broken by score"""
        return self.complete, self.score


class EdgeCredit:
    """
    Credit for a satisfied query relation: 1 when any relationship triplet connects the two mapped entities, plus
    ``label_bonus`` times the best similarity between the relation label and a connecting predicate.  Unsatisfied
    relations earn nothing.
    """

    def __init__(self, graph: WorldGraph, label_bonus: float = DEFAULT_LABEL_BONUS):
        self.graph = graph
        self.label_bonus = label_bonus
        self._cache: Dict[Tuple[str, str, str], float] = {}

    @property
    def maximum(self) -> float:
        return 1 + self.label_bonus

    def __call__(self, label: str, a: str, b: str) -> float:
        key = (label, a, b)
        try:
            return self._cache[key]
        except KeyError:
            pass
        if a == b or not (triplets := self.graph.connecting(a, b)):
            credit = 0.0
        else:
            credit = 1 + self.label_bonus * max(text_similarity(label, t.predicate) for t in triplets)
        self._cache[key] = credit
        return credit


def mapping_score(
    assignment: Mapping[int, str],
    query: QueryGraph,
    graph: WorldGraph,
    matrix: SimilarityMatrix,
    edge_weight: float = DEFAULT_EDGE_WEIGHT,
    label_bonus: float = DEFAULT_LABEL_BONUS,
    credit: Optional[EdgeCredit] = None,
) -> float:
    """
    Sum of the node similarities of the mapped query entities, plus ``edge_weight`` times the credit of every query
    relation whose endpoints are both mapped.
    """
    if isinstance(assignment, QueryMapping):
        assignment = assignment.as_dict()
    credit = credit or EdgeCredit(graph, label_bonus)
    columns = {name: j for j, name in enumerate(matrix.columns)}
    score = sum(matrix[i, columns[name]] for i, name in sorted(assignment.items()))
    edges = 0.0
    for rel in query.relations:
        if (a := assignment.get(rel.subject)) is not None and (b := assignment.get(rel.object)) is not None:
            edges += credit(rel.label, a, b)
    return score + edge_weight * edges


class SubgraphMatcher:
    def __init__(
        self,
        matrix: SimilarityMatrix,
        query: QueryGraph,
        graph: WorldGraph,
        cutoff: float = DEFAULT_CUTOFF,
        edge_weight: float = DEFAULT_EDGE_WEIGHT,
        label_bonus: float = DEFAULT_LABEL_BONUS,
    ):
        if not 0 < cutoff <= 1:
            raise ValueError(f'Invalid {cutoff=} - must be in (0, 1]')
        if matrix.shape[0] != len(query):
            raise ValueError(f'Similarity matrix has {matrix.shape[0]} rows for {len(query)} query entities')
        if unknown := [name for name in matrix.columns if name not in graph.entities]:
            raise ValueError(f'Similarity matrix columns are not graph entities: {", ".join(unknown)}')

        self.matrix = matrix
        self.query = query
        self.graph = graph
        self.cutoff = cutoff
        self.edge_weight = edge_weight
        self.credit = EdgeCredit(graph, label_bonus)

        n = len(query)
        self.order = sorted(range(n), key=lambda i: (-matrix.best(i), i))
        self.candidates: Dict[int, List[int]] = {i: matrix.candidates(i, cutoff) for i in range(n)}
        position = {node: k for k, node in enumerate(self.order)}
        # Relations are scored when their later endpoint (in visiting order) is assigned
        self._edges_at: List[List[QueryRelation]] = [[] for _ in range(n)]
        for rel in query.relations:
            if rel.subject != rel.object:
                self._edges_at[max(position[rel.subject], position[rel.object])].append(rel)

        node_best = [max((matrix[i, j] for j in self.candidates[i]), default=0.0) for i in self.order]
        self._node_bound = [sum(node_best[k:]) for k in range(n + 1)]
        self._edge_bound = [
            edge_weight * self.credit.maximum * sum(len(edges) for edges in self._edges_at[k:]) for k in range(n + 1)
        ]

        self.explored = 0
        self._best: Optional[Dict[int, str]] = None
        self._best_score = float('-inf')

    @property
    def candidate_counts(self) -> List[int]:
        return [len(self.candidates[i]) for i in range(len(self.query))]

    def run(self) -> QueryMapping:
        if not self.query:
            return QueryMapping()

        self._search(0, {}, set(), 0.0, allow_skip=False)
        complete = self._best is not None
        if not complete:
            log.debug(f'No complete mapping under cutoff={self.cutoff}; searching for the best partial mapping')
            self._search(0, {}, set(), 0.0, allow_skip=True)

        assignment = self._best
        score = mapping_score(assignment, self.query, self.graph, self.matrix, self.edge_weight, credit=self.credit)
        log.debug(f'Best mapping {assignment} {score=:.4f} {complete=} after exploring {self.explored} mappings')
        return QueryMapping(tuple(sorted(assignment.items())), score, complete, self.explored)

    def _search(self, k: int, assignment: Dict[int, str], used: Set[str], score: float, allow_skip: bool):
        if k == len(self.order):
            self.explored += 1
            if score > self._best_score:
                self._best, self._best_score = dict(assignment), score
            return
        if score + self._node_bound[k] + self._edge_bound[k] <= self._best_score:
            return

        node = self.order[k]
        for j in self.candidates[node]:
            name = self.matrix.columns[j]
            if name in used:
                continue
            assignment[node] = name
            used.add(name)
            gain = self.matrix[node, j] + self.edge_weight * self._edge_gain(k, assignment)
            self._search(k + 1, assignment, used, score + gain, allow_skip)
            used.discard(name)
            del assignment[node]

        if allow_skip:
            self._search(k + 1, assignment, used, score, allow_skip)

    def _edge_gain(self, k: int, assignment: Dict[int, str]) -> float:
        gain = 0.0
        for rel in self._edges_at[k]:
            if (a := assignment.get(rel.subject)) is not None and (b := assignment.get(rel.object)) is not None:
                gain += self.credit(rel.label, a, b)
        return gain


def match(
    matrix: SimilarityMatrix,
    query: QueryGraph,
    graph: WorldGraph,
    cutoff: float = DEFAULT_CUTOFF,
    edge_weight: float = DEFAULT_EDGE_WEIGHT,
    label_bonus: float = DEFAULT_LABEL_BONUS,
) -> QueryMapping:
    """
    :param matrix: Similarity of each query entity (rows) to each world entity (columns)
    :param query: The query graph whose entities label the matrix rows
    :param graph: The world graph whose relationships satisfy query relations
    :param cutoff: A world entity is a candidate for a query entity when its similarity is at least ``cutoff`` times
      the query entity's best similarity
    :param edge_weight: Weight of relation credit relative to node similarity
    :param label_bonus: Extra credit for a relation whose label resembles the connecting predicate
    :return: The complete injective mapping with the highest :func:`mapping_score`.  When no complete mapping exists
      under the cutoff, the highest-scoring partial mapping is returned with ``complete=False``.  Since lowering the
      cutoff only widens each candidate set, it never lowers the returned mapping's :attr:`QueryMapping.rank`.
    """
    return SubgraphMatcher(matrix, query, graph, cutoff, edge_weight, label_bonus).run()
