"""
The world state as a typed knowledge graph.

Every :class:`Triplet` mirrors exactly one ground PDDL atom: relationship triplets mirror binary atoms and property
triplets mirror unary atoms.  Only true facts are stored; an absent triplet is false.

:author: Doug Skrypa
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from types import MappingProxyType
from typing import Optional, Tuple, FrozenSet, Mapping, Iterable, Dict, List, Set, Union, Collection

import networkx as nx

from ..core.constants import (
    V_UNKNOWN_ENTITY, V_UNKNOWN_PREDICATE, V_WRONG_FORM, V_TYPE_MISMATCH, V_REMOVE_ABSENT, V_ADD_DUPLICATE,
    V_ADD_REMOVE_OVERLAP, INFINITE_DEPTH,
)
from ..core.exceptions import (
    DeltaError, UnknownEntityError, TripletConversionError, ConformanceError, GraphError
)
from ..core.utils import is_identifier
from ..pddl.model import Atom, Domain

__all__ = [
    'Entity', 'Triplet', 'GraphDelta', 'WorldGraph', 'check_triplet', 'apply_delta', 'apply_lenient',
    'to_init_atoms', 'from_init_atoms', 'format_triplets', 'SOURCE_VERBAL', 'SOURCE_PERCEPTION',
]
log = logging.getLogger(__name__)

SOURCE_VERBAL = 'verbal'
SOURCE_PERCEPTION = 'perception'
Violation = Tuple[str, str]  # (code, message)


@dataclass(frozen=True)
class Entity:
    name: str
    type: str
    attributes: Tuple[Tuple[str, str], ...] = ()

    @classmethod
    def of(cls, name: str, type: str, **attributes) -> 'Entity':  # noqa
        return cls(name, type, tuple(sorted(attributes.items())))

    @property
    def attribute_text(self) -> str:
        return ' '.join(value for _, value in self.attributes)

    @property
    def display_name(self) -> str:
        return self.name.replace('_', ' ')


@dataclass(frozen=True)
class Triplet:
    """
    A single world fact.  ``object`` is ``None`` for the property form, which is rendered as
    ``(subject, predicate, true)``.
    """
    subject: str
    predicate: str
    object: Optional[str] = None

    def __str__(self):
        return f'({self.subject}, {self.predicate}, {"true" if self.object is None else self.object})'

    def __lt__(self, other: 'Triplet'):
        return self.sort_key < other.sort_key

    @property
    def sort_key(self) -> Tuple[str, str, str]:
        return self.subject, self.predicate, self.object or ''

    @property
    def is_property(self) -> bool:
        return self.object is None

    @property
    def endpoints(self) -> Tuple[str, ...]:
        return (self.subject,) if self.object is None else (self.subject, self.object)

    def to_atom(self) -> Atom:
        return Atom(self.predicate, self.endpoints)

    @classmethod
    def from_parts(cls, subject: str, predicate: str, obj: str) -> 'Triplet':
        """Build a triplet from its text form, where an object of ``true`` denotes the property form"""
        return cls(subject, predicate, None if obj == 'true' else obj)

    @classmethod
    def from_atom(cls, atom: Atom) -> 'Triplet':
        if atom.arity == 1:
            return cls(atom.args[0], atom.predicate)
        elif atom.arity == 2:
            return cls(atom.args[0], atom.predicate, atom.args[1])
        raise TripletConversionError(f'{atom} has arity {atom.arity}; only arity 1 or 2 atoms map to triplets')


def format_triplets(triplets: Iterable[Triplet]) -> str:
    triplets = sorted(triplets)
    return ', '.join(map(str, triplets)) if triplets else 'empty'


@dataclass(frozen=True)
class GraphDelta:
    removals: FrozenSet[Triplet] = frozenset()
    additions: FrozenSet[Triplet] = frozenset()
    source: str = SOURCE_VERBAL
    revision: Optional[int] = None  # revision of the graph the delta was applied to

    def __post_init__(self):
        # Accept any iterable; store frozensets so deltas stay hashable and order-free
        object.__setattr__(self, 'removals', frozenset(self.removals))
        object.__setattr__(self, 'additions', frozenset(self.additions))

    def __str__(self):
        return f'REMOVE: {format_triplets(self.removals)}\nADD: {format_triplets(self.additions)}'

    def __bool__(self):
        return bool(self.removals or self.additions)

    @property
    def is_empty(self) -> bool:
        return not self

    def inverse(self) -> 'GraphDelta':
        return GraphDelta(self.additions, self.removals, self.source)

    def touched_entities(self) -> Set[str]:
        return {name for t in self.removals | self.additions for name in t.endpoints}


def check_triplet(triplet: Triplet, entities: Mapping[str, Entity], domain: Domain) -> List[Violation]:
    """
    Check a single triplet against the entity set and the domain's predicate signatures.

    :return: List of (violation code, message) tuples; empty if the triplet can be stored
    """
    violations = []
    for name in triplet.endpoints:
        if name not in entities:
            violations.append((V_UNKNOWN_ENTITY, f'{name!r} is not an entity in the graph'))

    try:
        predicate = domain.predicates[triplet.predicate]
    except KeyError:
        violations.append((V_UNKNOWN_PREDICATE, f'{triplet.predicate!r} is not a predicate in the domain'))
        return violations

    if predicate.arity == 1 and not triplet.is_property:
        violations.append((V_WRONG_FORM, f'{predicate.name} is a property; expected (subject, {predicate.name}, true)'))
        return violations
    elif predicate.arity == 2 and triplet.is_property:
        violations.append((V_WRONG_FORM, f'{predicate.name} is a relationship between two entities'))
        return violations
    elif predicate.arity not in (1, 2):
        violations.append((V_WRONG_FORM, f'{predicate.name} has arity {predicate.arity} and cannot be a triplet'))
        return violations

    for pos, (name, (_, expected)) in enumerate(zip(triplet.endpoints, predicate.params), 1):
        if (entity := entities.get(name)) is not None and not domain.is_subtype(entity.type, expected):
            violations.append(
                (V_TYPE_MISMATCH, f'argument {pos} of {predicate.name} must be a {expected}; {name} is a {entity.type}')
            )
    return violations


class WorldGraph:
    """
    Immutable snapshot of the world state (entities and triplets) at one revision.  Writers produce new snapshots via
    :func:`apply_delta`; readers can share a snapshot freely.
    """

    def __init__(
        self,
        domain: Domain,
        entities: Union[Mapping[str, Entity], Iterable[Entity]] = (),
        triplets: Iterable[Triplet] = (),
        revision: int = 0,
        validate: bool = True,
    ):
        if not isinstance(entities, Mapping):
            entities = {e.name: e for e in entities}
        self.domain = domain
        self._entities = dict(entities)
        self.triplets: FrozenSet[Triplet] = frozenset(triplets)
        self.revision = revision
        if validate:
            self.validate()

    def __repr__(self):
        return (
            f'<{self.__class__.__name__}[{self.domain.name}, revision={self.revision}]'
            f'(entities={len(self._entities)}, triplets={len(self.triplets)})>'
        )

    def __eq__(self, other):
        if not isinstance(other, WorldGraph):
            return NotImplemented
        return (
            self.revision == other.revision
            and self.domain.name == other.domain.name
            and self._entities == other._entities
            and self.triplets == other.triplets
        )

    def __hash__(self):
        return hash((self.domain.name, self.revision, self.triplets))

    def __len__(self):
        return len(self.triplets)

    def __contains__(self, item: Union[Triplet, str]):
        if isinstance(item, Triplet):
            return item in self.triplets
        return item in self._entities

    @property
    def entities(self) -> Mapping[str, Entity]:
        return MappingProxyType(self._entities)

    def entity(self, name: str) -> Entity:
        try:
            return self._entities[name]
        except KeyError:
            raise UnknownEntityError(name) from None

    def entities_of_type(self, type_name: str) -> List[Entity]:
        types = self.domain.subtypes(type_name)
        return [e for e in self._entities.values() if e.type in types]

    def objects(self) -> Dict[str, str]:
        """Entity name -> type, sorted by name; suitable for a PDDL :objects block"""
        return {name: self._entities[name].type for name in sorted(self._entities)}

    def validate(self):
        for entity in self._entities.values():
            if not is_identifier(entity.name):
                raise GraphError(f'Invalid entity name: {entity.name!r}')
            if not self.domain.has_type(entity.type):
                raise ConformanceError('type', entity.type, f'used by entity {entity.name}')
        for triplet in self.triplets:
            if triplet.predicate not in self.domain.predicates:
                raise ConformanceError('predicate', triplet.predicate, f'used by {triplet}')
            if violations := check_triplet(triplet, self._entities, self.domain):
                code, message = violations[0]
                raise DeltaError(code, triplet, message)

    def with_triplets(self, triplets: Iterable[Triplet], revision: Optional[int] = None) -> 'WorldGraph':
        revision = self.revision + 1 if revision is None else revision
        return WorldGraph(self.domain, self._entities, triplets, revision, validate=False)

    # region Traversal

    @cached_property
    def _incident(self) -> Dict[str, Set[Triplet]]:
        incident = {name: set() for name in self._entities}
        for triplet in self.triplets:
            for name in triplet.endpoints:
                incident[name].add(triplet)
        return incident

    @cached_property
    def nx_graph(self) -> nx.MultiGraph:
        """Undirected view; property triplets are not edges but remain reachable through :meth:`incident`"""
        graph = nx.MultiGraph()
        graph.add_nodes_from(sorted(self._entities))
        for triplet in sorted(self.triplets):
            if not triplet.is_property:
                graph.add_edge(triplet.subject, triplet.object, key=triplet)
        return graph

    def incident(self, name: str) -> FrozenSet[Triplet]:
        try:
            return frozenset(self._incident[name])
        except KeyError:
            raise UnknownEntityError(name) from None

    def connecting(self, a: str, b: str) -> List[Triplet]:
        """Relationship triplets between the two entities, in either direction"""
        if a not in self._incident or b not in self._incident:
            return []
        return sorted(t for t in self._incident[a] if not t.is_property and {t.subject, t.object} == {a, b})

    def neighborhood(self, seeds: Collection[str], depth: Union[int, float] = 2) -> FrozenSet[Triplet]:
        """
        :param seeds: Entity names to start from
        :param depth: Number of hops; depth 1 yields the triplets incident to the seeds, depth 2 additionally yields
          the triplets incident to their neighbors, etc.  ``float('inf')`` yields the seeds' connected components.
        :return: The set of triplets reachable from the seeds within the given depth
        """
        if depth < 1:
            raise ValueError(f'Invalid {depth=} - must be >= 1')
        for name in seeds:
            if name not in self._entities:
                raise UnknownEntityError(name)
        if not seeds:
            return frozenset()

        cutoff = None if depth == INFINITE_DEPTH else int(depth) - 1
        nodes = set()
        for seed in sorted(seeds):
            nodes.update(nx.single_source_shortest_path_length(self.nx_graph, seed, cutoff=cutoff))

        found = set()
        for name in nodes:
            found.update(self._incident[name])
        return frozenset(found)

    # endregion


def _delta_violation(graph: WorldGraph, delta: GraphDelta) -> Optional[Tuple[str, Triplet, str]]:
    if overlap := delta.removals & delta.additions:
        return V_ADD_REMOVE_OVERLAP, min(overlap), 'triplet is both removed and added'
    for triplet in sorted(delta.removals):
        if triplet not in graph.triplets:
            return V_REMOVE_ABSENT, triplet, 'triplet is not in the graph'
    for triplet in sorted(delta.additions):
        if triplet in graph.triplets:
            return V_ADD_DUPLICATE, triplet, 'triplet is already in the graph'
        if violations := check_triplet(triplet, graph.entities, graph.domain):
            code, message = violations[0]
            return code, triplet, message
    return None


def apply_delta(graph: WorldGraph, delta: GraphDelta) -> WorldGraph:
    """
    Strictly apply the given delta: removals are taken out, then additions are put in.  The entity set never changes.

    :raises: :class:`DeltaError` naming the first offending triplet; the given graph is not modified
    """
    if violation := _delta_violation(graph, delta):
        raise DeltaError(*violation)
    triplets = (graph.triplets - delta.removals) | delta.additions
    new = graph.with_triplets(triplets)
    log.debug(
        f'Applied {delta.source} delta at revision={graph.revision}: -{len(delta.removals)} +{len(delta.additions)}'
    )
    return new


def apply_lenient(
    graph: WorldGraph,
    removals: Iterable[Triplet],
    additions: Iterable[Triplet],
    scope: Optional[FrozenSet[Triplet]] = None,
) -> Tuple[WorldGraph, List[Triplet]]:
    """
    Apply an unverified candidate with plain set arithmetic: triplets outside the scope are kept as they are; inside
    the scope, removals are taken out and additions put in.  Removals outside ``scope`` (the whole graph when
    omitted) have no effect, and additions that the graph cannot store are dropped.

    :return: Tuple of (new graph, dropped additions)
    """
    scope = graph.triplets if scope is None else scope & graph.triplets
    irrelevant = graph.triplets - scope
    kept, dropped = set(), []
    for triplet in sorted(set(additions)):
        if check_triplet(triplet, graph.entities, graph.domain):
            dropped.append(triplet)
        else:
            kept.add(triplet)
    if dropped:
        log.warning(f'Dropped {len(dropped)} addition(s) the graph cannot store: {format_triplets(dropped)}')
    relevant = (scope - frozenset(removals)) | kept
    return graph.with_triplets(irrelevant | relevant), dropped


def to_init_atoms(triplets: Iterable[Triplet]) -> FrozenSet[Atom]:
    return frozenset(t.to_atom() for t in triplets)


def from_init_atoms(atoms: Iterable[Atom], domain: Domain) -> FrozenSet[Triplet]:
    triplets = set()
    for atom in atoms:
        if atom.predicate not in domain.predicates:
            raise TripletConversionError(f'unknown predicate: {atom.predicate}')
        triplets.add(Triplet.from_atom(atom))
    return frozenset(triplets)
