"""
Immutable representation of the supported PDDL subset (STRIPS, typing, negative preconditions, forall/not goals).

:author: Doug Skrypa
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Tuple, Dict, FrozenSet, Union, Mapping, Iterator, Set, List

from ..core.exceptions import UnknownTypeError, PddlSemanticError

__all__ = [
    'ROOT_TYPE', 'Atom', 'Literal', 'Predicate', 'ActionSchema', 'GoalAnd', 'GoalForall', 'GoalFormula', 'Domain',
    'Problem', 'TypedParams',
]
log = logging.getLogger(__name__)

ROOT_TYPE = 'object'
TypedParams = Tuple[Tuple[str, str], ...]


@dataclass(frozen=True, order=True)
class Atom:
    predicate: str
    args: Tuple[str, ...] = ()

    def __str__(self):
        return '({})'.format(' '.join((self.predicate, *self.args)))

    @property
    def arity(self) -> int:
        return len(self.args)

    @property
    def is_ground(self) -> bool:
        return not any(a.startswith('?') for a in self.args)

    def substitute(self, binding: Mapping[str, str]) -> 'Atom':
        return Atom(self.predicate, tuple(binding.get(a, a) for a in self.args))


@dataclass(frozen=True, order=True)
class Literal:
    atom: Atom
    positive: bool = True

    def __str__(self):
        return str(self.atom) if self.positive else f'(not {self.atom})'

    def __invert__(self) -> 'Literal':
        return Literal(self.atom, not self.positive)

    def substitute(self, binding: Mapping[str, str]) -> 'Literal':
        return Literal(self.atom.substitute(binding), self.positive)

    def holds(self, state: Union[Set[Atom], FrozenSet[Atom]]) -> bool:
        """Closed-world evaluation: an atom absent from the state is false"""
        return (self.atom in state) == self.positive


@dataclass(frozen=True)
class GoalAnd:
    parts: Tuple['GoalFormula', ...] = ()

    def __str__(self):
        if not self.parts:
            return '(and)'
        return '(and {})'.format(' '.join(map(str, self.parts)))


@dataclass(frozen=True)
class GoalForall:
    variables: TypedParams
    body: 'GoalFormula'

    def __str__(self):
        return f'(forall ({_format_typed(self.variables)}) {self.body})'


GoalFormula = Union[Literal, GoalAnd, GoalForall]


@dataclass(frozen=True)
class Predicate:
    name: str
    params: TypedParams = ()

    def __str__(self):
        if not self.params:
            return f'({self.name})'
        return f'({self.name} {_format_typed(self.params)})'

    @property
    def arity(self) -> int:
        return len(self.params)

    @property
    def types(self) -> Tuple[str, ...]:
        return tuple(t for _, t in self.params)


@dataclass(frozen=True)
class ActionSchema:
    name: str
    params: TypedParams
    preconditions: Tuple[Literal, ...] = ()
    add: Tuple[Atom, ...] = ()
    delete: Tuple[Atom, ...] = ()

    @property
    def variables(self) -> Tuple[str, ...]:
        return tuple(v for v, _ in self.params)


@dataclass(frozen=True)
class Domain:
    name: str
    types: Mapping[str, str] = field(default_factory=dict)                  # child -> parent
    predicates: Mapping[str, Predicate] = field(default_factory=dict)
    actions: Mapping[str, ActionSchema] = field(default_factory=dict)
    requirements: Tuple[str, ...] = ()

    def __hash__(self):
        return hash((self.name, tuple(self.types.items()), tuple(self.predicates), tuple(self.actions)))

    def has_type(self, type_name: str) -> bool:
        return type_name == ROOT_TYPE or type_name in self.types

    def parent(self, type_name: str) -> str:
        if type_name == ROOT_TYPE:
            return ROOT_TYPE
        try:
            return self.types[type_name]
        except KeyError:
            raise UnknownTypeError(type_name) from None

    def ancestors(self, type_name: str) -> Iterator[str]:
        """Yields the given type followed by each of its ancestors, ending with ``object``"""
        yield type_name
        while type_name != ROOT_TYPE:
            type_name = self.parent(type_name)
            yield type_name

    def is_subtype(self, type_name: str, parent: str) -> bool:
        return parent == ROOT_TYPE or parent in self.ancestors(type_name)

    @cached_property
    def _children(self) -> Dict[str, List[str]]:
        children = {}
        for child, parent in self.types.items():
            children.setdefault(parent, []).append(child)
        return children

    def subtypes(self, type_name: str) -> Set[str]:
        """The given type and every type below it"""
        if not self.has_type(type_name):
            raise UnknownTypeError(type_name)
        found, pending = set(), [type_name]
        while pending:
            found.add(current := pending.pop())
            pending.extend(self._children.get(current, ()))
        return found

    def predicate(self, name: str) -> Predicate:
        try:
            return self.predicates[name]
        except KeyError:
            raise PddlSemanticError(f'unknown predicate: {name}') from None

    @cached_property
    def graph_predicates(self) -> Dict[str, Predicate]:
        """Predicates with arity 1 or 2, which are the ones mirrored by knowledge graph triplets"""
        return {name: pred for name, pred in self.predicates.items() if 1 <= pred.arity <= 2}


@dataclass(frozen=True)
class Problem:
    name: str
    domain_name: str
    objects: Mapping[str, str] = field(default_factory=dict)                # name -> type, in declaration order
    init: FrozenSet[Atom] = frozenset()
    goal: GoalFormula = GoalAnd()

    def __hash__(self):
        return hash((self.name, self.domain_name, tuple(self.objects.items()), self.init))

    def objects_of_type(self, domain: Domain, type_name: str) -> List[str]:
        types = domain.subtypes(type_name)
        return [name for name, obj_type in self.objects.items() if obj_type in types]


def _format_typed(params: TypedParams) -> str:
    return ' '.join(f'{name} - {type_name}' for name, type_name in params)
