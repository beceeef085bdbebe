"""
Grounding of action schemas over typed objects.

:author: Doug Skrypa
"""

import logging
from dataclasses import dataclass
from math import prod
from typing import Tuple, FrozenSet, Mapping, Dict, List, Iterator, Set, Sequence

from ..core.constants import DEFAULT_GROUNDING_CAP
from ..core.exceptions import GroundingLimitExceeded, PlannerError
from ..pddl.goals import ground_goal
from ..pddl.model import Atom, ActionSchema, Domain, Problem, Literal

__all__ = ['GroundAction', 'GroundTask', 'instantiate', 'ground', 'count_groundings', 'static_predicates']
log = logging.getLogger(__name__)

State = FrozenSet[Atom]


@dataclass(frozen=True)
class GroundAction:
    name: str
    args: Tuple[str, ...]
    pre_pos: FrozenSet[Atom]
    pre_neg: FrozenSet[Atom]
    add: FrozenSet[Atom]
    delete: FrozenSet[Atom]

    def __str__(self):
        return f'({" ".join((self.name, *self.args))})'

    def __lt__(self, other: 'GroundAction'):
        return (self.name, self.args) < (other.name, other.args)

    def applicable(self, state: State) -> bool:
        return self.pre_pos <= state and self.pre_neg.isdisjoint(state)

    def apply(self, state: State) -> State:
        return (state - self.delete) | self.add


def instantiate(schema: ActionSchema, args: Sequence[str]) -> GroundAction:
    """
    Bind the schema's parameters to the given objects.  An atom that is both added and deleted is only added
    (deletes are applied before adds).
    """
    if len(args) != len(schema.params):
        raise PlannerError(f'{schema.name} takes {len(schema.params)} arguments; found {len(args)}')
    binding = {var: arg for (var, _), arg in zip(schema.params, args)}
    pre_pos = frozenset(lit.atom.substitute(binding) for lit in schema.preconditions if lit.positive)
    pre_neg = frozenset(lit.atom.substitute(binding) for lit in schema.preconditions if not lit.positive)
    add = frozenset(atom.substitute(binding) for atom in schema.add)
    delete = frozenset(atom.substitute(binding) for atom in schema.delete) - add
    return GroundAction(schema.name, tuple(args), pre_pos, pre_neg, add, delete)


@dataclass(frozen=True)
class GroundTask:
    actions: Tuple[GroundAction, ...]       # sorted by (name, args)
    init: State
    goal_pos: FrozenSet[Atom]
    goal_neg: FrozenSet[Atom]
    candidates: int = 0                     # type-compatible instantiations considered

    def __repr__(self):
        return (
            f'<{self.__class__.__name__}(actions={len(self.actions)}, init={len(self.init)},'
            f' goal=+{len(self.goal_pos)}/-{len(self.goal_neg)})>'
        )

    def goal_reached(self, state: State) -> bool:
        return self.goal_pos <= state and self.goal_neg.isdisjoint(state)

    @property
    def goal_literals(self) -> FrozenSet[Literal]:
        return frozenset(Literal(a) for a in self.goal_pos) | frozenset(Literal(a, False) for a in self.goal_neg)


def _objects_by_type(domain: Domain, objects: Mapping[str, str]) -> Dict[str, List[str]]:
    by_type = {}
    for type_name in {'object', *domain.types, *objects.values()}:
        types = domain.subtypes(type_name) if domain.has_type(type_name) else {type_name}
        by_type[type_name] = sorted(name for name, obj_type in objects.items() if obj_type in types)
    return by_type


def count_groundings(domain: Domain, objects: Mapping[str, str]) -> int:
    """Number of type-compatible instantiations of every action schema"""
    by_type = _objects_by_type(domain, objects)
    return sum(prod(len(by_type[t]) for _, t in schema.params) for schema in domain.actions.values())


def static_predicates(domain: Domain) -> Set[str]:
    """Predicates that no action adds or deletes"""
    changed = {atom.predicate for schema in domain.actions.values() for atom in (*schema.add, *schema.delete)}
    return set(domain.predicates).difference(changed)


def _achievable_predicates(domain: Domain, init: State) -> Set[str]:
    return {atom.predicate for atom in init} | {a.predicate for s in domain.actions.values() for a in s.add}


def _bindings(
    schema: ActionSchema, by_type: Dict[str, List[str]], static: Set[str], init: State
) -> Iterator[Tuple[str, ...]]:
    """
    Type-compatible argument tuples for the schema in lexicographic order.  When ``static`` is nonempty, tuples that
    violate a static precondition are skipped as soon as the precondition's variables are bound.
    """
    params = schema.params
    if not params:
        if all((lit.atom in init) == lit.positive for lit in schema.preconditions if lit.atom.predicate in static):
            yield ()
        return

    position = {var: i for i, (var, _) in enumerate(params)}
    checks: List[List[Literal]] = [[] for _ in params]
    for lit in schema.preconditions:
        if lit.atom.predicate in static:
            bound_at = max((position[a] for a in lit.atom.args if a in position), default=0)
            checks[bound_at].append(lit)

    values: List[str] = []

    def bind(i: int) -> Iterator[Tuple[str, ...]]:
        if i == len(params):
            yield tuple(values)
            return
        for obj in by_type[params[i][1]]:
            values.append(obj)
            binding = dict(zip((var for var, _ in params), values))
            if all((lit.atom.substitute(binding) in init) == lit.positive for lit in checks[i]):
                yield from bind(i + 1)
            values.pop()

    yield from bind(0)


def ground(
    domain: Domain, problem: Problem, cap: int = DEFAULT_GROUNDING_CAP, reachability: bool = False
) -> GroundTask:
    """
    Instantiate every action schema over the problem's type-compatible object tuples.

    Schemas with a positive precondition over a predicate that is neither in the initial state nor added by any
    action are dropped.  With ``reachability``, static preconditions are checked against the initial state and only
    actions reachable in the delete relaxation are kept.

    :raises: :class:`GroundingLimitExceeded` when the number of type-compatible instantiations exceeds ``cap``
    """
    objects = problem.objects
    if (count := count_groundings(domain, objects)) > cap:
        raise GroundingLimitExceeded(count, cap)

    by_type = _objects_by_type(domain, objects)
    achievable = _achievable_predicates(domain, problem.init)
    static = static_predicates(domain) if reachability else set()
    actions = []
    for name in sorted(domain.actions):
        schema = domain.actions[name]
        if missing := {l.atom.predicate for l in schema.preconditions if l.positive} - achievable:
            log.debug(f'Pruning {name}: precondition predicate(s) {", ".join(sorted(missing))} can never hold')
            continue
        actions.extend(instantiate(schema, args) for args in _bindings(schema, by_type, static, problem.init))

    if reachability:
        actions = _relaxed_reachable(actions, problem.init)

    literals = ground_goal(problem.goal, objects, domain)
    goal_pos = frozenset(lit.atom for lit in literals if lit.positive)
    goal_neg = frozenset(lit.atom for lit in literals if not lit.positive)
    task = GroundTask(tuple(sorted(actions)), problem.init, goal_pos, goal_neg, count)
    log.debug(f'Grounded {task!r} from {count:,d} candidate instantiations')
    return task


def _relaxed_reachable(actions: List[GroundAction], init: State) -> List[GroundAction]:
    reached = set(init)
    pending = list(actions)
    enabled = []
    changed = True
    while changed:
        changed = False
        waiting = []
        for action in pending:
            if action.pre_pos <= reached:
                enabled.append(action)
                if not action.add <= reached:
                    reached.update(action.add)
                    changed = True
            else:
                waiting.append(action)
        pending = waiting
    log.debug(f'Relaxed reachability kept {len(enabled)} of {len(actions)} actions')
    return enabled
