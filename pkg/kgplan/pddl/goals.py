"""
Goal grounding: expands ``forall`` quantifiers over typed objects into a flat conjunction of ground literals.

:author: Doug Skrypa
"""

import logging
from itertools import product
from typing import Mapping, FrozenSet, Iterator, Dict, Iterable

from ..core.exceptions import UnknownTypeError
from .model import Literal, GoalAnd, GoalForall, GoalFormula, Domain, Atom

__all__ = ['ground_goal', 'goal_holds', 'goal_objects']
log = logging.getLogger(__name__)


def ground_goal(goal: GoalFormula, objects: Mapping[str, str], domain: Domain) -> FrozenSet[Literal]:
    """
    :param goal: A parsed goal formula
    :param objects: Mapping of object name to type; ``forall`` variables range over objects of the type or a subtype
    :param domain: The domain that declares the quantified types
    :return: The set of ground literals that must all hold for the goal to be satisfied
    """
    return frozenset(_ground(goal, objects, domain, {}))


def _ground(
    goal: GoalFormula, objects: Mapping[str, str], domain: Domain, binding: Dict[str, str]
) -> Iterator[Literal]:
    if isinstance(goal, Literal):
        yield goal.substitute(binding)
    elif isinstance(goal, GoalAnd):
        for part in goal.parts:
            yield from _ground(part, objects, domain, binding)
    elif isinstance(goal, GoalForall):
        domains = []
        for var, type_name in goal.variables:
            if not domain.has_type(type_name):
                raise UnknownTypeError(type_name)
            types = domain.subtypes(type_name)
            domains.append([name for name, obj_type in objects.items() if obj_type in types])
        names = [var for var, _ in goal.variables]
        for values in product(*domains):
            yield from _ground(goal.body, objects, domain, {**binding, **dict(zip(names, values))})
    else:
        raise TypeError(f'Unexpected goal formula type: {type(goal).__name__}')


def goal_holds(literals: Iterable[Literal], state: FrozenSet[Atom]) -> bool:
    return all(lit.holds(state) for lit in literals)


def goal_objects(goal: GoalFormula) -> FrozenSet[str]:
    """Object names mentioned directly (not through a quantifier) in the goal"""
    if isinstance(goal, Literal):
        return frozenset(a for a in goal.atom.args if not a.startswith('?'))
    elif isinstance(goal, GoalAnd):
        return frozenset().union(*map(goal_objects, goal.parts))
    return goal_objects(goal.body)
