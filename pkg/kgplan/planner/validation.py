"""
Plan validation by simulation: each step must be a known action over correctly typed objects whose preconditions
hold in the state produced by the preceding steps, and the final state must satisfy the goal.

:author: Doug Skrypa
"""

import logging
from dataclasses import dataclass
from typing import Optional, Iterable, Union, Tuple, FrozenSet

from ..pddl.goals import ground_goal
from ..pddl.model import Domain, Problem, Atom
from .grounding import GroundAction, instantiate
from .plan_text import Step

__all__ = [
    'ValidationResult', 'validate', 'FAIL_UNKNOWN_ACTION', 'FAIL_BAD_ARGUMENTS', 'FAIL_PRECONDITION', 'FAIL_GOAL',
]
log = logging.getLogger(__name__)

FAIL_UNKNOWN_ACTION = 'unknown-action'
FAIL_BAD_ARGUMENTS = 'bad-arguments'
FAIL_PRECONDITION = 'precondition'
FAIL_GOAL = 'goal'


@dataclass(frozen=True)
class ValidationResult:
    valid: bool
    step: Optional[int] = None          # 1-based index of the failing step; None for goal failures
    kind: Optional[str] = None
    reason: str = ''
    final_state: FrozenSet[Atom] = frozenset()

    def __bool__(self):
        return self.valid

    def __str__(self):
        if self.valid:
            return 'valid'
        return f'invalid at step {self.step}: {self.reason}' if self.step else f'invalid: {self.reason}'


def _ground_step(
    domain: Domain, problem: Problem, step: Union[GroundAction, Step]
) -> Tuple[Optional[GroundAction], str, str]:
    name, args = (step.name, step.args) if isinstance(step, GroundAction) else step
    if (schema := domain.actions.get(name)) is None:
        return None, FAIL_UNKNOWN_ACTION, f'unknown action {name!r}'
    if len(args) != len(schema.params):
        return None, FAIL_BAD_ARGUMENTS, f'{name} takes {len(schema.params)} arguments; found {len(args)}'
    for pos, (arg, (_, expected)) in enumerate(zip(args, schema.params), 1):
        if (actual := problem.objects.get(arg)) is None:
            return None, FAIL_BAD_ARGUMENTS, f'argument {pos} of {name} is not an object: {arg}'
        if not domain.is_subtype(actual, expected):
            return None, FAIL_BAD_ARGUMENTS, f'argument {pos} of {name} must be a {expected}; {arg} is a {actual}'
    return instantiate(schema, args), '', ''


def validate(domain: Domain, problem: Problem, plan: Iterable[Union[GroundAction, Step]]) -> ValidationResult:
    """
    Simulate the plan from the problem's initial state.

    :param domain: Domain whose action schemas define the transitions
    :param problem: Initial state and goal to validate against
    :param plan: Ground actions or ``(name, args)`` steps, e.g. from :func:`parse_plan`
    :return: The first failure, or a valid result carrying the final state
    """
    state = problem.init
    for i, step in enumerate(plan, 1):
        action, kind, reason = _ground_step(domain, problem, step)
        if action is None:
            return ValidationResult(False, i, kind, reason, state)
        if missing := sorted(action.pre_pos - state):
            reason = f'{action} requires {", ".join(map(str, missing))}'
            return ValidationResult(False, i, FAIL_PRECONDITION, reason, state)
        if present := sorted(action.pre_neg & state):
            reason = f'{action} requires {", ".join(f"(not {a})" for a in present)}'
            return ValidationResult(False, i, FAIL_PRECONDITION, reason, state)
        state = action.apply(state)

    literals = ground_goal(problem.goal, problem.objects, domain)
    if unsatisfied := sorted(str(lit) for lit in literals if not lit.holds(state)):
        return ValidationResult(False, None, FAIL_GOAL, f'goal not satisfied: {", ".join(unsatisfied)}', state)
    return ValidationResult(True, final_state=state)
