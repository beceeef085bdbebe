"""
Plan text format: one numbered step per line, e.g.::

    1) (move_to_room robot living_room bathroom)
    2) (turn_off_faucet bathroom_sink bathroom robot)

:author: Doug Skrypa
"""

import re
from typing import Iterable, List, Tuple, Union

from ..core.exceptions import PlannerError
from ..core.utils import normalize_name
from .grounding import GroundAction

__all__ = ['Step', 'format_plan', 'parse_plan']

Step = Tuple[str, Tuple[str, ...]]
STEP_MATCH = re.compile(r'^\s*(?:(\d+)\s*[).:]\s*)?\(\s*([^()\s]+)((?:\s+[^()\s]+)*)\s*\)\s*(?:;.*)?$').match


def _step(step: Union[GroundAction, Step]) -> Step:
    if isinstance(step, GroundAction):
        return step.name, step.args
    return step


def format_plan(steps: Iterable[Union[GroundAction, Step]]) -> str:
    lines = []
    for i, step in enumerate(steps, 1):
        name, args = _step(step)
        lines.append(f'{i}) ({" ".join((name, *args))})')
    return '\n'.join(lines)


def parse_plan(text: str) -> List[Step]:
    """
    Parse numbered (``1) (a x y)``) or bare (``(a x y)``) plan lines.  Blank lines and ``;`` comments are ignored, so
    plan files written by common external planners are accepted too.
    """
    steps = []
    for line_no, line in enumerate(text.splitlines(), 1):
        if not (stripped := line.strip()) or stripped.startswith(';'):
            continue
        if not (m := STEP_MATCH(stripped)):
            raise PlannerError(f'Invalid plan step on line {line_no}: {stripped!r}')
        steps.append((normalize_name(m.group(2)), tuple(normalize_name(a) for a in m.group(3).split())))
    return steps
