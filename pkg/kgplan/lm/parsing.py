"""
Parsers for structured language-model output.

Update grammar::

    REMOVE: <triplet>, <triplet>, ...    (or "empty" / "none", or nothing)
    ADD: <triplet>, <triplet>, ...
    triplet := "(" part "," part "," part ")"

:author: Doug Skrypa
"""

import json
import logging
import re
from dataclasses import dataclass
from typing import Tuple, List, Mapping, Any, Dict

from ..core.exceptions import UpdateParseError, GoalParseError
from ..core.utils import normalize_name
from ..pddl.model import Domain, GoalFormula
from ..pddl.parser import parse_goal

__all__ = [
    'RawTriplet', 'ParsedUpdate', 'parse_update', 'render_update', 'parse_triplet_list', 'parse_goal_block',
    'extract_goal_block', 'extract_json', 'raw_to_text',
]
log = logging.getLogger(__name__)

RawTriplet = Tuple[str, str, str]
HEADER = re.compile(r'^[ \t]*(REMOVE|ADD)[ \t]*:', re.IGNORECASE | re.MULTILINE)
TRIPLET = re.compile(r'\(\s*([^(),\s][^(),]*?)\s*,\s*([^(),\s][^(),]*?)\s*,\s*([^(),\s][^(),]*?)\s*\)')
SEPARATOR = re.compile(r'[\s,]*')
EMPTY_MARKERS = {'empty', 'none', 'nothing', '-', '[]'}
CODE_FENCE = re.compile(r'^\s*```[\w-]*\s*$', re.MULTILINE)
GOAL_START = re.compile(r'\(\s*:goal\b', re.IGNORECASE)


@dataclass(frozen=True)
class ParsedUpdate:
    removals: Tuple[RawTriplet, ...] = ()
    additions: Tuple[RawTriplet, ...] = ()

    def __bool__(self):
        return bool(self.removals or self.additions)


def _span(text: str, pos: int, length: int = 40) -> str:
    return text[pos:pos + length].split('\n', 1)[0]


def parse_triplet_list(body: str, strict: bool = True) -> List[RawTriplet]:
    """
    Parse a comma-separated list of parenthesized triplets.  Names are normalized (case-folded, ``-`` and spaces
    replaced by ``_``).

    :param body: The text following a ``REMOVE:`` / ``ADD:`` header
    :param strict: Raise :class:`UpdateParseError` on anything that is not a triplet; otherwise skip it
    """
    stripped = body.strip()
    if not stripped or stripped.lower().rstrip('.') in EMPTY_MARKERS:
        return []

    triplets = []
    pos = SEPARATOR.match(body).end()
    while pos < len(body):
        if m := TRIPLET.match(body, pos):
            triplets.append(tuple(normalize_name(part) for part in m.groups()))
            pos = m.end()
        elif strict:
            raise UpdateParseError('expected a triplet like (subject, relationship, object)', _span(body, pos))
        else:
            log.debug(f'Skipping unparsable update text: {_span(body, pos)!r}')
            nxt = min((i for i in (body.find(')', pos), body.find(',', pos)) if i >= 0), default=len(body))
            pos = nxt + 1
        pos = SEPARATOR.match(body, pos).end()
    return triplets


def parse_update(completion: str, strict: bool = True) -> ParsedUpdate:
    """
    :param completion: Model output following the update grammar
    :param strict: When True, both sections must be present exactly once and no other text may appear.  When False,
      a missing section is treated as empty and unparsable triplets are skipped.
    :raises: :class:`UpdateParseError` carrying the offending span (strict mode only)
    """
    text = CODE_FENCE.sub('', completion)
    headers = list(HEADER.finditer(text))
    if strict:
        if preface := text[:headers[0].start() if headers else len(text)].strip():
            raise UpdateParseError('unexpected text before the REMOVE:/ADD: lines', _span(preface, 0))
        for name in ('REMOVE', 'ADD'):
            found = [h for h in headers if h.group(1).upper() == name]
            if len(found) != 1:
                problem = 'missing' if not found else 'repeated'
                raise UpdateParseError(f'{problem} {name}: line', _span(found[1].group(0), 0) if found else '')

    sections: Dict[str, List[RawTriplet]] = {'REMOVE': [], 'ADD': []}
    for i, header in enumerate(headers):
        end = headers[i + 1].start() if i + 1 < len(headers) else len(text)
        sections[header.group(1).upper()].extend(parse_triplet_list(text[header.end():end], strict))
    return ParsedUpdate(tuple(sections['REMOVE']), tuple(sections['ADD']))


def _format(triplets: Tuple[RawTriplet, ...]) -> str:
    return ', '.join(f'({s}, {p}, {o})' for s, p, o in triplets) if triplets else 'empty'


def render_update(parsed: ParsedUpdate) -> str:
    return f'REMOVE: {_format(parsed.removals)}\nADD: {_format(parsed.additions)}'


def extract_goal_block(completion: str) -> str:
    """Return the first balanced ``(:goal ...)`` s-expression in the given text"""
    if not (m := GOAL_START.search(completion)):
        raise GoalParseError('no (:goal ...) block found in the completion')
    depth = 0
    for pos in range(m.start(), len(completion)):
        char = completion[pos]
        if char == '(':
            depth += 1
        elif char == ')':
            depth -= 1
            if depth == 0:
                return completion[m.start():pos + 1]
    raise GoalParseError('the (:goal ...) block is never closed')


def parse_goal_block(completion: str, domain: Domain, objects: Mapping[str, str]) -> GoalFormula:
    return parse_goal(extract_goal_block(completion), domain, objects)


def extract_json(completion: str) -> Any:
    """Parse the outermost JSON object in the given text; prose or code fences around it are ignored."""
    start, end = completion.find('{'), completion.rfind('}')
    if start < 0 or end < start:
        raise ValueError('no JSON object found in the completion')
    return json.loads(completion[start:end + 1])


def raw_to_text(triplet: RawTriplet) -> str:
    return '({}, {}, {})'.format(*triplet)
