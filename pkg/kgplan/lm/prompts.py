"""
Prompt templates and the bundles rendered from them.

Templates are plain-text files with ``{{section}}`` placeholders.  A line that holds nothing but the placeholder of an
empty section is dropped from the rendered text.

:author: Doug Skrypa
"""

import logging
import re
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Tuple, Mapping, Iterable, Optional, Union

from ..graph.world import Entity, Triplet
from ..pddl.model import Domain

__all__ = [
    'TEMPLATE_DIR', 'TEMPLATE_UPDATE', 'TEMPLATE_GOAL', 'TEMPLATE_QUERY_GRAPH', 'TEMPLATE_ENTITY_SELECTION',
    'Template', 'PromptBundle', 'build_prompt', 'format_entities', 'format_context', 'format_domain',
    'format_errors',
]
log = logging.getLogger(__name__)

TEMPLATE_DIR = Path(__file__).resolve().parent.joinpath('templates')
TEMPLATE_UPDATE = 'update'
TEMPLATE_GOAL = 'goal'
TEMPLATE_QUERY_GRAPH = 'query_graph'
TEMPLATE_ENTITY_SELECTION = 'entity_selection'
PLACEHOLDER = re.compile(r'\{\{(\w+)\}\}')


@dataclass(frozen=True)
class Template:
    id: str
    text: str

    def __post_init__(self):
        names = PLACEHOLDER.findall(self.text)
        if len(names) != len(set(names)):
            raise ValueError(f'Template {self.id!r} repeats a placeholder: {names}')

    @property
    def sections(self) -> Tuple[str, ...]:
        return tuple(PLACEHOLDER.findall(self.text))

    @classmethod
    def load(cls, template_id: str, directory: Union[str, Path, None] = None) -> 'Template':
        path = Path(directory or TEMPLATE_DIR).joinpath(f'{template_id}.txt')
        return cls(template_id, path.read_text('utf-8'))

    def render(self, sections: Mapping[str, str]) -> str:
        if unknown := set(sections).difference(self.sections):
            raise ValueError(f'Unknown section(s) for template {self.id!r}: {", ".join(sorted(unknown))}')

        lines = []
        for line in self.text.splitlines():
            if (m := PLACEHOLDER.fullmatch(line.strip())) and not sections.get(m.group(1)):
                continue
            lines.append(PLACEHOLDER.sub(lambda n: sections.get(n.group(1)) or '', line))
        rendered = '\n'.join(lines)
        return rendered + '\n' if self.text.endswith('\n') else rendered


@lru_cache(20)
def _template(template_id: str) -> Template:
    return Template.load(template_id)


@dataclass(frozen=True)
class PromptBundle:
    template_id: str
    sections: Tuple[Tuple[str, str], ...]     # in the template's section order
    rendered: str
    attempt: int = 1

    def section(self, name: str) -> str:
        return dict(self.sections).get(name, '')


def build_prompt(template: Union[str, Template], attempt: int = 1, **sections: Optional[str]) -> PromptBundle:
    if isinstance(template, str):
        template = _template(template)
    filled = {k: v for k, v in sections.items() if v}
    rendered = template.render(filled)
    ordered = tuple((name, filled[name]) for name in template.sections if name in filled)
    return PromptBundle(template.id, ordered, rendered, attempt)


# region Section formatting


def format_entities(entities: Iterable[Entity]) -> str:
    lines = []
    for entity in sorted(entities, key=lambda e: e.name):
        attrs = ', '.join(f'{k}={v}' for k, v in entity.attributes)
        lines.append(f'{entity.name} - {entity.type}' + (f' ({attrs})' if attrs else ''))
    return '\n'.join(lines)


def format_context(triplets: Iterable[Triplet]) -> str:
    return '\n'.join(map(str, sorted(triplets)))


def format_domain(domain: Domain, types: bool = False) -> str:
    lines = []
    if types:
        lines.extend(f'(type {child} - {parent})' for child, parent in domain.types.items())
    lines.extend(str(predicate) for predicate in domain.graph_predicates.values())
    return '\n'.join(lines)


def format_errors(errors: Iterable[str]) -> str:
    errors = list(errors)
    if not errors:
        return ''
    body = '\n'.join(f'- {error}' for error in errors)
    return f'\nYour previous answers had the following problems; correct them:\n{body}'


# endregion
