"""
Completion for the planning shell.  Completes command names after ``!`` and entity names everywhere else.

:author: Doug Skrypa
"""

import logging
from typing import Iterable, List

from prompt_toolkit.completion import CompleteEvent, Completer, Completion
from prompt_toolkit.document import Document

from ..graph.world import WorldGraph
from .commands import ShellCommand, COMMAND_PREFIX

__all__ = ['EntityCompleter']
log = logging.getLogger(__name__)


class EntityCompleter(Completer):
    def __init__(self):
        self._names: List[str] = []
        self._revision = None

    def __call__(self, graph: WorldGraph):
        if graph.revision != self._revision:
            self._names = sorted(graph.entities)
            self._revision = graph.revision
        return self

    def get_completions(self, document: Document, complete_event: CompleteEvent) -> Iterable[Completion]:
        text = document.text_before_cursor
        if text.endswith(' ') or not text:
            return

        last = text.split()[-1]
        if text == last and last.startswith(COMMAND_PREFIX):
            prefix = last[len(COMMAND_PREFIX):]
            for name in sorted(ShellCommand._commands):
                if name.startswith(prefix):
                    yield Completion(COMMAND_PREFIX + name, -len(last))
            return

        lower_last = last.lower()
        for name in self._names:
            if name.startswith(lower_last):
                yield Completion(name, -len(last))
