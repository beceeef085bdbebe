import logging
from argparse import REMAINDER
from pathlib import Path
from typing import Sequence, Optional

from ...graph.world import format_triplets
from ..argparse import ShellArgParser
from ..exceptions import ArgError
from ..printer import Printer
from .base import ShellCommand, save_graph

log = logging.getLogger(__name__)


class Inspect(ShellCommand, cmd='inspect'):
    parser = ShellArgParser('inspect', description='Show the graph summary, or the given entities and their triplets')
    parser.add_argument('entities', nargs='*', help='Entity names (default: a summary of the whole graph)')
    parser.add_argument('--type', '-t', help='List the entities of the given type (including subtypes)')
    parser.add_format_arg()

    def __call__(self, entities: Sequence[str], type: Optional[str] = None, out_fmt: str = 'plain'):  # noqa
        graph = self.agent.graph
        printer = Printer(out_fmt)
        if type:
            printer.pprint(sorted(e.name for e in graph.entities_of_type(type)), file=self.stdout)
        elif entities:
            for name in entities:
                entity = graph.entity(name)
                info = {
                    'entity': entity.name,
                    'type': entity.type,
                    'attributes': dict(entity.attributes),
                    'triplets': [str(t) for t in sorted(graph.incident(name))],
                }
                printer.pprint(info, file=self.stdout)
        else:
            summary = {
                'domain': graph.domain.name,
                'revision': graph.revision,
                'entities': len(graph.entities),
                'triplets': len(graph.triplets),
            }
            printer.pprint(summary, file=self.stdout)


class Neighbors(ShellCommand, cmd='neighbors'):
    parser = ShellArgParser('neighbors', description='Show the triplets within the given number of hops of entities')
    parser.add_argument('entities', nargs='+', help='Entity names to start from')
    parser.add_argument('--depth', '-d', type=int, default=1, help='Number of hops')

    def __call__(self, entities: Sequence[str], depth: int = 1):
        if depth < 1:
            raise ArgError(f'{self.name}: --depth must be at least 1')
        for triplet in sorted(self.agent.graph.neighborhood(entities, depth)):
            self.print(triplet)


class Retrieve(ShellCommand, cmd='retrieve'):
    parser = ShellArgParser('retrieve', description='Show the context the configured retriever selects for some text')
    parser.add_argument('text', nargs=REMAINDER, help='An update or a task')
    parser.add_argument('--verbose', '-v', action='store_true', help='Also show retrieval diagnostics')

    def __call__(self, text: Sequence[str], verbose: bool = False):
        if not (text := ' '.join(text).strip()):
            raise ArgError(f'{self.name}: some text is required')
        result = self.agent.retriever.retrieve(self.agent.graph, text, 'retrieve')
        self.print(f'entities: {", ".join(sorted(result.entities)) or "none"}')
        self.print(f'triplets: {format_triplets(result.relevant)}')
        if verbose and result.diagnostics:
            Printer('yaml').pprint(result.diagnostics, file=self.stdout)


class Save(ShellCommand, cmd='save'):
    parser = ShellArgParser('save', description='Save the graph')
    parser.add_argument('path', nargs='?', help='Destination (default: the graph file the session was started with)')

    def __call__(self, path: Optional[str] = None):
        if not (path := path or self.env.get('graph_path')):
            raise ArgError(f'{self.name}: a path is required when the session has no graph file')
        path = Path(path).expanduser()
        save_graph(self.agent, path)
        self.print(f'Saved revision {self.agent.graph.revision} to {path}')
