"""
Graph file persistence.

A graph file is UTF-8 JSON lines: a header record, then one record per entity (sorted by name), then one record per
triplet (sorted lexicographically).  The header carries the format version, domain name, revision, record counts, and
the sha256 of the body so that truncated or hand-edited files are detected on load.

:author: Doug Skrypa
"""

import hashlib
import json
import logging
from pathlib import Path
from typing import Union, List, Dict, Any

from ..core.constants import GRAPH_FORMAT, GRAPH_FORMAT_VERSION, V_UNKNOWN_ENTITY
from ..core.exceptions import GraphFileError, GraphVersionError, ChecksumError, ConformanceError, DeltaError
from ..core.utils import atomic_write
from ..pddl.model import Domain
from .world import WorldGraph, Entity, Triplet

__all__ = ['save', 'load', 'dumps', 'loads']
log = logging.getLogger(__name__)


def _body_lines(graph: WorldGraph) -> List[str]:
    lines = []
    for name in sorted(graph.entities):
        entity = graph.entities[name]
        record = {'entity': name, 'type': entity.type}
        if entity.attributes:
            record['attributes'] = dict(entity.attributes)
        lines.append(json.dumps(record, ensure_ascii=False, sort_keys=True))
    for triplet in sorted(graph.triplets):
        obj = True if triplet.object is None else triplet.object
        lines.append(json.dumps({'triplet': [triplet.subject, triplet.predicate, obj]}, ensure_ascii=False))
    return lines


def _checksum(lines: List[str]) -> str:
    return hashlib.sha256('\n'.join(lines).encode('utf-8')).hexdigest()


def dumps(graph: WorldGraph) -> str:
    body = _body_lines(graph)
    header = {
        'format': GRAPH_FORMAT,
        'version': GRAPH_FORMAT_VERSION,
        'domain': graph.domain.name,
        'revision': graph.revision,
        'entities': len(graph.entities),
        'triplets': len(graph.triplets),
        'checksum': _checksum(body),
    }
    return '\n'.join([json.dumps(header, sort_keys=True), *body]) + '\n'


def save(graph: WorldGraph, path: Union[str, Path]):
    """Atomically write the given graph; an interrupted save leaves the previous file intact."""
    path = Path(path).expanduser()
    path.parent.mkdir(parents=True, exist_ok=True)
    with atomic_write(path) as f:
        f.write(dumps(graph))
    log.debug(f'Saved {graph} to {path}')


def _parse_record(line: str, num: int) -> Dict[str, Any]:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as e:
        raise GraphFileError(f'Invalid record on line {num}: {e}') from e
    if not isinstance(record, dict):
        raise GraphFileError(f'Invalid record on line {num}: expected an object')
    return record


def _parse_triplet(raw: Any, num: int) -> Triplet:
    if not isinstance(raw, list) or len(raw) != 3:
        raise GraphFileError(f'Invalid triplet on line {num}: expected [subject, predicate, object]')
    subject, predicate, obj = raw
    if not (isinstance(subject, str) and isinstance(predicate, str) and (obj is True or isinstance(obj, str))):
        raise GraphFileError(f'Invalid triplet on line {num}: {raw!r}')
    return Triplet(subject, predicate, None if obj is True else obj)


def loads(text: str, domain: Domain) -> WorldGraph:
    lines = text.splitlines()
    if not lines:
        raise GraphFileError('Graph file is empty')
    header = _parse_record(lines[0], 1)
    if header.get('format') != GRAPH_FORMAT:
        raise GraphFileError(f'Not a {GRAPH_FORMAT} file (format={header.get("format")!r})')
    if (version := header.get('version')) != GRAPH_FORMAT_VERSION:
        raise GraphVersionError(f'Unsupported graph file {version=}; expected version {GRAPH_FORMAT_VERSION}')
    if (domain_name := header.get('domain')) != domain.name:
        raise ConformanceError('domain', domain_name, f'the loaded domain is {domain.name!r}')

    body = lines[1:]
    if _checksum(body) != header.get('checksum'):
        raise ChecksumError('Graph file checksum does not match its contents')

    entities, triplets = [], []
    for num, line in enumerate(body, 2):
        record = _parse_record(line, num)
        if 'entity' in record:
            if not domain.has_type(type_name := record.get('type')):
                raise ConformanceError('type', type_name, f'used by entity {record["entity"]}')
            attributes = tuple(sorted((record.get('attributes') or {}).items()))
            entities.append(Entity(record['entity'], type_name, attributes))
        elif 'triplet' in record:
            triplet = _parse_triplet(record['triplet'], num)
            if triplet.predicate not in domain.predicates:
                raise ConformanceError('predicate', triplet.predicate, f'used on line {num}')
            triplets.append(triplet)
        else:
            raise GraphFileError(f'Unrecognized record on line {num}')

    if len(entities) != header.get('entities') or len(triplets) != header.get('triplets'):
        raise ChecksumError('Graph file record counts do not match its header')

    try:
        return WorldGraph(domain, entities, triplets, header.get('revision', 0))
    except DeltaError as e:
        if e.code == V_UNKNOWN_ENTITY:
            names = {entity.name for entity in entities}
            missing = next((n for n in e.triplet.endpoints if n not in names), e.triplet.subject)
            raise ConformanceError('entity', missing, f'used by triplet {e.triplet}') from e
        raise GraphFileError(f'Invalid triplet in graph file: {e}') from e


def load(path: Union[str, Path], domain: Domain) -> WorldGraph:
    path = Path(path).expanduser()
    graph = loads(path.read_text('utf-8'), domain)
    log.debug(f'Loaded {graph} from {path}')
    return graph
