"""
Query graphs: the ungrounded entities and relations mentioned by a natural-language update or task.

:author: Doug Skrypa
"""

import logging
from dataclasses import dataclass
from typing import Tuple, Optional, Mapping, Any, List, Dict

from ..core.constants import DEFAULT_RETRY_CAP
from ..core.exceptions import QueryGraphError
from ..lm.gateway import LmGateway
from ..lm.parsing import extract_json
from ..lm.prompts import build_prompt, format_errors, TEMPLATE_QUERY_GRAPH

__all__ = ['QueryEntity', 'QueryRelation', 'QueryGraph', 'extract_query_graph']
log = logging.getLogger(__name__)


@dataclass(frozen=True)
class QueryEntity:
    name: str
    attributes: Tuple[str, ...] = ()
    type_hint: Optional[str] = None

    def __str__(self):
        label = ' '.join([*self.attributes, self.name])
        return f'{label} - {self.type_hint}' if self.type_hint else label


@dataclass(frozen=True)
class QueryRelation:
    subject: int
    label: str
    object: int


@dataclass(frozen=True)
class QueryGraph:
    entities: Tuple[QueryEntity, ...] = ()
    relations: Tuple[QueryRelation, ...] = ()

    def __post_init__(self):
        n = len(self.entities)
        for rel in self.relations:
            if not (0 <= rel.subject < n and 0 <= rel.object < n):
                raise QueryGraphError(f'Relation {rel} references an entity index outside 0..{n - 1}')

    def __len__(self):
        return len(self.entities)

    def __bool__(self):
        return bool(self.entities)

    def __str__(self):
        nodes = ', '.join(f'{i}:{e}' for i, e in enumerate(self.entities))
        edges = ', '.join(f'{r.subject}-{r.label}->{r.object}' for r in self.relations)
        return f'<QueryGraph[{nodes}][{edges}]>'

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> 'QueryGraph':
        """
        Build a query graph from the model's JSON answer::

            {"entities": [{"name": "red pen", "attributes": ["red"], "type": "pen"}, ...],
             "relations": [[0, "placed on", 1], ...]}
        """
        if not isinstance(data, Mapping):
            raise QueryGraphError(f'Expected a JSON object, found {type(data).__name__}')
        try:
            raw_entities = data.get('entities') or []
            raw_relations = data.get('relations') or []
            entities = tuple(_entity(raw) for raw in raw_entities)
            relations = tuple(
                QueryRelation(int(s), str(label).strip(), int(o)) for s, label, o in raw_relations
            )
        except (TypeError, ValueError, KeyError) as e:
            raise QueryGraphError(f'Invalid query graph: {e}') from e
        return cls(entities, relations)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'entities': [
                {'name': e.name, 'attributes': list(e.attributes), 'type': e.type_hint} for e in self.entities
            ],
            'relations': [[r.subject, r.label, r.object] for r in self.relations],
        }


def _entity(raw: Any) -> QueryEntity:
    if isinstance(raw, str):
        raw = {'name': raw}
    name = str(raw['name']).strip()
    if not name:
        raise ValueError('entity name must be nonempty')
    attributes = raw.get('attributes') or ()
    if isinstance(attributes, str):
        attributes = attributes.split()
    type_hint = raw.get('type') or None
    return QueryEntity(name, tuple(str(a) for a in attributes), str(type_hint) if type_hint else None)


def extract_query_graph(
    gateway: LmGateway, text: str, retry_cap: int = DEFAULT_RETRY_CAP, label: Optional[str] = None
) -> QueryGraph:
    """
    Prompt the model for the query graph of the given text.  Malformed answers are re-prompted with the problem
    appended, up to ``retry_cap`` attempts.

    :raises: :class:`QueryGraphError` when every attempt was malformed
    """
    if not text.strip():
        return QueryGraph()

    errors: List[str] = []
    for attempt in range(1, retry_cap + 1):
        bundle = build_prompt(TEMPLATE_QUERY_GRAPH, attempt, text=text, errors=format_errors(errors))
        completion = gateway.complete(bundle, label)
        try:
            graph = QueryGraph.from_dict(extract_json(completion.text))
        except (QueryGraphError, ValueError) as e:
            log.debug(f'Malformed query graph on {attempt=}: {e}')
            errors.append(str(e))
        else:
            log.debug(f'Extracted {graph} from {text!r}')
            return graph

    raise QueryGraphError(f'No valid query graph after {retry_cap} attempts: {errors[-1]}')
