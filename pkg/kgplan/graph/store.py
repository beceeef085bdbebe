"""
Guarded holder for the current world graph.

Readers take immutable snapshots; writers are serialized by a lock and swap in a new snapshot only once a delta has
been fully applied, so a reader never observes a partial delta.

:author: Doug Skrypa
"""

import logging
from collections import deque
from threading import RLock
from typing import Deque, Tuple, Optional

from ..core.constants import DEFAULT_HISTORY_LIMIT
from ..core.exceptions import GraphError
from .world import WorldGraph, GraphDelta, apply_delta

__all__ = ['GraphStore', 'StaleSnapshotError']
log = logging.getLogger(__name__)


class StaleSnapshotError(GraphError):
    def __init__(self, expected: int, actual: int):
        super().__init__(expected, actual)
        self.expected = expected
        self.actual = actual

    def __str__(self):
        return f'Graph changed while the update was computed (expected revision={self.expected}, found {self.actual})'


class GraphStore:
    """
    :param graph: The initial snapshot
    :param history_limit: Number of most recent deltas to keep (None keeps all of them)
    """

    def __init__(self, graph: WorldGraph, history_limit: Optional[int] = DEFAULT_HISTORY_LIMIT):
        self._lock = RLock()
        self._graph = graph
        self._history: Deque[GraphDelta] = deque(maxlen=history_limit)

    def __repr__(self):
        return f'<{self.__class__.__name__}[{self._graph!r}, deltas={len(self._history)}]>'

    @property
    def snapshot(self) -> WorldGraph:
        return self._graph

    @property
    def lock(self) -> RLock:
        return self._lock

    @property
    def history(self) -> Tuple[GraphDelta, ...]:
        return tuple(self._history)

    def apply(self, delta: GraphDelta) -> WorldGraph:
        """Strictly apply the given delta to the current snapshot; deltas are applied in arrival order."""
        with self._lock:
            graph = self._graph
            self._graph = apply_delta(graph, delta)
            self._record(delta, graph.revision)
            return self._graph

    def commit(self, graph: WorldGraph, delta: GraphDelta, base_revision: Optional[int] = None) -> WorldGraph:
        """
        Swap in a graph that was computed from an earlier snapshot.

        :param graph: The new graph
        :param delta: The delta that produced it, recorded in the history
        :param base_revision: Revision of the snapshot the graph was derived from; if the store has moved on since then,
          :class:`StaleSnapshotError` is raised and nothing changes
        """
        with self._lock:
            current = self._graph.revision
            if base_revision is not None and base_revision != current:
                raise StaleSnapshotError(base_revision, current)
            self._graph = graph
            self._record(delta, current)
            return graph

    def _record(self, delta: GraphDelta, revision: int):
        self._history.append(GraphDelta(delta.removals, delta.additions, delta.source, revision))
        log.debug(f'Recorded {delta.source} delta at {revision=}; now at revision={self._graph.revision}')
