"""
Deterministic generation of a simulated world with its interleaved event and task streams.

:author: Doug Skrypa
"""

import logging
import random
from dataclasses import dataclass
from typing import Tuple, Union, Iterator, Optional, List

from ..core.utils import stable_hash
from ..graph.world import WorldGraph, apply_delta
from ..lm.backends import TruthEntry, TruthBook
from ..pddl.model import Domain
from ..planner.search import PlannerConfig
from .events import SimEvent, EventGenerator
from .tasks import SimTask, TaskGenerator
from .world import WorldSpec, generate_world

__all__ = ['Simulation', 'SimStep', 'generate', 'world_hash', 'truth_entry']
log = logging.getLogger(__name__)

SimStep = Union[SimEvent, SimTask]


def world_hash(graph: WorldGraph) -> str:
    entities = sorted((e.name, e.type, list(map(list, e.attributes))) for e in graph.entities.values())
    return stable_hash({'entities': entities, 'triplets': sorted(map(str, graph.triplets))})


def truth_entry(step: SimStep) -> TruthEntry:
    """What a perfect model answers for the given step"""
    selected = tuple(step.mentioned)
    if isinstance(step, SimEvent):
        return TruthEntry(step.text, step.delta, dict(step.query_graph), selected)
    return TruthEntry(step.text, None, dict(step.query_graph), selected, step.goal)


@dataclass(frozen=True)
class Simulation:
    spec: WorldSpec
    world: WorldGraph                       # the initial ground-truth world
    steps: Tuple[SimStep, ...]

    def __repr__(self):
        return f'<{self.__class__.__name__}[seed={self.spec.seed}](events={len(self.events)}, tasks={len(self.tasks)})>'

    @property
    def domain(self) -> Domain:
        return self.world.domain

    @property
    def events(self) -> List[SimEvent]:
        return [s for s in self.steps if isinstance(s, SimEvent)]

    @property
    def tasks(self) -> List[SimTask]:
        return [s for s in self.steps if isinstance(s, SimTask)]

    def truth_states(self) -> Iterator[Tuple[SimStep, WorldGraph, WorldGraph]]:
        """Yield (step, ground truth before the step, ground truth after it)"""
        truth = self.world
        for step in self.steps:
            delta = step.delta if isinstance(step, SimEvent) else step.effects
            after = apply_delta(truth, delta) if delta else truth
            yield step, truth, after
            truth = after

    def truth_book(self) -> TruthBook:
        """
        Ground truth for every step.  Steps with identical text share one entry (the latest); runners that need the
        answer for a specific occurrence should add :func:`truth_entry` to their own book just before the step.
        """
        return TruthBook(map(truth_entry, self.steps))

    def stream_hash(self) -> str:
        """Hash of the world and both streams; identical for every run generated from the same spec"""
        steps = []
        for step in self.steps:
            if isinstance(step, SimEvent):
                delta = step.delta
                steps.append(['event', step.text, sorted(map(str, delta.removals)), sorted(map(str, delta.additions))])
            else:
                steps.append(['task', step.text, step.goal, [str(a) for a in step.plan]])
        return stable_hash({'world': world_hash(self.world), 'steps': steps})


def _schedule(events: int, tasks: int) -> List[str]:
    """Spread the tasks evenly through the events"""
    order = []
    done = 0
    for i in range(tasks):
        due = (i + 1) * events // tasks if tasks else events
        order += ['event'] * (due - done) + ['task']
        done = due
    return order + ['event'] * (events - done)


def generate(spec: WorldSpec, domain: Domain, planner_config: Optional[PlannerConfig] = None) -> Simulation:
    """
    Generate the world and the interleaved event and task streams.  Everything is derived from ``spec.seed``, so the
    same spec always yields an identical simulation.

    :raises: :class:`~kgplan.core.exceptions.SpecCapExceeded` if the spec is over a cap
    """
    spec.validate()
    rng = random.Random(spec.seed)
    world = generate_world(spec, domain, rng)
    events = EventGenerator(rng, spec.multi_event_rate)
    tasks = TaskGenerator(rng, planner_config)

    truth, steps = world, []
    for kind in _schedule(spec.events, spec.tasks):
        if kind == 'event':
            step = events.generate(truth, len(steps))
            truth = apply_delta(truth, step.delta)
        else:
            step = tasks.generate(truth, len(steps))
            if step.effects:
                truth = apply_delta(truth, step.effects)
        steps.append(step)

    sim = Simulation(spec, world, tuple(steps))
    log.info(f'Generated {sim!r} with {len(world.entities)} entities and {len(world)} triplets')
    return sim
