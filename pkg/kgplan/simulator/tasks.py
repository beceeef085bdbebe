"""
Tasks presented to the robot, each with a ground-truth goal, the ground-truth problem over the full world state, and
the plan the robot executes in the ground-truth world.

:author: Doug Skrypa
"""

import logging
import random
from dataclasses import dataclass, field
from typing import Tuple, Optional, Mapping, Any, List, Callable, Dict, FrozenSet

from ..core.exceptions import SimulationError, PlannerError
from ..graph.world import Triplet, GraphDelta, WorldGraph, SOURCE_PERCEPTION, to_init_atoms, from_init_atoms
from ..pddl.model import Problem
from ..pddl.parser import parse_goal
from ..planner.search import Plan, PlannerConfig, solve
from ..planner.validation import validate
from .events import query_graph_for
from .world import describe, entities_of, location_of, SHELF_LEVELS, ROBOT

__all__ = ['SimTask', 'TaskGenerator', 'resync_delta']
log = logging.getLogger(__name__)

MAX_DRAWS = 25


@dataclass(frozen=True)
class SimTask:
    index: int
    text: str
    goal: str                                   # goal formula text
    problem: Problem = field(repr=False)        # ground truth: full world state as the initial state
    plan: Plan = field(repr=False)              # the plan executed in the ground-truth world
    effects: GraphDelta = field(repr=False)     # ground-truth change caused by executing the plan
    mentioned: Tuple[str, ...] = ()
    kind: str = ''
    query_graph: Mapping[str, Any] = field(default_factory=dict, compare=False, repr=False)

    def __str__(self):
        return f'#{self.index} {self.text}'

    @property
    def touched(self) -> FrozenSet[str]:
        """Entities the executed plan involved"""
        return frozenset(arg for step in self.plan for arg in step.args)


def resync_delta(graph: WorldGraph, truth: WorldGraph, entities: FrozenSet[str]) -> GraphDelta:
    """
    The perception delta that makes every triplet incident to the given entities in ``graph`` agree with ``truth``.
    """
    def incident(g: WorldGraph):
        return {t for name in entities for t in g.incident(name)}

    ours, theirs = incident(graph), incident(truth)
    return GraphDelta(ours - theirs, theirs - ours, SOURCE_PERCEPTION)


@dataclass
class _TaskDraft:
    text: str
    goal: str
    mentioned: List[str]
    kind: str
    relations: List[Tuple[str, str, str]] = field(default_factory=list)


class TaskGenerator:
    def __init__(self, rng: random.Random, planner_config: Optional[PlannerConfig] = None):
        self.rng = rng
        self.planner_config = planner_config or PlannerConfig()
        self._kinds: Dict[str, Callable[[WorldGraph], Optional[_TaskDraft]]] = {
            'switch': self._switch,
            'bring': self._bring,
            'table': self._table,
            'shelf': self._shelf,
            'fridge': self._fridge,
            'wash': self._wash,
        }

    def generate(self, graph: WorldGraph, index: int) -> SimTask:
        """Generate a task whose goal does not hold yet and that the planner solves from the full world state"""
        for _ in range(MAX_DRAWS):
            kind = self.rng.choice(sorted(self._kinds))
            if not (draft := self._kinds[kind](graph)):
                continue
            objects = graph.objects()
            goal = parse_goal(draft.goal, graph.domain, objects)
            problem = Problem(f'truth_{index}', graph.domain.name, objects, to_init_atoms(graph.triplets), goal)
            try:
                plan = solve(graph.domain, problem, self.planner_config)
            except PlannerError as e:
                log.debug(f'Skipping {kind} task {draft.text!r}: {e}')
                continue
            if not plan:
                continue
            final = validate(graph.domain, problem, plan).final_state
            after = from_init_atoms(final, graph.domain)
            effects = GraphDelta(graph.triplets - after, after - graph.triplets, SOURCE_PERCEPTION)
            return SimTask(
                index, draft.text, draft.goal, problem, plan, effects, tuple(draft.mentioned), kind,
                query_graph_for(graph, draft.mentioned, draft.relations),
            )
        raise SimulationError(f'Unable to generate a solvable task after {MAX_DRAWS} draws')

    def _choice(self, values):
        return self.rng.choice(sorted(values)) if values else None

    def _describe(self, graph: WorldGraph, name: str) -> str:
        return describe(graph.entity(name), self.rng)

    def _movable(self, graph: WorldGraph, *types: str) -> List[str]:
        """Items of the given types that are not held by the robot"""
        held = {t.object for t in graph.incident(ROBOT) if t.predicate == 'robot_holding'}
        return [i for i in entities_of(graph, *(types or ('item',))) if i not in held]

    # region Task kinds

    def _switch(self, graph: WorldGraph) -> Optional[_TaskDraft]:
        properties = {'light': 'light_on', 'tv': 'tv_on', 'sink': 'faucet_on'}
        if not (fixture := self._choice(entities_of(graph, *properties))):
            return None
        prop = properties[graph.entity(fixture).type]
        is_on = Triplet(fixture, prop) in graph
        thing = self._describe(graph, fixture)
        if prop == 'faucet_on':
            thing = f'the faucet of {thing}'
        verb = self.rng.choice(('Turn', 'Switch', 'Please turn'))
        text = f'{verb} {"off" if is_on else "on"} {thing}.'
        goal = f'(not ({prop} {fixture}))' if is_on else f'({prop} {fixture})'
        return _TaskDraft(text, goal, [fixture], 'switch')

    def _bring(self, graph: WorldGraph) -> Optional[_TaskDraft]:
        if not (person := self._choice(entities_of(graph, 'person'))):
            return None
        held = {t.subject for t in graph.incident(person) if t.predicate == 'in_person_hand'}
        if not (item := self._choice(set(self._movable(graph)) - held)):
            return None
        who, what = self._describe(graph, person), self._describe(graph, item)
        text = f'Bring {what} to {who}.' if self.rng.random() < 0.5 else f'Give {who} {what}.'
        return _TaskDraft(text, f'(in_person_hand {item} {person})', [item, person], 'bring', [(item, 'to', person)])

    def _table(self, graph: WorldGraph) -> Optional[_TaskDraft]:
        if not (table := self._choice(entities_of(graph, 'table'))):
            return None
        there = {t.subject for t in graph.incident(table) if t.predicate == 'placed_at_table'}
        if not (item := self._choice(set(self._movable(graph)) - there)):
            return None
        text = f'Put {self._describe(graph, item)} on {self._describe(graph, table)}.'
        return _TaskDraft(text, f'(placed_at_table {item} {table})', [item, table], 'table', [(item, 'on', table)])

    def _shelf(self, graph: WorldGraph) -> Optional[_TaskDraft]:
        if not (shelf := self._choice(entities_of(graph, 'shelf'))):
            return None
        level = self.rng.choice(SHELF_LEVELS)
        located = set()
        for item in self._movable(graph):
            if {Triplet(item, 'placed_at_shelf', shelf), Triplet(item, 'on_shelf_level', level)} <= graph.triplets:
                located.add(item)
        if not (item := self._choice(set(self._movable(graph)) - located)):
            return None
        level_text = describe(graph.entity(level))
        text = f'Put {self._describe(graph, item)} on {level_text} of {self._describe(graph, shelf)}.'
        goal = f'(and (placed_at_shelf {item} {shelf}) (on_shelf_level {item} {level}))'
        return _TaskDraft(text, goal, [item, level, shelf], 'shelf', [(item, 'on', shelf), (item, 'on level', level)])

    def _fridge(self, graph: WorldGraph) -> Optional[_TaskDraft]:
        if not (fridge := self._choice(entities_of(graph, 'fridge'))):
            return None
        inside = {t.subject for t in graph.incident(fridge) if t.predicate == 'in_fridge'}
        if not (food := self._choice(set(self._movable(graph, 'food')) - inside)):
            return None
        text = f'Put {self._describe(graph, food)} in {self._describe(graph, fridge)}.'
        return _TaskDraft(text, f'(in_fridge {food} {fridge})', [food, fridge], 'fridge', [(food, 'in', fridge)])

    def _wash(self, graph: WorldGraph) -> Optional[_TaskDraft]:
        if not entities_of(graph, 'sink'):
            return None
        dirty = [d for d in entities_of(graph, 'dish') if Triplet(d, 'dirty') in graph and location_of(graph, d)]
        if not (dish := self._choice(dirty)):
            return None
        verb = self.rng.choice(('Wash', 'Please wash', 'Clean'))
        return _TaskDraft(f'{verb} {self._describe(graph, dish)}.', f'(not (dirty {dish}))', [dish], 'wash')

    # endregion
