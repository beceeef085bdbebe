"""
Human-caused events: random state changes with a natural-language rendering and the matching ground-truth delta.

Renderings come from small template grammars with synonym variation.  Some events are reported as two changes in
one sentence, and some only describe the result ("Gary is in the kitchen now").

:author: Doug Skrypa
"""

import logging
import random
from dataclasses import dataclass, field
from typing import Tuple, List, Optional, Mapping, Any, Set, Callable, Dict

from ..core.exceptions import GraphError, SimulationError
from ..graph.world import Triplet, GraphDelta, WorldGraph, apply_delta
from .world import describe, query_entity, room_of, location_of, entities_of, SHELF_LEVELS

__all__ = ['SimEvent', 'EventGenerator', 'query_graph_for']
log = logging.getLogger(__name__)

MOVE_VERBS = ('went to', 'walked to', 'moved to', 'headed to')
PLACE_VERBS = ('placed', 'put', 'left', 'set')
PICK_VERBS = ('picked up', 'took', 'grabbed')
ON_VERBS = ('turned on', 'switched on')
OFF_VERBS = ('turned off', 'switched off')


@dataclass(frozen=True)
class SimEvent:
    index: int
    text: str
    delta: GraphDelta
    mentioned: Tuple[str, ...]                  # entity names in the order they are mentioned
    kinds: Tuple[str, ...]
    query_graph: Mapping[str, Any] = field(default_factory=dict, compare=False, repr=False)

    def __str__(self):
        return f'#{self.index} {self.text}'


@dataclass
class _Draft:
    text: str
    removals: Set[Triplet]
    additions: Set[Triplet]
    mentioned: List[str]
    relations: List[Tuple[str, str, str]]
    kind: str


def query_graph_for(graph: WorldGraph, mentioned: List[str], relations: List[Tuple[str, str, str]]) -> Dict[str, Any]:
    """The query graph a perfect extraction would produce for text mentioning the given entities"""
    index = {name: i for i, name in enumerate(mentioned)}
    return {
        'entities': [query_entity(graph.entity(name)) for name in mentioned],
        'relations': [[index[s], label, index[o]] for s, label, o in relations if s in index and o in index],
    }


def _sentence(text: str) -> str:
    return text[0].upper() + text[1:]


def _join(first: str, second: str) -> str:
    if second.startswith(('The ', 'Someone ')):
        second = second[0].lower() + second[1:]
    return f'{first[:-1]}, and {second}'


class EventGenerator:
    def __init__(self, rng: random.Random, multi_event_rate: float = 0.2):
        self.rng = rng
        self.multi_event_rate = multi_event_rate
        self._kinds: Dict[str, Callable[[WorldGraph, Set[str]], Optional[_Draft]]] = {
            'move': self._move,
            'place': self._place,
            'pick': self._pick,
            'give': self._give,
            'switch': self._switch,
            'dish': self._dish,
        }

    def generate(self, graph: WorldGraph, index: int) -> SimEvent:
        """Generate an event whose delta applies cleanly to the given graph"""
        if (first := self._draft(graph, set())) is None:
            raise SimulationError(f'No event can be generated for {graph!r}')
        drafts = [first]
        if self.rng.random() < self.multi_event_rate:
            after = apply_delta(graph, GraphDelta(first.removals, first.additions))
            if second := self._draft(after, set(first.mentioned)):
                drafts.append(second)

        removals, additions = set(), set()
        for draft in drafts:
            removals |= draft.removals - additions
            additions = (additions - draft.removals) | draft.additions
        delta = GraphDelta(removals, additions)
        try:
            apply_delta(graph, delta)
        except GraphError as e:
            log.debug(f'Discarding combined event: {e}')
            drafts, delta = [first], GraphDelta(first.removals, first.additions)

        text = drafts[0].text if len(drafts) == 1 else _join(drafts[0].text, drafts[1].text)
        mentioned = list(dict.fromkeys(name for draft in drafts for name in draft.mentioned))
        relations = [rel for draft in drafts for rel in draft.relations]
        return SimEvent(
            index, text, delta, tuple(mentioned), tuple(d.kind for d in drafts),
            query_graph_for(graph, mentioned, relations),
        )

    def _draft(self, graph: WorldGraph, exclude: Set[str]) -> Optional[_Draft]:
        kinds = list(self._kinds)
        self.rng.shuffle(kinds)
        for kind in kinds:
            if draft := self._kinds[kind](graph, exclude):
                return draft
        return None

    # region Helpers

    def _choice(self, values):
        return self.rng.choice(sorted(values)) if values else None

    def _persons(self, graph: WorldGraph, exclude: Set[str]) -> List[str]:
        return [p for p in entities_of(graph, 'person') if p not in exclude]

    @staticmethod
    def _held_by(graph: WorldGraph, person: str) -> List[str]:
        return sorted(t.subject for t in graph.incident(person) if t.predicate == 'in_person_hand')

    def _describe(self, graph: WorldGraph, name: str) -> str:
        return describe(graph.entity(name), self.rng)

    def _move_prefix(self, graph: WorldGraph, person: str, room: str, draft: _Draft) -> str:
        """Move the person to the room if needed; returns the text to put before the next verb"""
        if (current := room_of(graph, person)) == room:
            return ''
        draft.removals.add(Triplet(person, 'person_in_room', current))
        draft.additions.add(Triplet(person, 'person_in_room', room))
        draft.mentioned.append(room)
        draft.relations.append((person, 'in', room))
        return f'{self.rng.choice(MOVE_VERBS)} {self._describe(graph, room)} and '

    # endregion

    # region Event kinds

    def _move(self, graph: WorldGraph, exclude: Set[str]) -> Optional[_Draft]:
        if not (person := self._choice(self._persons(graph, exclude))):
            return None
        current = room_of(graph, person)
        if not (room := self._choice(set(entities_of(graph, 'room')) - {current})):
            return None
        name, where = self._describe(graph, person), self._describe(graph, room)
        if self.rng.random() < 0.25:
            text = f'{name} is in {where} now.'
        else:
            text = f'{name} {self.rng.choice(MOVE_VERBS)} {where}.'
        removals = {Triplet(person, 'person_in_room', current)}
        additions = {Triplet(person, 'person_in_room', room)}
        return _Draft(text, removals, additions, [person, room], [(person, 'in', room)], 'move')

    def _place(self, graph: WorldGraph, exclude: Set[str]) -> Optional[_Draft]:
        holders = [p for p in self._persons(graph, exclude) if self._held_by(graph, p)]
        if not (person := self._choice(holders)):
            return None
        item = self.rng.choice(self._held_by(graph, person))
        targets = entities_of(graph, 'table', 'shelf')
        if graph.entity(item).type == 'food':
            targets += entities_of(graph, 'fridge')
        if not (target := self._choice(set(targets) - exclude)):
            return None

        draft = _Draft('', {Triplet(item, 'in_person_hand', person)}, set(), [person], [], 'place')
        prefix = self._move_prefix(graph, person, room_of(graph, target), draft)
        target_type = graph.entity(target).type
        draft.mentioned += [item, target]
        item_text, target_text = self._describe(graph, item), self._describe(graph, target)
        if target_type == 'fridge':
            draft.additions.add(Triplet(item, 'in_fridge', target))
            action = f'put {item_text} in {target_text}'
        elif target_type == 'shelf':
            level = self.rng.choice(SHELF_LEVELS)
            draft.additions |= {Triplet(item, 'placed_at_shelf', target), Triplet(item, 'on_shelf_level', level)}
            draft.mentioned.append(level)
            draft.relations.append((item, 'on level', level))
            action = f'{self.rng.choice(PLACE_VERBS)} {item_text} on {describe(graph.entity(level))} of {target_text}'
        else:
            draft.additions.add(Triplet(item, 'placed_at_table', target))
            action = f'{self.rng.choice(PLACE_VERBS)} {item_text} on {target_text}'
        draft.relations.append((item, 'in' if target_type == 'fridge' else 'on', target))
        draft.text = f'{self._describe(graph, person)} {prefix}{action}.'
        return draft

    def _pick(self, graph: WorldGraph, exclude: Set[str]) -> Optional[_Draft]:
        if not (person := self._choice(self._persons(graph, exclude))):
            return None
        surfaces = ('placed_at_table', 'placed_at_shelf', 'in_fridge')
        placed = {t.subject: t.object for t in graph.triplets if t.predicate in surfaces and t.subject not in exclude}
        if not (item := self._choice(placed)):
            return None
        target = placed[item]
        additions = {Triplet(item, 'in_person_hand', person)}
        draft = _Draft('', set(location_of(graph, item)), additions, [person], [], 'pick')
        prefix = self._move_prefix(graph, person, room_of(graph, target), draft)
        draft.mentioned += [item, target]
        draft.relations.append((item, 'held by', person))
        verb = self.rng.choice(PICK_VERBS)
        item_text, target_text = self._describe(graph, item), self._describe(graph, target)
        draft.text = f'{self._describe(graph, person)} {prefix}{verb} {item_text} from {target_text}.'
        return draft

    def _give(self, graph: WorldGraph, exclude: Set[str]) -> Optional[_Draft]:
        pairs = []
        for giver in self._persons(graph, exclude):
            if not self._held_by(graph, giver):
                continue
            room = room_of(graph, giver)
            pairs += [
                (giver, other) for other in self._persons(graph, exclude)
                if other != giver and room_of(graph, other) == room
            ]
        if not pairs:
            return None
        giver, receiver = pairs[self.rng.randrange(len(pairs))]
        item = self.rng.choice(self._held_by(graph, giver))
        text = (
            f'{self._describe(graph, giver)} gave {self._describe(graph, item)} to {self._describe(graph, receiver)}.'
        )
        removals = {Triplet(item, 'in_person_hand', giver)}
        additions = {Triplet(item, 'in_person_hand', receiver)}
        return _Draft(text, removals, additions, [giver, item, receiver], [(item, 'held by', receiver)], 'give')

    def _switch(self, graph: WorldGraph, exclude: Set[str]) -> Optional[_Draft]:
        properties = {'light': 'light_on', 'tv': 'tv_on', 'sink': 'faucet_on'}
        fixtures = [f for f in entities_of(graph, *properties) if f not in exclude]
        if not (fixture := self._choice(fixtures)):
            return None
        prop = properties[graph.entity(fixture).type]
        triplet = Triplet(fixture, prop)
        is_on = triplet in graph
        thing = self._describe(graph, fixture)
        if prop == 'faucet_on':
            thing = f'the faucet of {thing}'

        if self.rng.random() < 0.3:
            text = _sentence(f'{thing} is {"off" if is_on else "on"} now.')
        else:
            who = self._choice(self._persons(graph, exclude))
            actor = self._describe(graph, who) if who and self.rng.random() < 0.5 else 'Someone'
            verb = self.rng.choice(OFF_VERBS if is_on else ON_VERBS)
            text = f'{actor} {verb} {thing}.'
        if is_on:
            return _Draft(text, {triplet}, set(), [fixture], [], 'switch')
        return _Draft(text, set(), {triplet}, [fixture], [], 'switch')

    def _dish(self, graph: WorldGraph, exclude: Set[str]) -> Optional[_Draft]:
        if not (dish := self._choice(set(entities_of(graph, 'dish')) - exclude)):
            return None
        dirty, full = Triplet(dish, 'dirty'), Triplet(dish, 'container_full')
        options = [
            ('washed', {dirty}, set()) if dirty in graph else ('used', set(), {dirty}),
            ('emptied', {full}, set()) if full in graph else ('filled', set(), {full}),
        ]
        verb, removals, additions = options[self.rng.randrange(2)]
        person = self._choice(self._persons(graph, exclude))
        actor = self._describe(graph, person) if person else 'Someone'
        suffix = ' with water' if verb == 'filled' else ''
        text = f'{actor} {verb} {self._describe(graph, dish)}{suffix}.'
        mentioned = [person, dish] if person else [dish]
        return _Draft(text, removals, additions, mentioned, [], 'dish')

    # endregion
