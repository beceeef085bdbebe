"""
Random household worlds for the text-based simulation.

:author: Doug Skrypa
"""

import logging
import random
from dataclasses import dataclass, asdict
from itertools import product
from typing import Tuple, List, Dict, Optional, Any, Sequence

from ..core.exceptions import SimulationError, SpecCapExceeded
from ..graph.world import Entity, Triplet, WorldGraph
from ..pddl.model import Domain

__all__ = [
    'WorldSpec', 'generate_world', 'describe', 'query_entity', 'room_of', 'location_of', 'entities_of', 'ROBOT',
    'SHELF_LEVELS',
]
log = logging.getLogger(__name__)

ROBOT = 'robot'
SHELF_LEVELS = ('first_level', 'second_level', 'third_level')
ROOM_KINDS = (
    'kitchen', 'living_room', 'bathroom', 'laundry_room', 'dining_room', 'office', 'hallway', 'study', 'garage',
    'pantry', 'guest_room', 'playroom',
)
COLORS = (
    'red', 'blue', 'green', 'yellow', 'black', 'white', 'orange', 'purple', 'pink', 'brown', 'gray', 'silver',
)
ITEM_NOUNS = {
    'pen': ('pen', 'marker', 'pencil'),
    'book': ('book', 'notebook', 'novel'),
    'food': ('apple', 'sandwich', 'yogurt', 'banana', 'cheese'),
    'dish': ('mug', 'bowl', 'plate', 'cup'),
    'phone': ('phone', 'tablet'),
}
ITEM_COUNT_FIELDS = {'pen': 'pens', 'book': 'books', 'food': 'food', 'dish': 'dishes', 'phone': 'phones'}
FIXTURE_ROOMS = {
    'table': ('kitchen', 'dining_room', 'office', 'living_room'),
    'fridge': ('kitchen', 'pantry', 'garage'),
    'sink': ('kitchen', 'bathroom', 'laundry_room'),
    'tv': ('living_room',),
    'shelf': ('office', 'study'),
}
MAX_ROOMS = len(ROOM_KINDS) + 16
MAX_ITEMS = 400
MAX_EVENTS = 10_000
MAX_TASKS = 1_000


@dataclass(frozen=True)
class WorldSpec:
    seed: int = 0
    rooms: int = 8
    persons: Tuple[str, ...] = ('gary', 'kathleen', 'alexander', 'jerry', 'maria')
    bedrooms: int = 3                   # owned by the first persons in the roster
    extra_connections: float = 0.3      # probability of each non-tree room pair being connected
    tables: int = 5
    fridges: int = 1
    sinks: int = 3
    lights: int = 8
    tvs: int = 2
    shelves: int = 3
    pens: int = 4
    books: int = 6
    food: int = 5
    dishes: int = 6
    phones: int = 2
    held_rate: float = 0.15             # fraction of items that start in someone's hand
    on_rate: float = 0.4                # lights, TVs and faucets that start on
    dirty_rate: float = 0.4
    full_rate: float = 0.2
    events: int = 50
    tasks: int = 20
    multi_event_rate: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, 'persons', tuple(self.persons))

    def validate(self):
        counts = {k: v for k, v in asdict(self).items() if isinstance(v, int) and k != 'seed'}
        if negative := sorted(k for k, v in counts.items() if v < 0):
            raise SimulationError(f'Invalid world spec - negative count(s): {", ".join(negative)}')
        if self.rooms < 1 or self.rooms > MAX_ROOMS:
            raise SpecCapExceeded(f'rooms={self.rooms} must be between 1 and {MAX_ROOMS}')
        if self.bedrooms > min(len(self.persons), self.rooms):
            raise SpecCapExceeded(f'bedrooms={self.bedrooms} exceeds the number of persons or rooms')
        if self.rooms - self.bedrooms > len(ROOM_KINDS):
            raise SpecCapExceeded(f'At most {len(ROOM_KINDS)} rooms other than bedrooms are supported')
        for kind in ('tables', 'fridges', 'sinks', 'lights', 'tvs', 'shelves'):
            if getattr(self, kind) > self.rooms:
                raise SpecCapExceeded(f'{kind}={getattr(self, kind)} exceeds rooms={self.rooms} (one per room)')
        for kind, nouns in ITEM_NOUNS.items():
            attr = ITEM_COUNT_FIELDS[kind]
            if getattr(self, attr) > len(nouns) * len(COLORS):
                raise SpecCapExceeded(f'{attr}={getattr(self, attr)} exceeds {len(nouns) * len(COLORS)} unique names')
        if self.items > MAX_ITEMS:
            raise SpecCapExceeded(f'{self.items} items exceeds the cap of {MAX_ITEMS}')
        if self.events > MAX_EVENTS or self.tasks > MAX_TASKS:
            raise SpecCapExceeded(f'At most {MAX_EVENTS} events and {MAX_TASKS} tasks are supported')
        if (self.books or self.pens or self.dishes or self.phones or self.food) and not (self.tables or self.shelves):
            raise SimulationError('Items need at least one table or shelf')
        for key in ('extra_connections', 'held_rate', 'on_rate', 'dirty_rate', 'full_rate', 'multi_event_rate'):
            if not 0 <= getattr(self, key) <= 1:
                raise SimulationError(f'Invalid {key}={getattr(self, key)} - must be in [0, 1]')

    @property
    def items(self) -> int:
        return self.pens + self.books + self.food + self.dishes + self.phones

    @classmethod
    def large(cls, seed: int = 0, **kwargs) -> 'WorldSpec':
        """A world with well over 250 triplets"""
        defaults = dict(
            rooms=12, extra_connections=0.5, tables=8, sinks=4, lights=12, tvs=3, shelves=5, pens=10, books=14,
            food=10, dishes=14, phones=6, bedrooms=4,
            persons=('gary', 'kathleen', 'alexander', 'jerry', 'maria', 'sam', 'olivia'),
        )
        return cls(seed=seed, **{**defaults, **kwargs})

    def as_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['persons'] = list(self.persons)
        return data


# region Descriptions


def describe(entity: Entity, rng: Optional[random.Random] = None) -> str:
    """Render an entity the way a person would mention it"""
    attrs = dict(entity.attributes)
    if entity.type == 'person':
        return entity.name.title()
    elif entity.type == 'robot':
        return 'the robot'
    elif entity.type == 'room':
        if owner := attrs.get('owner'):
            return f"{owner.title()}'s bedroom"
        return 'the ' + entity.display_name
    elif entity.type == 'shelf_level':
        return 'the ' + entity.display_name
    elif room := attrs.get('room'):
        kind = entity.name[len(room) + 1:].replace('_', ' ')
        if owner := attrs.get('owner'):
            room_text = f"{owner.title()}'s bedroom"
        else:
            room_text = 'the ' + room.replace('_', ' ')
        if rng is not None and rng.random() < 0.5:
            return f'the {kind} in {room_text}'
        return f'{room_text} {kind}'
    return 'the ' + entity.display_name


def query_entity(entity: Entity) -> Dict[str, Any]:
    """The query-graph node a perfect extraction would produce for a mention of the given entity"""
    *attributes, name = entity.name.split('_')
    return {'name': name, 'attributes': attributes, 'type': entity.type}


# endregion

# region Lookups


def room_of(graph: WorldGraph, name: str) -> Optional[str]:
    """The room of a person, fixture, or the robot"""
    for t in graph.incident(name):
        if t.subject == name and t.predicate in ('person_in_room', 'in_room', 'robot_in_room'):
            return t.object
    return None


def location_of(graph: WorldGraph, item: str) -> List[Triplet]:
    """The triplets that place an item somewhere"""
    where = ('placed_at_table', 'placed_at_shelf', 'on_shelf_level', 'in_fridge', 'in_person_hand')
    located = [t for t in graph.incident(item) if t.subject == item and t.predicate in where]
    located += [t for t in graph.incident(item) if t.predicate == 'robot_holding' and t.object == item]
    return sorted(located)


# endregion


class _WorldBuilder:
    def __init__(self, spec: WorldSpec, domain: Domain, rng: random.Random):
        self.spec = spec
        self.domain = domain
        self.rng = rng
        self.entities: Dict[str, Entity] = {}
        self.triplets = set()
        self.rooms: List[str] = []
        self.fixtures: Dict[str, List[str]] = {}

    def add(self, entity: Entity):
        if entity.name in self.entities:
            raise SimulationError(f'Duplicate entity name: {entity.name}')
        self.entities[entity.name] = entity

    def fact(self, subject: str, predicate: str, obj: Optional[str] = None):
        self.triplets.add(Triplet(subject, predicate, obj))

    def build(self) -> WorldGraph:
        self._rooms()
        self._topology()
        self._fixtures()
        self._agents()
        self._items()
        return WorldGraph(self.domain, self.entities, self.triplets)

    def _rooms(self):
        spec = self.spec
        for person in spec.persons[:spec.bedrooms]:
            self.add(Entity.of(f'{person}_bedroom', 'room', owner=person))
            self.rooms.append(f'{person}_bedroom')
        for kind in ROOM_KINDS[:spec.rooms - spec.bedrooms]:
            self.add(Entity(kind, 'room'))
            self.rooms.append(kind)

    def _topology(self):
        rooms = self.rooms[:]
        self.rng.shuffle(rooms)
        edges = set()
        for i in range(1, len(rooms)):
            edges.add(frozenset((rooms[i], rooms[self.rng.randrange(i)])))
        for a, b in product(rooms, rooms):
            if a < b and frozenset((a, b)) not in edges and self.rng.random() < self.spec.extra_connections:
                edges.add(frozenset((a, b)))
        for a, b in map(sorted, edges):
            self.fact(a, 'connected', b)
            self.fact(b, 'connected', a)

    def _fixtures(self):
        spec = self.spec
        bedrooms = [r for r in self.rooms if r.endswith('_bedroom')]
        preferred = dict(FIXTURE_ROOMS)
        preferred['tv'] = FIXTURE_ROOMS['tv'] + tuple(bedrooms)
        preferred['shelf'] = tuple(bedrooms) + FIXTURE_ROOMS['shelf']
        counts = {
            'table': spec.tables, 'fridge': spec.fridges, 'sink': spec.sinks, 'tv': spec.tvs, 'shelf': spec.shelves
        }
        for kind, count in counts.items():
            self.fixtures[kind] = [self._fixture(kind, room) for room in self._pick_rooms(preferred[kind], count)]
        self.fixtures['light'] = [self._fixture('light', room) for room in self.rooms[:spec.lights]]

        for light in self.fixtures['light']:
            if self.rng.random() < spec.on_rate:
                self.fact(light, 'light_on')
        for tv in self.fixtures['tv']:
            if self.rng.random() < spec.on_rate:
                self.fact(tv, 'tv_on')
        for sink in self.fixtures['sink']:
            if self.rng.random() < spec.on_rate / 2:
                self.fact(sink, 'faucet_on')

    def _pick_rooms(self, preferred: Sequence[str], count: int) -> List[str]:
        chosen = [r for r in preferred if r in self.rooms][:count]
        others = [r for r in self.rooms if r not in chosen]
        self.rng.shuffle(others)
        return chosen + others[:count - len(chosen)]

    def _fixture(self, kind: str, room: str) -> str:
        name = f'{room}_{kind}'
        attrs = {'room': room}
        if owner := dict(self.entities[room].attributes).get('owner'):
            attrs['owner'] = owner
        self.add(Entity.of(name, kind, **attrs))
        self.fact(name, 'in_room', room)
        return name

    def _agents(self):
        for person in self.spec.persons:
            self.add(Entity(person, 'person'))
            self.fact(person, 'person_in_room', self.rng.choice(self.rooms))
        self.add(Entity(ROBOT, 'robot'))
        self.fact(ROBOT, 'robot_in_room', self.rng.choice(self.rooms))
        self.fact(ROBOT, 'hand_empty')
        if self.fixtures['shelf']:
            for level in SHELF_LEVELS:
                self.add(Entity(level, 'shelf_level'))

    def _items(self):
        spec = self.spec
        for kind, field in ITEM_COUNT_FIELDS.items():
            count = getattr(spec, field)
            names = [(color, noun) for color, noun in product(COLORS, ITEM_NOUNS[kind])]
            for color, noun in self.rng.sample(names, count):
                name = f'{color}_{noun}'
                self.add(Entity.of(name, kind, color=color))
                self._place(name, kind)
                if kind == 'dish':
                    if self.rng.random() < spec.dirty_rate:
                        self.fact(name, 'dirty')
                    if self.rng.random() < spec.full_rate:
                        self.fact(name, 'container_full')

    def _place(self, item: str, kind: str):
        rng = self.rng
        if rng.random() < self.spec.held_rate and self.spec.persons:
            self.fact(item, 'in_person_hand', rng.choice(self.spec.persons))
        elif kind == 'food' and self.fixtures['fridge'] and rng.random() < 0.7:
            self.fact(item, 'in_fridge', rng.choice(self.fixtures['fridge']))
        elif self.fixtures['shelf'] and (not self.fixtures['table'] or rng.random() < 0.4):
            self.fact(item, 'placed_at_shelf', rng.choice(self.fixtures['shelf']))
            self.fact(item, 'on_shelf_level', rng.choice(SHELF_LEVELS))
        else:
            self.fact(item, 'placed_at_table', rng.choice(self.fixtures['table']))


def generate_world(spec: WorldSpec, domain: Domain, rng: Optional[random.Random] = None) -> WorldGraph:
    """
    Generate a random world with a connected room topology.  The world is fully determined by the spec (including
    its seed) unless a separate random generator is given.
    """
    spec.validate()
    graph = _WorldBuilder(spec, domain, rng or random.Random(spec.seed)).build()
    log.debug(f'Generated world with {len(graph.entities)} entities and {len(graph)} triplets from seed={spec.seed}')
    return graph


def entities_of(graph: WorldGraph, *types: str) -> List[str]:
    names = set()
    for type_name in types:
        names.update(e.name for e in graph.entities_of_type(type_name))
    return sorted(names)
