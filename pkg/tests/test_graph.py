import hashlib
import json
import random
import threading
from dataclasses import replace

import pytest

from kgplan.core.constants import (
    V_UNKNOWN_ENTITY, V_UNKNOWN_PREDICATE, V_WRONG_FORM, V_TYPE_MISMATCH, V_REMOVE_ABSENT, V_ADD_DUPLICATE,
    V_ADD_REMOVE_OVERLAP, INFINITE_DEPTH,
)
from kgplan.core.exceptions import (
    DeltaError, UnknownEntityError, ChecksumError, GraphVersionError, ConformanceError, GraphFileError,
    GraphLockedError, TripletConversionError,
)
from kgplan.core.utils import FileLock, atomic_write, normalize_name, stable_hash, stable_seed
from kgplan.graph.persistence import save, load, dumps, loads
from kgplan.graph.store import GraphStore, StaleSnapshotError
from kgplan.graph.world import (
    Entity, Triplet, GraphDelta, WorldGraph, check_triplet, apply_delta, apply_lenient, to_init_atoms,
    from_init_atoms, format_triplets,
)
from kgplan.pddl.model import Atom

PEN_ON_TABLE = Triplet('red_pen', 'placed_at_table', 'kitchen_table')
FAUCET_ON = Triplet('bathroom_sink', 'faucet_on')
LEAF_TYPES = ('room', 'robot', 'person', 'pen', 'book', 'dish', 'table', 'shelf', 'sink', 'light', 'shelf_level')


def random_triplets(domain, entities, rng: random.Random, attempts: int):
    """Type-correct triplets drawn at random; most draws fail the type check and are skipped"""
    by_name = {e.name: e for e in entities}
    names = sorted(by_name)
    predicates = sorted(domain.predicates.values(), key=lambda p: p.name)
    found = set()
    for _ in range(attempts):
        predicate = rng.choice(predicates)
        args = [rng.choice(names) for _ in range(predicate.arity)]
        triplet = Triplet(args[0], predicate.name, args[1] if predicate.arity == 2 else None)
        if not check_triplet(triplet, by_name, domain):
            found.add(triplet)
    return found


def random_graph(domain, rng: random.Random) -> WorldGraph:
    entities = []
    for i, type_name in enumerate(rng.choices(LEAF_TYPES, k=rng.randint(1, 14))):
        if rng.random() < 0.3:
            entities.append(Entity.of(f'{type_name}_{i}', type_name, color=rng.choice(['red', 'blue', 'green'])))
        else:
            entities.append(Entity(f'{type_name}_{i}', type_name))
    triplets = random_triplets(domain, entities, rng, rng.randint(0, 80))
    return WorldGraph(domain, entities, triplets, rng.randint(0, 5))


def rewrite_body(text: str, old: str, new: str) -> str:
    """Edit a dumped graph and re-sign it so that only the edited record is wrong"""
    header, *body = text.splitlines()
    body = [line.replace(old, new) for line in body]
    header = json.loads(header)
    header['checksum'] = hashlib.sha256('\n'.join(body).encode('utf-8')).hexdigest()
    return '\n'.join([json.dumps(header), *body])


# region Triplets


def test_triplet_forms():
    assert str(FAUCET_ON) == '(bathroom_sink, faucet_on, true)'
    assert FAUCET_ON.is_property
    assert FAUCET_ON.endpoints == ('bathroom_sink',)
    assert Triplet.from_parts('bathroom_sink', 'faucet_on', 'true') == FAUCET_ON
    assert str(PEN_ON_TABLE) == '(red_pen, placed_at_table, kitchen_table)'
    assert PEN_ON_TABLE.to_atom() == Atom('placed_at_table', ('red_pen', 'kitchen_table'))
    assert Triplet.from_atom(FAUCET_ON.to_atom()) == FAUCET_ON


def test_triplet_atom_conversion_rejects_other_arities(household_domain):
    with pytest.raises(TripletConversionError):
        Triplet.from_atom(Atom('between', ('a', 'b', 'c')))
    with pytest.raises(TripletConversionError):
        from_init_atoms([Atom('levitating', ('red_pen',))], household_domain)


def test_init_atoms_mirror_triplets(tiny_world, household_domain):
    atoms = to_init_atoms(tiny_world.triplets)
    assert len(atoms) == len(tiny_world.triplets)
    assert from_init_atoms(atoms, household_domain) == tiny_world.triplets


def test_format_triplets():
    assert format_triplets([]) == 'empty'
    assert format_triplets([PEN_ON_TABLE, FAUCET_ON]) == f'{FAUCET_ON}, {PEN_ON_TABLE}'


@pytest.mark.parametrize('triplet, code', [
    (Triplet('blue_pen', 'placed_at_table', 'kitchen_table'), V_UNKNOWN_ENTITY),
    (Triplet('red_pen', 'levitating'), V_UNKNOWN_PREDICATE),
    (Triplet('bathroom_sink', 'faucet_on', 'bathroom'), V_WRONG_FORM),
    (Triplet('red_pen', 'placed_at_table'), V_WRONG_FORM),
    (Triplet('red_pen', 'person_in_room', 'kitchen'), V_TYPE_MISMATCH),
])
def test_check_triplet_codes(tiny_world, household_domain, triplet, code):
    violations = check_triplet(triplet, tiny_world.entities, household_domain)
    assert violations[0][0] == code


def test_type_mismatch_names_argument(tiny_world, household_domain):
    triplet = Triplet('red_pen', 'person_in_room', 'kitchen')
    [(code, message)] = check_triplet(triplet, tiny_world.entities, household_domain)
    assert code == V_TYPE_MISMATCH
    assert message == 'argument 1 of person_in_room must be a person; red_pen is a pen'


def test_valid_triplet_has_no_violations(tiny_world, household_domain):
    assert check_triplet(PEN_ON_TABLE, tiny_world.entities, household_domain) == []


# endregion

# region World graph


def test_graph_queries(tiny_world):
    assert PEN_ON_TABLE in tiny_world
    assert 'red_pen' in tiny_world
    assert tiny_world.entity('red_pen').attribute_text == 'red'
    assert [e.name for e in tiny_world.entities_of_type('fixture')] == ['bathroom_sink', 'kitchen_table']
    assert list(tiny_world.objects()) == sorted(tiny_world.entities)
    assert tiny_world.connecting('kitchen_table', 'red_pen') == [PEN_ON_TABLE]
    assert tiny_world.connecting('red_pen', 'bathroom') == []
    with pytest.raises(UnknownEntityError):
        tiny_world.entity('blue_pen')
    with pytest.raises(TypeError):
        tiny_world.entities['blue_pen'] = Entity('blue_pen', 'pen')


def test_graph_rejects_invalid_triplets(household_domain):
    with pytest.raises(DeltaError) as exc_info:
        WorldGraph(household_domain, [Entity('red_pen', 'pen')], [Triplet('red_pen', 'faucet_on')])
    assert exc_info.value.code == V_TYPE_MISMATCH


def test_graph_rejects_unknown_type(household_domain):
    with pytest.raises(ConformanceError) as exc_info:
        WorldGraph(household_domain, [Entity('hal', 'spaceship')])
    assert exc_info.value.kind == 'type'


def test_neighborhood_depths(tiny_world):
    assert tiny_world.neighborhood({'red_pen'}, 1) == {PEN_ON_TABLE}
    assert tiny_world.neighborhood({'red_pen'}, 2) == {PEN_ON_TABLE, Triplet('kitchen_table', 'in_room', 'kitchen')}
    assert tiny_world.neighborhood({'red_pen'}, INFINITE_DEPTH) == tiny_world.triplets


def test_neighborhood_includes_properties(tiny_world):
    found = tiny_world.neighborhood({'bathroom'}, 2)
    assert FAUCET_ON in found
    assert Triplet('robot', 'robot_in_room', 'kitchen') in found
    assert Triplet('robot', 'hand_empty') not in found
    assert PEN_ON_TABLE not in found


def test_neighborhood_edge_cases(tiny_world):
    assert tiny_world.neighborhood(set(), 2) == frozenset()
    with pytest.raises(ValueError):
        tiny_world.neighborhood({'red_pen'}, 0)
    with pytest.raises(UnknownEntityError):
        tiny_world.neighborhood({'blue_pen'}, 1)


def test_neighborhood_isolated_entity(household_domain):
    graph = WorldGraph(household_domain, [Entity('kitchen', 'room'), Entity('attic', 'room')])
    assert graph.neighborhood({'attic'}, INFINITE_DEPTH) == frozenset()


def test_neighborhood_is_monotone_in_depth(household_domain):
    rng = random.Random(11)
    for _ in range(300):
        graph = random_graph(household_domain, rng)
        seeds = set(rng.sample(sorted(graph.entities), rng.randint(1, min(3, len(graph.entities)))))
        everything = graph.neighborhood(seeds, INFINITE_DEPTH)
        previous = frozenset()
        for depth in range(1, 6):
            found = graph.neighborhood(seeds, depth)
            assert previous <= found <= everything
            previous = found


# endregion

# region Deltas


def test_apply_delta(tiny_world):
    moved = Triplet('red_pen', 'placed_at_table', 'kitchen_table')
    delta = GraphDelta({moved}, {Triplet('robot', 'robot_holding', 'red_pen')})
    updated = apply_delta(tiny_world, delta)
    assert updated.revision == tiny_world.revision + 1
    assert moved not in updated
    assert Triplet('robot', 'robot_holding', 'red_pen') in updated
    assert moved in tiny_world
    assert apply_delta(updated, delta.inverse()).triplets == tiny_world.triplets


def test_empty_delta_bumps_revision(tiny_world):
    delta = GraphDelta()
    assert not delta
    updated = apply_delta(tiny_world, delta)
    assert updated.triplets == tiny_world.triplets
    assert updated.revision == tiny_world.revision + 1
    assert updated != tiny_world


@pytest.mark.parametrize('removals, additions, code', [
    ([Triplet('red_pen', 'robot_holding', 'robot')], [], V_REMOVE_ABSENT),
    ([], [FAUCET_ON], V_ADD_DUPLICATE),
    ([FAUCET_ON], [FAUCET_ON], V_ADD_REMOVE_OVERLAP),
    ([], [Triplet('blue_pen', 'placed_at_table', 'kitchen_table')], V_UNKNOWN_ENTITY),
    ([], [Triplet('red_pen', 'person_in_room', 'kitchen')], V_TYPE_MISMATCH),
])
def test_apply_delta_errors(tiny_world, removals, additions, code):
    with pytest.raises(DeltaError) as exc_info:
        apply_delta(tiny_world, GraphDelta(removals, additions))
    assert exc_info.value.code == code
    assert tiny_world.revision == 0


def test_touched_entities():
    delta = GraphDelta({PEN_ON_TABLE}, {FAUCET_ON})
    assert delta.touched_entities() == {'red_pen', 'kitchen_table', 'bathroom_sink'}
    assert str(delta) == f'REMOVE: {PEN_ON_TABLE}\nADD: {FAUCET_ON}'


def test_apply_lenient(tiny_world):
    scope = frozenset({PEN_ON_TABLE})
    removals = [PEN_ON_TABLE, FAUCET_ON]      # the faucet is outside the scope and stays on
    additions = [Triplet('red_pen', 'in_person_hand', 'robot'), Triplet('robot', 'robot_holding', 'red_pen')]
    graph, dropped = apply_lenient(tiny_world, removals, additions, scope)
    assert dropped == [Triplet('red_pen', 'in_person_hand', 'robot')]
    assert PEN_ON_TABLE not in graph
    assert FAUCET_ON in graph
    assert Triplet('robot', 'robot_holding', 'red_pen') in graph
    assert graph.revision == tiny_world.revision + 1


def test_apply_lenient_ignores_absent_removals(tiny_world):
    graph, dropped = apply_lenient(tiny_world, [Triplet('robot', 'robot_holding', 'red_pen')], [])
    assert dropped == []
    assert graph.triplets == tiny_world.triplets


def test_apply_delta_counts(household_domain):
    rng = random.Random(5)
    for _ in range(300):
        graph = random_graph(household_domain, rng)
        current = sorted(graph.triplets)
        removals = set(rng.sample(current, rng.randint(0, len(current))))
        candidates = random_triplets(household_domain, graph.entities.values(), rng, 40) - graph.triplets
        additions = set(rng.sample(sorted(candidates), rng.randint(0, len(candidates))))
        updated = apply_delta(graph, GraphDelta(removals, additions))
        assert len(updated) == len(graph) - len(removals) + len(additions)
        assert updated.triplets == (graph.triplets - removals) | additions
        assert updated.revision == graph.revision + 1


# endregion

# region Persistence


def test_save_and_load(tmp_path, tiny_world, household_domain):
    path = tmp_path.joinpath('graphs', 'world.jsonl')
    updated = apply_delta(tiny_world, GraphDelta({FAUCET_ON}))
    save(updated, path)
    loaded = load(path, household_domain)
    assert loaded == updated
    assert loaded.entity('red_pen').attributes == (('color', 'red'),)
    assert [p.name for p in tmp_path.joinpath('graphs').iterdir()] == ['world.jsonl']


def test_dump_is_deterministic(tiny_world, household_domain):
    text = dumps(tiny_world)
    assert dumps(loads(text, household_domain)) == text
    header = json.loads(text.splitlines()[0])
    assert header['format'] == 'kgplan-graph'
    assert header['version'] == 1
    assert header['triplets'] == len(tiny_world.triplets)


def test_checksum_detects_tampering(tiny_world, household_domain):
    text = dumps(tiny_world).replace('"kitchen_table"]', '"bathroom"]', 1)
    with pytest.raises(ChecksumError):
        loads(text, household_domain)


def test_version_mismatch(tiny_world, household_domain):
    header, *body = dumps(tiny_world).splitlines()
    header = json.dumps({**json.loads(header), 'version': 2})
    with pytest.raises(GraphVersionError):
        loads('\n'.join([header, *body]), household_domain)


def test_load_with_missing_predicate(tiny_world, household_domain):
    predicates = {k: v for k, v in household_domain.predicates.items() if k != 'faucet_on'}
    reduced = replace(household_domain, predicates=predicates)
    with pytest.raises(ConformanceError) as exc_info:
        loads(dumps(tiny_world), reduced)
    assert exc_info.value.kind == 'predicate'
    assert exc_info.value.name == 'faucet_on'


def test_save_load_random_graphs(household_domain):
    rng = random.Random(3)
    for _ in range(1000):
        graph = random_graph(household_domain, rng)
        text = dumps(graph)
        loaded = loads(text, household_domain)
        assert loaded == graph
        assert dict(loaded.entities) == dict(graph.entities)
        assert dumps(loaded) == text


@pytest.mark.parametrize('record', [
    '{"triplet": ["red_pen", "placed_at_table"]}',
    '{"triplet": "red_pen placed_at_table kitchen_table"}',
    '{"triplet": ["red_pen", "placed_at_table", 7]}',
])
def test_load_malformed_triplet(tiny_world, household_domain, record):
    text = rewrite_body(dumps(tiny_world), '{"triplet": ["red_pen", "placed_at_table", "kitchen_table"]}', record)
    with pytest.raises(GraphFileError, match='Invalid triplet on line'):
        loads(text, household_domain)


def test_load_triplet_with_unknown_entity(tiny_world, household_domain):
    text = rewrite_body(dumps(tiny_world), '"entity": "red_pen"', '"entity": "blue_pen"')
    with pytest.raises(ConformanceError) as exc_info:
        loads(text, household_domain)
    assert exc_info.value.kind == 'entity'
    assert exc_info.value.name == 'red_pen'


def test_load_mistyped_triplet(tiny_world, household_domain):
    text = rewrite_body(dumps(tiny_world), '"type": "pen"', '"type": "person"')
    with pytest.raises(GraphFileError, match=V_TYPE_MISMATCH) as exc_info:
        loads(text, household_domain)
    assert not isinstance(exc_info.value, ConformanceError)


def test_load_empty_file(tmp_path, household_domain):
    path = tmp_path.joinpath('empty.jsonl')
    path.write_text('')
    with pytest.raises(GraphFileError):
        load(path, household_domain)


def test_load_missing_file(tmp_path, household_domain):
    with pytest.raises(FileNotFoundError):
        load(tmp_path.joinpath('missing.jsonl'), household_domain)


def test_atomic_write_keeps_old_file_on_error(tmp_path):
    path = tmp_path.joinpath('world.jsonl')
    path.write_text('old')
    with pytest.raises(RuntimeError):
        with atomic_write(path) as f:
            f.write('partial')
            raise RuntimeError('interrupted')
    assert path.read_text() == 'old'
    assert [p.name for p in tmp_path.iterdir()] == ['world.jsonl']


def test_file_lock_is_exclusive(tmp_path):
    path = tmp_path.joinpath('world.jsonl')
    with FileLock(path):
        with pytest.raises(GraphLockedError):
            FileLock(path).acquire()
    with FileLock(path) as lock:
        assert lock.path.name == 'world.jsonl.lock'


# endregion

# region Store


def test_store_apply_records_history(tiny_world):
    store = GraphStore(tiny_world)
    store.apply(GraphDelta({FAUCET_ON}))
    store.apply(GraphDelta(additions={FAUCET_ON}))
    assert store.snapshot.revision == 2
    assert [d.revision for d in store.history] == [0, 1]
    assert FAUCET_ON in store.snapshot


def test_store_history_is_bounded(tiny_world):
    store = GraphStore(tiny_world, history_limit=2)
    for delta in (GraphDelta({FAUCET_ON}), GraphDelta(additions={FAUCET_ON}), GraphDelta({FAUCET_ON})):
        store.apply(delta)
    assert store.snapshot.revision == 3
    assert [d.revision for d in store.history] == [1, 2]
    assert len(GraphStore(tiny_world, history_limit=None).history) == 0


def test_store_failed_apply_changes_nothing(tiny_world):
    store = GraphStore(tiny_world)
    with pytest.raises(DeltaError):
        store.apply(GraphDelta(additions={FAUCET_ON}))
    assert store.snapshot is tiny_world
    assert store.history == ()


def test_store_commit_rejects_stale_snapshot(tiny_world):
    store = GraphStore(tiny_world)
    delta = GraphDelta({FAUCET_ON})
    computed = apply_delta(tiny_world, delta)
    store.apply(GraphDelta({PEN_ON_TABLE}))
    with pytest.raises(StaleSnapshotError) as exc_info:
        store.commit(computed, delta, base_revision=0)
    assert (exc_info.value.expected, exc_info.value.actual) == (0, 1)
    assert store.snapshot.revision == 1


def test_store_serializes_writers(tiny_world):
    lamps = [Entity(f'lamp_{i}', 'light') for i in range(8)]
    graph = WorldGraph(tiny_world.domain, [*tiny_world.entities.values(), *lamps], tiny_world.triplets)
    store = GraphStore(graph)

    def switch_on(lamp: Entity):
        store.apply(GraphDelta(additions={Triplet(lamp.name, 'light_on')}))

    threads = [threading.Thread(target=switch_on, args=(lamp,)) for lamp in lamps]
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join()
    assert store.snapshot.revision == 8
    assert sorted(d.revision for d in store.history) == list(range(8))
    assert all(Triplet(lamp.name, 'light_on') in store.snapshot for lamp in lamps)


# endregion

# region Utils


def test_normalize_name():
    assert normalize_name(' Red-Pen ') == 'red_pen'
    assert normalize_name('living room') == 'living_room'


def test_stable_hash_is_order_independent_for_dicts():
    assert stable_hash({'a': 1, 'b': 2}) == stable_hash({'b': 2, 'a': 1})
    assert stable_seed('events', 1) == stable_seed('events', 1)
    assert stable_seed('events', 1) != stable_seed('events', 2)


# endregion
