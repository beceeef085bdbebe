import json
import random

import networkx as nx
import pytest

from kgplan.config import RunConfig
from kgplan.core.constants import (
    VARIANT_S, VARIANT_R_MINUS, VARIANT_R_MINUS_V, VARIANT_R_SEARCH_V, VARIANTS as VARIANT_NAMES,
)
from kgplan.core.exceptions import SimulationError, SpecCapExceeded, ConfigError
from kgplan.graph.world import Entity, Triplet, GraphDelta, apply_delta
from kgplan.planner.search import Plan
from kgplan.planner.validation import validate
from kgplan.simulator.ablation import VARIANTS, parse_variants, run_ablation, run_variant
from kgplan.simulator.events import EventGenerator
from kgplan.simulator.scoring import (
    EventRecord, TaskRecord, VariantScore, score_state_change, score_plan, PLAN_MISSING, PLAN_INEXECUTABLE,
    PLAN_GOAL_UNSATISFIED,
)
from kgplan.simulator.simulation import Simulation, generate, world_hash, _schedule
from kgplan.simulator.tasks import TaskGenerator, resync_delta
from kgplan.simulator.world import WorldSpec, generate_world, describe, query_entity, entities_of, location_of, ROBOT

SMALL = dict(
    rooms=5, bedrooms=2, tables=2, fridges=1, sinks=2, lights=3, tvs=1, shelves=1, pens=2, books=2, food=2,
    dishes=2, phones=1,
)


def small_spec(seed: int = 3, events: int = 6, tasks: int = 2) -> WorldSpec:
    return WorldSpec(seed=seed, events=events, tasks=tasks, **SMALL)


@pytest.fixture(scope='module')
def small_sim(household_domain) -> Simulation:
    return generate(small_spec(), household_domain)


# region World generation


@pytest.mark.parametrize('kwargs, exc', [
    ({'pens': -1}, SimulationError),
    ({'held_rate': 1.5}, SimulationError),
    ({'multi_event_rate': -0.1}, SimulationError),
    ({'rooms': 0}, SpecCapExceeded),
    ({'tables': 9}, SpecCapExceeded),
    ({'bedrooms': 6}, SpecCapExceeded),
    ({'events': 10_001}, SpecCapExceeded),
    ({'pens': 37}, SpecCapExceeded),
    ({'tables': 0, 'shelves': 0}, SimulationError),
])
def test_spec_validation(kwargs, exc):
    with pytest.raises(exc):
        WorldSpec(**kwargs).validate()


def test_spec_defaults(household_domain):
    spec = WorldSpec()
    spec.validate()
    assert spec.items == 23
    assert len(generate_world(spec, household_domain).entities) > spec.items
    assert spec.as_dict()['persons'] == list(spec.persons)
    large = WorldSpec.large(seed=4, events=3)
    large.validate()
    assert large.seed == 4
    assert large.events == 3
    assert large.items > spec.items


def test_generate_world(household_domain):
    world = generate_world(small_spec(), household_domain)
    rooms = entities_of(world, 'room')
    assert len(rooms) == 5
    assert {'gary_bedroom', 'kathleen_bedroom'} <= set(rooms)
    assert dict(world.entity('gary_bedroom').attributes) == {'owner': 'gary'}

    connected = {t for t in world.triplets if t.predicate == 'connected'}
    assert all(Triplet(t.object, 'connected', t.subject) in connected for t in connected)
    topology = nx.Graph((t.subject, t.object) for t in connected)
    assert set(topology.nodes) == set(rooms)
    assert nx.is_connected(topology)

    assert Triplet(ROBOT, 'hand_empty') in world.triplets
    assert sum(1 for t in world.incident(ROBOT) if t.predicate == 'robot_in_room') == 1
    for item in entities_of(world, 'pen', 'book', 'food', 'dish', 'phone'):
        assert location_of(world, item), item


def test_world_is_determined_by_seed(household_domain):
    first = generate_world(small_spec(seed=11), household_domain)
    second = generate_world(small_spec(seed=11), household_domain)
    assert first.triplets == second.triplets
    assert world_hash(first) == world_hash(second)
    assert world_hash(first) != world_hash(generate_world(small_spec(seed=12), household_domain))


def test_describe():
    assert describe(Entity('gary', 'person')) == 'Gary'
    assert describe(Entity(ROBOT, 'robot')) == 'the robot'
    assert describe(Entity.of('gary_bedroom', 'room', owner='gary')) == "Gary's bedroom"
    assert describe(Entity('living_room', 'room')) == 'the living room'
    assert describe(Entity.of('kitchen_table', 'table', room='kitchen')) == 'the kitchen table'
    shelf = Entity.of('gary_bedroom_shelf', 'shelf', room='gary_bedroom', owner='gary')
    assert describe(shelf) == "Gary's bedroom shelf"


def test_query_entity():
    expected = {'name': 'pen', 'attributes': ['red'], 'type': 'pen'}
    assert query_entity(Entity.of('red_pen', 'pen', color='red')) == expected
    assert query_entity(Entity('gary', 'person')) == {'name': 'gary', 'attributes': [], 'type': 'person'}


# endregion

# region Streams


@pytest.mark.parametrize('events, tasks, expected', [
    (4, 2, ['event', 'event', 'task', 'event', 'event', 'task']),
    (3, 0, ['event'] * 3),
    (0, 2, ['task', 'task']),
    (0, 0, []),
])
def test_schedule(events, tasks, expected):
    assert _schedule(events, tasks) == expected


def test_event_deltas_apply(household_domain):
    world = generate_world(small_spec(), household_domain)
    generator = EventGenerator(random.Random(5), multi_event_rate=0.5)
    for index in range(15):
        event = generator.generate(world, index)
        assert event.delta
        assert event.mentioned
        assert {e['type'] for e in event.query_graph['entities']} <= set(household_domain.types)
        world = apply_delta(world, event.delta)


def test_tasks_need_a_plan(household_domain):
    world = generate_world(small_spec(), household_domain)
    generator = TaskGenerator(random.Random(5))
    for index in range(3):
        task = generator.generate(world, index)
        assert len(task.plan) > 0
        assert not validate(household_domain, task.problem, Plan())
        assert validate(household_domain, task.problem, task.plan)
        assert task.touched
        assert task.effects.touched_entities() <= task.touched


def test_generate_simulation(small_sim):
    assert len(small_sim.events) == 6
    assert len(small_sim.tasks) == 2
    assert [s.index for s in small_sim.steps] == list(range(8))
    states = list(small_sim.truth_states())
    assert states[0][1] is small_sim.world
    for (_, _, after), (_, before, _) in zip(states, states[1:]):
        assert after is before
    assert len(small_sim.truth_book()) <= len(small_sim.steps)


def test_simulation_is_deterministic(household_domain, small_sim):
    again = generate(small_spec(), household_domain)
    assert again.stream_hash() == small_sim.stream_hash()
    assert [s.text for s in again.steps] == [s.text for s in small_sim.steps]
    assert generate(small_spec(seed=4), household_domain).stream_hash() != small_sim.stream_hash()


def test_empty_streams(household_domain):
    sim = generate(small_spec(events=0, tasks=0), household_domain)
    assert sim.steps == ()
    assert list(sim.truth_states()) == []


def test_resync_delta(demo_world):
    truth = apply_delta(demo_world, GraphDelta((), {Triplet('mug', 'container_full')}))
    delta = resync_delta(demo_world, truth, frozenset({'mug'}))
    assert delta.additions == {Triplet('mug', 'container_full')}
    assert not delta.removals
    assert not resync_delta(demo_world, truth, frozenset({'gary'}))
    assert apply_delta(demo_world, delta).triplets == truth.triplets


# endregion

# region Scoring


def test_score_state_change(demo_world, tiny_world):
    assert score_state_change(demo_world, demo_world).match
    removed, added = Triplet('bathroom_sink', 'faucet_on'), Triplet('mug', 'container_full')
    graph = apply_delta(demo_world, GraphDelta({removed}, {added}))
    score = score_state_change(graph, demo_world)
    assert not score
    assert score.missing == {removed}
    assert score.extra == {added}
    assert str(score).startswith('mismatch(')
    with pytest.raises(SimulationError):
        score_state_change(tiny_world, demo_world)


def test_score_plan(small_sim):
    task = small_sim.tasks[0]
    domain = small_sim.domain
    assert score_plan(task.plan, task.problem, domain)
    assert score_plan(None, task.problem, domain).kind == PLAN_MISSING
    assert score_plan(Plan(), task.problem, domain).kind == PLAN_GOAL_UNSATISFIED
    bad = score_plan(Plan((('fly_to_the_moon', (ROBOT,)),)), task.problem, domain)
    assert bad.kind == PLAN_INEXECUTABLE
    assert str(bad).startswith('failure(inexecutable)')


def test_variant_score():
    score = VariantScore('R^S')
    score.events = [EventRecord(0, True, 1, 10, 5), EventRecord(1, False, 3, 20, 10), EventRecord(2, None)]
    score.tasks = [
        TaskRecord(0, True, planner_time=0.5, full_planner_time=1.5),
        TaskRecord(1, False, PLAN_MISSING, 'search'),
        TaskRecord(2, True, planner_time=1.0, full_planner_time=2.0),
    ]
    assert score.state_change_rate == 50
    assert score.plan_success_rate == pytest.approx(200 / 3)
    assert score.failure_kinds == {'search': 1}
    assert score.update_tokens == 45
    assert score.tokens_per_state_change == 15
    assert score.retries == 2
    assert score.speedups == [3.0, 2.0]
    assert score.median_speedup == 2.5
    assert 'state=50.0%' in repr(score)
    assert VariantScore('S').summary()['state_change_success'] is None


# endregion

# region Ablation


def test_parse_variants():
    assert parse_variants('all') == list(VARIANT_NAMES)
    assert parse_variants(None) == list(VARIANTS)
    assert parse_variants('S, R-') == [VARIANT_S, VARIANT_R_MINUS]
    assert parse_variants(['R+_V']) == ['R+_V']
    with pytest.raises(ConfigError, match='Unknown variant'):
        parse_variants('S,R*')


def test_variant_configuration():
    config = VARIANTS['R+_V'].configure(RunConfig())
    assert config.retriever == 'baseline'
    assert config.verifier is True
    assert VARIANTS[VARIANT_S].updates is False


def test_skipping_updates(small_sim):
    score = run_variant(small_sim, VARIANT_S, RunConfig())
    assert score.complete
    assert len(score.events) == 6
    assert all(e.success is None for e in score.events)
    assert score.state_change_rate is None
    assert len(score.tasks) == 2


def test_full_context_with_oracle(small_sim):
    score = run_variant(small_sim, VARIANT_R_MINUS, RunConfig())
    assert score.complete, score.error
    assert score.state_change_rate == 100
    assert score.plan_success_rate == 100
    for task in score.tasks:
        assert task.full_ground_actions == task.ground_actions


def test_run_ablation_writes_reports(small_sim, tmp_path):
    board = run_ablation(small_sim, RunConfig(), 'S,R-,R^S', tmp_path)
    assert list(board.variants) == ['S', 'R-', 'R^S']
    assert board.complete
    assert board.stream_hash == small_sim.stream_hash()
    assert [row['variant'] for row in board.table()] == ['S', 'R-', 'R^S']
    assert {p.name for p in board.files} == {'scoreboard.json', 'tokens.csv', 'planner_time.csv'}

    data = json.loads(tmp_path.joinpath('scoreboard.json').read_text('utf-8'))
    assert data['seed'] == 3
    assert data['variants']['R-']['state_change_success'] == 100
    assert len(data['variants']['S']['event_records']) == 6
    tokens = tmp_path.joinpath('tokens.csv').read_text('utf-8').splitlines()
    assert tokens[0].startswith('variant,index,success')
    assert len(tokens) == 1 + 3 * 6
    assert tmp_path.joinpath('R_minus', 'transcript.jsonl').exists()
    assert tmp_path.joinpath('R_search', 'problem_1.pddl').exists()


def test_budget_marks_variant_incomplete(small_sim):
    score = run_variant(small_sim, 'R^S', RunConfig(token_budget=50))
    assert not score.complete
    assert score.error.startswith('TokenBudgetExceeded')
    assert 'plan=n/a' in repr(VariantScore('R^S', events=[EventRecord(0, True)]))


@pytest.mark.slow
def test_large_simulation(household_domain):
    sim = generate(WorldSpec.large(seed=1, events=50, tasks=20), household_domain)
    assert len(sim.world) > 250
    board = run_ablation(sim, RunConfig())
    assert board.complete
    assert board[VARIANT_R_MINUS].state_change_rate == 100


@pytest.mark.slow
def test_default_simulation_with_verified_search(household_domain):
    score = run_variant(generate(WorldSpec(), household_domain), VARIANT_R_SEARCH_V, RunConfig())
    assert score.complete, score.error
    assert score.state_change_rate == 100
    assert score.plan_success_rate == 100


@pytest.mark.slow
def test_search_retrieval_saves_tokens_and_planner_time(household_domain):
    sim = generate(WorldSpec.large(seed=1, events=15, tasks=5), household_domain)
    assert len(sim.world) >= 250
    config = RunConfig(
        backend='faulty', fault_rates={'wrong_entity_name': 0.1, 'phantom_removal': 0.1}, fault_context_scale=1.0
    )
    search = run_variant(sim, VARIANT_R_SEARCH_V, config)
    full = run_variant(sim, VARIANT_R_MINUS_V, config)
    assert search.complete and full.complete

    paired = [(s, f) for s, f in zip(search.events, full.events) if s.success and f.success]
    assert paired
    cheaper = sum(s.total_tokens < f.total_tokens for s, f in paired)
    assert cheaper > len(paired) / 2
    assert search.tokens_per_state_change < full.tokens_per_state_change

    solved = [t for t in search.tasks if t.success and t.full_ground_actions is not None]
    assert solved
    assert all(t.ground_actions <= t.full_ground_actions for t in solved)
    assert search.median_speedup > 1


# endregion
