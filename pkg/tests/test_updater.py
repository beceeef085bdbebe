import json

import pytest

from kgplan.core.constants import (
    V_TYPE_MISMATCH, V_REMOVE_ABSENT, V_ADD_DUPLICATE, V_UNKNOWN_ENTITY, V_WRONG_FORM, V_ADD_REMOVE_OVERLAP,
    V_MALFORMED_OUTPUT, V_UNKNOWN_PREDICATE, F_PHANTOM_REMOVAL, F_DROP_ADDITION, FAULT_VIOLATIONS,
)
from kgplan.core.exceptions import UpdateParseError
from kgplan.graph.world import Triplet, GraphDelta, SOURCE_PERCEPTION
from kgplan.lm.backends import FaultyBackend, ScriptedBackend
from kgplan.lm.gateway import LmGateway
from kgplan.lm.parsing import ParsedUpdate
from kgplan.lm.prompts import TEMPLATE_UPDATE, TEMPLATE_QUERY_GRAPH
from kgplan.retrieval.retrievers import SearchRetriever, FullRetriever
from kgplan.simulator.demo import GARY_UPDATE, GARY_NO_CHANGE
from kgplan.updater import (
    verify, verify_completion, process_nl_update, process_perception_update, read_perception_delta
)

GARY_REMOVALS = {Triplet('red_pen', 'in_person_hand', 'gary'), Triplet('gary', 'person_in_room', 'jessica_bedroom')}
GARY_ADDITIONS = {
    Triplet('gary', 'person_in_room', 'alexander_bedroom'),
    Triplet('red_pen', 'placed_at_table', 'alexander_bedroom_table'),
}


def faulty_gateway(truth_book, **kwargs) -> LmGateway:
    return LmGateway(FaultyBackend(truth_book, **kwargs), retry_delay=0)


# region Verifier


def test_verify_type_mismatch(tiny_world):
    report = verify(ParsedUpdate(additions=(('red_pen', 'person_in_room', 'kitchen'),)), tiny_world)
    assert not report.ok
    assert report.codes == (V_TYPE_MISMATCH,)
    violation = report.violations[0]
    assert violation.triplet == '(red_pen, person_in_room, kitchen)'
    assert violation.message == 'argument 1 of person_in_room must be a person; red_pen is a pen'


def test_verify_reports_every_problem(tiny_world):
    parsed = ParsedUpdate(
        removals=(('robot', 'robot_in_room', 'bathroom'),),
        additions=(
            ('bathroom_sink', 'faucet_on', 'true'),
            ('ghost', 'hand_empty', 'true'),
            ('robot', 'hand_empty', 'false'),
            ('kitchen', 'connected', 'true'),
            ('robot', 'is_flying', 'true'),
        ),
    )
    report = verify(parsed, tiny_world)
    assert sorted(report.codes) == sorted([
        V_REMOVE_ABSENT, V_ADD_DUPLICATE, V_UNKNOWN_ENTITY, V_WRONG_FORM, V_WRONG_FORM, V_UNKNOWN_PREDICATE
    ])
    assert len(report.messages()) == 6


def test_verify_overlap_and_repeats(tiny_world):
    parsed = ParsedUpdate(
        removals=(('robot', 'hand_empty', 'true'),),
        additions=(
            ('robot', 'hand_empty', 'true'), ('kitchen', 'connected', 'kitchen'), ('kitchen', 'connected', 'kitchen')
        ),
    )
    report = verify(parsed, tiny_world)
    assert report.codes == (V_ADD_REMOVE_OVERLAP, V_ADD_DUPLICATE)


def test_verify_scope(tiny_world):
    parsed = ParsedUpdate(removals=(('robot', 'hand_empty', 'true'),))
    assert verify(parsed, tiny_world).ok
    report = verify(parsed, tiny_world, scope=frozenset())
    assert report.codes == (V_REMOVE_ABSENT,)
    assert 'retrieved context' in report.violations[0].message


def test_verify_valid_delta(tiny_world):
    parsed = ParsedUpdate(
        removals=(('bathroom_sink', 'faucet_on', 'true'),),
        additions=(('robot', 'robot_in_room', 'bathroom'),),
    )
    report = verify(parsed, tiny_world)
    assert report.ok
    assert report.candidate.removals == {Triplet('bathroom_sink', 'faucet_on')}
    assert report.candidate.additions == {Triplet('robot', 'robot_in_room', 'bathroom')}


def test_verify_completion_malformed(tiny_world):
    report = verify_completion('I think the pen moved.', tiny_world)
    assert report.codes == (V_MALFORMED_OUTPUT,)
    assert report.violations[0].triplet is None
    assert str(report.violations[0]).startswith('malformed-output: unexpected text')


# endregion

# region Natural-language updates


def test_gary_update(demo_world, oracle_gateway):
    outcome, new = process_nl_update(demo_world, GARY_UPDATE.text, oracle_gateway, SearchRetriever(oracle_gateway))
    assert outcome.success
    assert outcome.attempts == 1
    assert outcome.retries == 0
    assert outcome.delta.removals == GARY_REMOVALS
    assert outcome.delta.additions == GARY_ADDITIONS
    assert outcome.delta.revision == demo_world.revision
    assert GARY_ADDITIONS <= new.triplets
    assert not GARY_REMOVALS & new.triplets
    assert GARY_REMOVALS <= demo_world.triplets
    assert new.revision == demo_world.revision + 1
    assert outcome.transcript_span == (0, 2)
    assert outcome.total_tokens == oracle_gateway.transcript.total_tokens


def test_update_without_change(demo_world, oracle_gateway):
    outcome, new = process_nl_update(demo_world, GARY_NO_CHANGE.text, oracle_gateway, SearchRetriever(oracle_gateway))
    assert outcome.success
    assert not outcome.delta
    assert new is demo_world


def test_update_retries_with_verifier_feedback(demo_world, truth_book):
    gateway = faulty_gateway(truth_book, rates={F_PHANTOM_REMOVAL: 1.0}, retry_rates={})
    outcome, new = process_nl_update(demo_world, GARY_UPDATE.text, gateway, SearchRetriever(gateway))
    assert outcome.success
    assert outcome.attempts == 2
    assert V_REMOVE_ABSENT in outcome.reports[0].codes
    assert outcome.reports[1].ok
    assert outcome.delta.additions == GARY_ADDITIONS
    updates = [e for e in gateway.transcript if e.template_id == TEMPLATE_UPDATE]
    assert [e.attempt for e in updates] == [1, 2]
    assert V_REMOVE_ABSENT in updates[1].prompt
    assert V_REMOVE_ABSENT not in updates[0].prompt


@pytest.mark.parametrize('seed', range(5))
@pytest.mark.parametrize('fault, code', FAULT_VIOLATIONS.items())
def test_each_fault_is_detected_and_recovered(demo_world, truth_book, fault, code, seed):
    gateway = faulty_gateway(truth_book, seed=seed, rates={fault: 1.0}, retry_rates={})
    outcome, new = process_nl_update(demo_world, GARY_UPDATE.text, gateway, SearchRetriever(gateway))
    assert code in outcome.reports[0].codes
    assert outcome.success
    assert outcome.attempts == 2
    assert outcome.reports[1].ok
    assert outcome.delta.removals == GARY_REMOVALS
    assert outcome.delta.additions == GARY_ADDITIONS


def test_update_retry_cap(demo_world, truth_book):
    gateway = faulty_gateway(truth_book, rates={F_DROP_ADDITION: 1.0})
    outcome, new = process_nl_update(demo_world, GARY_UPDATE.text, gateway, SearchRetriever(gateway), retry_cap=2)
    assert not outcome.success
    assert outcome.attempts == 2
    assert outcome.delta is None
    assert new is demo_world
    assert [r.codes for r in outcome.reports] == [(V_MALFORMED_OUTPUT,), (V_MALFORMED_OUTPUT,)]


def test_update_without_verifier(demo_world, truth_book):
    gateway = faulty_gateway(truth_book, rates={F_PHANTOM_REMOVAL: 1.0})
    outcome, new = process_nl_update(
        demo_world, GARY_UPDATE.text, gateway, SearchRetriever(gateway), verifier=False
    )
    assert outcome.success
    assert outcome.attempts == 1
    assert outcome.reports == ()
    assert not GARY_REMOVALS & new.triplets
    assert len(GARY_ADDITIONS & new.triplets) == 1


def test_unverified_update_drops_unstorable_additions(tiny_world):
    gateway = LmGateway(ScriptedBackend([(TEMPLATE_UPDATE, 'REMOVE: empty\nADD: (red_pen, person_in_room, kitchen)')]))
    text = 'The pen walked into the kitchen.'
    outcome, new = process_nl_update(tiny_world, text, gateway, FullRetriever(), verifier=False)
    assert outcome.success
    assert outcome.dropped == (Triplet('red_pen', 'person_in_room', 'kitchen'),)
    assert not outcome.delta
    assert new is tiny_world


def test_update_prompt_sections(tiny_world):
    script = [(TEMPLATE_QUERY_GRAPH, '{"entities": ["sink"]}'), (TEMPLATE_UPDATE, 'REMOVE: empty\nADD: empty')]
    gateway = LmGateway(ScriptedBackend(script))
    process_nl_update(tiny_world, 'The sink is dripping.', gateway, SearchRetriever(gateway))
    prompt = gateway.transcript[1].prompt
    assert 'bathroom_sink - sink' in prompt
    assert '(bathroom_sink, faucet_on, true)' in prompt
    assert '(faucet_on ?s - sink)' in prompt
    assert 'The sink is dripping.' in prompt


# endregion

# region Perception updates


def test_perception_update(tiny_world):
    delta = GraphDelta({Triplet('bathroom_sink', 'faucet_on')}, {Triplet('robot', 'robot_in_room', 'bathroom')})
    new = process_perception_update(tiny_world, delta)
    assert Triplet('bathroom_sink', 'faucet_on') not in new.triplets
    assert Triplet('robot', 'robot_in_room', 'bathroom') in new.triplets
    assert process_perception_update(tiny_world, GraphDelta()) is tiny_world


def test_read_perception_delta_json(tmp_path):
    path = tmp_path.joinpath('delta.json')
    data = {'remove': [['bathroom_sink', 'faucet_on', 'true']], 'add': [['mug', 'container_full', 'true']]}
    path.write_text(json.dumps(data))
    delta = read_perception_delta(path)
    assert delta.source == SOURCE_PERCEPTION
    assert delta.removals == {Triplet('bathroom_sink', 'faucet_on')}
    assert delta.additions == {Triplet('mug', 'container_full')}


def test_read_perception_delta_json_normalizes(tmp_path):
    path = tmp_path.joinpath('delta.json')
    data = {
        'remove': [['Bathroom Sink', 'faucet_on', True], ['Kitchen-Light', 'light_on', False]],
        'add': [['Robot', 'robot_in_room', 'Living Room']],
    }
    path.write_text(json.dumps(data))
    delta = read_perception_delta(path)
    assert delta.removals == {Triplet('bathroom_sink', 'faucet_on')}
    assert delta.additions == {Triplet('robot', 'robot_in_room', 'living_room')}


def test_read_perception_delta_grammar(tmp_path):
    path = tmp_path.joinpath('delta.txt')
    path.write_text('REMOVE: empty\nADD: (robot, robot_in_room, bathroom)\n')
    delta = read_perception_delta(path)
    assert delta.removals == frozenset()
    assert delta.additions == {Triplet('robot', 'robot_in_room', 'bathroom')}


@pytest.mark.parametrize('name, content', [
    ('delta.json', '{"remove": [["a", "b"]]}'),
    ('delta.json', 'not json'),
    ('delta.json', '{"add": [["robot", "hand_empty", null]]}'),
    ('delta.json', '{"add": "robot hand_empty true"}'),
    ('delta.txt', 'the faucet is off'),
])
def test_read_perception_delta_invalid(tmp_path, name, content):
    path = tmp_path.joinpath(name)
    path.write_text(content)
    with pytest.raises(UpdateParseError):
        read_perception_delta(path)


# endregion
