import re

import pytest
import requests

from kgplan.core.constants import F_DROP_REMOVAL, F_PHANTOM_REMOVAL, F_WRONG_PREDICATE, F_CONTRADICTION
from kgplan.core.exceptions import (
    UpdateParseError, GoalParseError, BackendError, LmError, TokenBudgetExceeded, ScriptExhausted, ConfigError
)
from kgplan.graph.world import Entity, Triplet
from kgplan.lm.backends import (
    LmBackend, Completion, OracleBackend, FaultyBackend, ScriptedBackend, HttpChatBackend, TruthBook
)
from kgplan.lm.gateway import LmGateway
from kgplan.lm.parsing import (
    ParsedUpdate, parse_update, render_update, parse_triplet_list, extract_goal_block, extract_json
)
from kgplan.lm.prompts import (
    Template, build_prompt, format_entities, format_context, format_errors, TEMPLATE_UPDATE, TEMPLATE_GOAL,
    TEMPLATE_QUERY_GRAPH,
)
from kgplan.lm.transcript import LmTranscript, TranscriptEntry, count_tokens
from kgplan.simulator.demo import GARY_UPDATE, FAUCET_TASK, MUG_TASK


class FlakyBackend(LmBackend, backend_id='flaky-test'):
    def __init__(self, failures: int, text: str = 'REMOVE: empty\nADD: empty'):
        self.failures = failures
        self.text = text
        self.calls = 0

    def complete(self, bundle):
        self.calls += 1
        if self.calls <= self.failures:
            raise BackendError(f'simulated failure #{self.calls}')
        return self._completion(bundle, self.text)


def update_prompt(text: str, attempt: int = 1, context=()):
    return build_prompt(TEMPLATE_UPDATE, attempt, text=text, context=format_context(context))


# region Update parsing


def test_parse_update():
    parsed = parse_update('REMOVE: (Red Pen, in_person_hand, Gary)\nADD: (red_pen, placed_at_table, kitchen_table)')
    assert parsed.removals == (('red_pen', 'in_person_hand', 'gary'),)
    assert parsed.additions == (('red_pen', 'placed_at_table', 'kitchen_table'),)


@pytest.mark.parametrize('text', [
    'REMOVE: none\nADD: Nothing.',
    'remove: empty\nadd: -',
    'REMOVE:\nADD: []',
])
def test_parse_empty_update(text):
    parsed = parse_update(text)
    assert parsed == ParsedUpdate()
    assert not parsed


def test_parse_update_strips_code_fences():
    parsed = parse_update('```\nREMOVE: empty\nADD: (mug, container_full, true)\n```')
    assert parsed.additions == (('mug', 'container_full', 'true'),)


def test_parse_update_multiple_triplets_across_lines():
    parsed = parse_update('REMOVE: (a, b, c),\n  (d, e, f)\nADD: empty')
    assert parsed.removals == (('a', 'b', 'c'), ('d', 'e', 'f'))


@pytest.mark.parametrize('text, message', [
    ('Sure! Here is the update.\nREMOVE: empty\nADD: empty', 'unexpected text before the REMOVE:/ADD: lines'),
    ('REMOVE: empty', 'missing ADD: line'),
    ('ADD: (mug, container_full, true)', 'missing REMOVE: line'),
    ('REMOVE: empty\nADD: empty\nADD: (a, b, c)', 'repeated ADD: line'),
])
def test_strict_update_errors(text, message):
    with pytest.raises(UpdateParseError) as exc_info:
        parse_update(text)
    assert exc_info.value.message == message


def test_strict_update_reports_span():
    with pytest.raises(UpdateParseError) as exc_info:
        parse_update('REMOVE: empty\nADD: (red_pen, placed_at_table kitchen_table)')
    assert exc_info.value.message == 'expected a triplet like (subject, relationship, object)'
    assert exc_info.value.span.startswith('(red_pen, placed_at_table')
    assert ' at ' in str(exc_info.value)


def test_lenient_update():
    parsed = parse_update('Here you go:\nADD: (Red Pen, placed_at_table, kitchen_table), garbage', strict=False)
    assert parsed.removals == ()
    assert parsed.additions == (('red_pen', 'placed_at_table', 'kitchen_table'),)


def test_lenient_triplet_list_skips_bad_items():
    body = '(a, b, c), (broken, item), (d, e, f)'
    assert parse_triplet_list(body, strict=False) == [('a', 'b', 'c'), ('d', 'e', 'f')]
    with pytest.raises(UpdateParseError):
        parse_triplet_list(body)


def test_render_update():
    assert render_update(ParsedUpdate((('a', 'b', 'c'),), ())) == 'REMOVE: (a, b, c)\nADD: empty'


# endregion

# region Goal and JSON extraction


def test_extract_goal_block():
    text = 'The robot should do this:\n(:goal (and (light_on lamp) (not (tv_on tv))))\nLet me know!'
    assert extract_goal_block(text) == '(:goal (and (light_on lamp) (not (tv_on tv))))'


@pytest.mark.parametrize('text, message', [
    ('(and (light_on lamp))', 'no (:goal ...) block'),
    ('(:goal (and (light_on lamp))', 'never closed'),
])
def test_extract_goal_block_errors(text, message):
    with pytest.raises(GoalParseError, match=re.escape(message)):
        extract_goal_block(text)


def test_extract_json():
    assert extract_json('Sure:\n```json\n{"entities": ["mug"]}\n```') == {'entities': ['mug']}
    with pytest.raises(ValueError):
        extract_json('no braces here')
    with pytest.raises(ValueError):
        extract_json('{"entities": [}')


# endregion

# region Prompts


def test_template_drops_empty_placeholder_lines():
    template = Template('t', 'Header\n{{context}}\nText: {{text}}\n{{errors}}\n')
    assert template.sections == ('context', 'text', 'errors')
    assert template.render({'text': 'hello'}) == 'Header\nText: hello\n'
    assert template.render({'context': 'ctx', 'text': 'hello'}) == 'Header\nctx\nText: hello\n'


def test_template_rejects_unknown_sections():
    with pytest.raises(ValueError):
        Template('t', '{{text}}').render({'text': 'a', 'extra': 'b'})
    with pytest.raises(ValueError):
        Template('t', '{{text}} {{text}}')


def test_build_prompt():
    bundle = build_prompt(TEMPLATE_UPDATE, 2, text='The mug is full.', entities='mug - dish', errors='')
    assert bundle.template_id == TEMPLATE_UPDATE
    assert bundle.attempt == 2
    assert bundle.sections == (('entities', 'mug - dish'), ('text', 'The mug is full.'))
    assert bundle.section('context') == ''
    assert 'The mug is full.' in bundle.rendered
    assert '{{' not in bundle.rendered


def test_format_helpers():
    entities = [Entity.of('red_pen', 'pen', color='red'), Entity('kitchen', 'room')]
    assert format_entities(entities) == 'kitchen - room\nred_pen - pen (color=red)'
    assert format_errors([]) == ''
    assert format_errors(['bad']).endswith('correct them:\n- bad')


# endregion

# region Transcript


def test_count_tokens():
    assert count_tokens('REMOVE: (a, b, c)') == 9
    assert count_tokens('') == 0


def test_transcript_accounting(tmp_path):
    transcript = LmTranscript('oracle')
    transcript.append(TranscriptEntry(TEMPLATE_QUERY_GRAPH, 'p1', 'c1', 10, 2, label='update 1'))
    transcript.append(TranscriptEntry(TEMPLATE_UPDATE, 'p2', 'c2', 20, 5, label='update 1'))
    transcript.append(TranscriptEntry(TEMPLATE_GOAL, 'p3', 'c3', 30, 7, attempt=2, label='task 1'))
    assert transcript.total_tokens == 74
    assert transcript.tokens_since(1) == (50, 12)
    assert transcript.tokens_since(3) == (0, 0)
    assert transcript.by_label() == {'update 1': (30, 7), 'task 1': (30, 7)}

    path = tmp_path.joinpath('transcript.jsonl')
    transcript.dump(path)
    loaded = LmTranscript.load(path)
    assert loaded.backend_id == 'oracle'
    assert list(loaded) == list(transcript)
    assert LmTranscript.loads(transcript.dumps())[2].attempt == 2


def test_transcript_rejects_negative_tokens():
    with pytest.raises(ValueError):
        TranscriptEntry(TEMPLATE_UPDATE, 'p', 'c', -1, 0)


# endregion

# region Backends


def test_oracle_update(truth_book):
    backend = OracleBackend(truth_book)
    parsed = parse_update(backend.complete(update_prompt(GARY_UPDATE.text)).text)
    assert ('red_pen', 'in_person_hand', 'gary') in parsed.removals
    assert ('red_pen', 'placed_at_table', 'alexander_bedroom_table') in parsed.additions
    assert backend.complete(update_prompt('Nothing happened at all.')).text == 'REMOVE: empty\nADD: empty'


def test_oracle_lookup_ignores_case_and_punctuation(truth_book):
    assert FAUCET_TASK.text.upper().rstrip('.') in truth_book
    assert TruthBook.key('Turn OFF the faucet!') == 'turn off the faucet'


def test_oracle_goals(truth_book):
    backend = OracleBackend(truth_book)
    faucet = backend.complete(build_prompt(TEMPLATE_GOAL, text=FAUCET_TASK.text)).text
    assert faucet == '(:goal (not (faucet_on bathroom_sink)))'
    full_mug = format_context([Triplet('mug', 'container_full')])
    mug = backend.complete(build_prompt(TEMPLATE_GOAL, text=MUG_TASK.text, context=full_mug)).text
    assert 'bowl' in mug and 'mug ' not in mug
    assert backend.complete(build_prompt(TEMPLATE_GOAL, text='Dance.')).text == '(:goal (and))'


def test_faulty_backend_drop_removal(truth_book):
    backend = FaultyBackend(truth_book, rates={F_DROP_REMOVAL: 1.0})
    text = backend.complete(update_prompt(GARY_UPDATE.text)).text
    assert not text.startswith('REMOVE:')
    with pytest.raises(UpdateParseError, match='missing REMOVE: line'):
        parse_update(text)
    assert backend.injections == [(GARY_UPDATE.text, 1, (F_DROP_REMOVAL,))]


def test_faulty_backend_retry_rates(truth_book):
    backend = FaultyBackend(truth_book, rates={F_PHANTOM_REMOVAL: 1.0}, retry_rates={})
    first = parse_update(backend.complete(update_prompt(GARY_UPDATE.text, 1)).text)
    second = parse_update(backend.complete(update_prompt(GARY_UPDATE.text, 2)).text)
    assert len(first.removals) == 3 and len(first.additions) == 1
    assert len(second.removals) == 2 and len(second.additions) == 2
    assert [attempt for _, attempt, _ in backend.injections] == [1]


def test_faulty_backend_is_deterministic(truth_book):
    rates = {F_WRONG_PREDICATE: 0.5, F_CONTRADICTION: 0.5}

    def completions():
        backend = FaultyBackend(truth_book, seed=7, rates=rates)
        return [backend.complete(update_prompt(GARY_UPDATE.text, attempt)).text for attempt in (1, 2)]

    assert completions() == completions()


def test_faulty_backend_unknown_fault(truth_book):
    with pytest.raises(ConfigError):
        FaultyBackend(truth_book, rates={'telepathy': 0.5})


def test_scripted_backend():
    backend = ScriptedBackend([(TEMPLATE_UPDATE, 'REMOVE: empty\nADD: empty')])
    assert backend.remaining == 1
    assert backend.complete(update_prompt('x')).text == 'REMOVE: empty\nADD: empty'
    assert backend.remaining == 0
    with pytest.raises(ScriptExhausted):
        backend.complete(update_prompt('x'))


def test_backend_for_id():
    assert LmBackend.for_id('oracle') is OracleBackend
    with pytest.raises(ConfigError):
        LmBackend.for_id('gpt-17')


class FakeResponse:
    def __init__(self, status_code: int, body=None):
        self.status_code = status_code
        self.ok = status_code < 400
        self.body = body
        self.text = str(body)

    def json(self):
        return self.body


def test_http_backend_from_env(monkeypatch):
    monkeypatch.delenv('KGPLAN_LM_URL', raising=False)
    with pytest.raises(ConfigError, match='KGPLAN_LM_URL'):
        HttpChatBackend.from_env()
    monkeypatch.setenv('KGPLAN_LM_URL', 'http://localhost:8000/v1/')
    monkeypatch.setenv('KGPLAN_LM_MODEL', 'test-model')
    backend = HttpChatBackend.from_env()
    assert backend.url == 'http://localhost:8000/v1/chat/completions'
    assert backend.model == 'test-model'


def test_http_backend_responses(monkeypatch):
    backend = HttpChatBackend('http://localhost:8000/v1', 'test-model')
    body = {'choices': [{'message': {'content': 'REMOVE: empty\nADD: empty'}}], 'usage': {'prompt_tokens': 11}}
    monkeypatch.setattr(backend.session, 'post', lambda *a, **kw: FakeResponse(200, body))
    completion = backend.complete(update_prompt('x'))
    assert completion == Completion('REMOVE: empty\nADD: empty', 11, 6)

    monkeypatch.setattr(backend.session, 'post', lambda *a, **kw: FakeResponse(503))
    with pytest.raises(BackendError):
        backend.complete(update_prompt('x'))

    monkeypatch.setattr(backend.session, 'post', lambda *a, **kw: FakeResponse(400, 'bad request'))
    with pytest.raises(LmError) as exc_info:
        backend.complete(update_prompt('x'))
    assert not isinstance(exc_info.value, BackendError)

    def refuse(*args, **kwargs):
        raise requests.ConnectionError('refused')

    monkeypatch.setattr(backend.session, 'post', refuse)
    with pytest.raises(BackendError):
        backend.complete(update_prompt('x'))


# endregion

# region Gateway


def test_gateway_records_transcript(truth_book):
    gateway = LmGateway(OracleBackend(truth_book), retry_delay=0)
    gateway.complete(update_prompt(GARY_UPDATE.text), 'update 1')
    entry = gateway.transcript[0]
    assert entry.template_id == TEMPLATE_UPDATE
    assert entry.label == 'update 1'
    assert entry.input_tokens == count_tokens(entry.prompt)
    assert gateway.transcript.backend_id == 'oracle'


def test_gateway_retries_backend_errors():
    backend = FlakyBackend(failures=2)
    gateway = LmGateway(backend, backend_retries=2, retry_delay=0)
    assert gateway.complete(update_prompt('x')).text == 'REMOVE: empty\nADD: empty'
    assert backend.calls == 3
    assert len(gateway.transcript) == 1


def test_gateway_gives_up_after_retries():
    backend = FlakyBackend(failures=5)
    gateway = LmGateway(backend, backend_retries=1, retry_delay=0)
    with pytest.raises(BackendError):
        gateway.complete(update_prompt('x'))
    assert backend.calls == 2
    assert len(gateway.transcript) == 0


def test_gateway_token_budget():
    gateway = LmGateway(FlakyBackend(failures=0), token_budget=20, retry_delay=0)
    gateway.complete(update_prompt('x'))
    assert gateway.transcript.total_tokens >= 20
    with pytest.raises(TokenBudgetExceeded) as exc_info:
        gateway.complete(update_prompt('x'))
    assert exc_info.value.budget == 20
    assert exc_info.value.used == gateway.transcript.total_tokens
    assert len(gateway.transcript) == 1


# endregion
