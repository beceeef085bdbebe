"""
Language model backends.

:author: Doug Skrypa
"""

import json
import logging
import os
import random
from abc import ABC, abstractmethod
from dataclasses import dataclass
from threading import Lock
from typing import Dict, Type, Optional, Mapping, Union, Callable, FrozenSet, Tuple, List, Any, Iterable

import requests

from ..core.constants import (
    FAULTS, F_DROP_REMOVAL, F_DROP_ADDITION, F_WRONG_ENTITY_NAME, F_WRONG_PREDICATE, F_ARITY_ERROR,
    F_DUPLICATE_ADDITION, F_PHANTOM_REMOVAL, F_CONTRADICTION,
)
from ..core.exceptions import BackendError, LmError, ScriptExhausted, ConfigError
from ..core.utils import DictAttrProperty, stable_seed
from ..graph.similarity import normalize_tokens
from ..graph.world import GraphDelta, Triplet
from .parsing import RawTriplet, parse_triplet_list, parse_update, render_update, ParsedUpdate
from .prompts import PromptBundle, TEMPLATE_UPDATE, TEMPLATE_GOAL, TEMPLATE_QUERY_GRAPH, TEMPLATE_ENTITY_SELECTION
from .transcript import LmTranscript, TranscriptEntry, count_tokens

__all__ = [
    'Completion', 'LmBackend', 'TruthEntry', 'TruthBook', 'OracleBackend', 'FaultyBackend', 'ScriptedBackend',
    'HttpChatBackend', 'ChatResponse',
]
log = logging.getLogger(__name__)

GoalSource = Union[str, Callable[[FrozenSet[Triplet]], str]]
EMPTY_QUERY_GRAPH = '{"entities": [], "relations": []}'


@dataclass(frozen=True)
class Completion:
    text: str
    input_tokens: int
    output_tokens: int


class LmBackend(ABC):
    _backends: Dict[str, Type['LmBackend']] = {}
    backend_id: Optional[str] = None

    # noinspection PyMethodOverriding
    def __init_subclass__(cls, backend_id: str):
        cls.backend_id = backend_id
        LmBackend._backends[backend_id] = cls

    @classmethod
    def for_id(cls, backend_id: str) -> Type['LmBackend']:
        try:
            return cls._backends[backend_id]
        except KeyError:
            raise ConfigError(f'Unknown LM backend: {backend_id!r} (choose from: {", ".join(sorted(cls._backends))})')

    @abstractmethod
    def complete(self, bundle: PromptBundle) -> Completion:
        raise NotImplementedError

    @staticmethod
    def _completion(bundle: PromptBundle, text: str) -> Completion:
        return Completion(text, count_tokens(bundle.rendered), count_tokens(text))


# region Ground truth


@dataclass
class TruthEntry:
    """What a perfect model would answer for a given update or task text"""
    text: str
    delta: Optional[GraphDelta] = None
    query_graph: Optional[Mapping[str, Any]] = None
    selected: Tuple[str, ...] = ()
    goal: Optional[GoalSource] = None


class TruthBook:
    def __init__(self, entries: Iterable[TruthEntry] = ()):
        self._entries: Dict[str, TruthEntry] = {}
        for entry in entries:
            self.add(entry)

    def __len__(self):
        return len(self._entries)

    def __contains__(self, text: str):
        return self.key(text) in self._entries

    @staticmethod
    def key(text: str) -> str:
        return ' '.join(normalize_tokens(text))

    def add(self, entry: TruthEntry):
        self._entries[self.key(entry.text)] = entry

    def get(self, text: str) -> Optional[TruthEntry]:
        return self._entries.get(self.key(text))


def context_triplets(bundle: PromptBundle) -> FrozenSet[Triplet]:
    """The triplets listed in the bundle's context section"""
    return frozenset(Triplet.from_parts(*raw) for raw in parse_triplet_list(bundle.section('context'), strict=False))


# endregion


class OracleBackend(LmBackend, backend_id='oracle'):
    """Answers every prompt from the ground truth, as a perfect model would"""

    def __init__(self, book: TruthBook):
        self.book = book

    def answer(self, bundle: PromptBundle) -> str:
        entry = self.book.get(bundle.section('text'))
        template = bundle.template_id
        if template == TEMPLATE_UPDATE:
            delta = entry.delta if entry and entry.delta else GraphDelta()
            return render_update(_to_parsed(delta))
        elif template == TEMPLATE_QUERY_GRAPH:
            return json.dumps(entry.query_graph) if entry and entry.query_graph else EMPTY_QUERY_GRAPH
        elif template == TEMPLATE_ENTITY_SELECTION:
            return json.dumps({'entities': list(entry.selected) if entry else []})
        elif template == TEMPLATE_GOAL:
            if entry is None or entry.goal is None:
                return '(:goal (and))'
            goal = entry.goal if isinstance(entry.goal, str) else entry.goal(context_triplets(bundle))
            return goal if goal.lstrip().startswith('(:goal') else f'(:goal {goal})'
        raise LmError(f'{self.backend_id} backend has no answer for template={template!r}')

    def complete(self, bundle: PromptBundle) -> Completion:
        return self._completion(bundle, self.answer(bundle))


def _to_parsed(delta: GraphDelta) -> ParsedUpdate:
    def raw(t: Triplet) -> RawTriplet:
        return t.subject, t.predicate, 'true' if t.object is None else t.object

    return ParsedUpdate(tuple(map(raw, sorted(delta.removals))), tuple(map(raw, sorted(delta.additions))))


class FaultyBackend(OracleBackend, backend_id='faulty'):
    """
    The oracle with faults injected into update completions.  Each fault in the catalog is drawn independently per
    call with its configured rate; the draw is seeded from (seed, template, sections, attempt), so identical prompts
    always receive identical completions.

    :param book: Ground truth to answer from
    :param seed: Base seed for fault draws
    :param rates: Fault name -> probability per attempt
    :param retry_rates: Fault name -> probability for attempts after the first (default: same as ``rates``)
    :param context_scale: Rates are multiplied by ``1 + context_scale * n / 100`` where n is the number of context
      triplets in the prompt, so longer contexts produce more mistakes
    """

    def __init__(
        self,
        book: TruthBook,
        seed: int = 0,
        rates: Optional[Mapping[str, float]] = None,
        retry_rates: Optional[Mapping[str, float]] = None,
        context_scale: float = 0.0,
    ):
        super().__init__(book)
        for name in (*(rates or ()), *(retry_rates or ())):
            if name not in FAULTS:
                raise ConfigError(f'Unknown fault: {name!r} (choose from: {", ".join(FAULTS)})')
        self.seed = seed
        self.rates = dict(rates or {})
        self.retry_rates = None if retry_rates is None else dict(retry_rates)
        self.context_scale = context_scale
        self.injections: List[Tuple[str, int, Tuple[str, ...]]] = []
        self._lock = Lock()

    def _rate(self, name: str, bundle: PromptBundle, n_context: int) -> float:
        rates = self.retry_rates if bundle.attempt > 1 and self.retry_rates is not None else self.rates
        rate = rates.get(name, 0.0)
        if self.context_scale:
            rate *= 1 + self.context_scale * n_context / 100
        return min(1.0, rate)

    def complete(self, bundle: PromptBundle) -> Completion:
        text = self.answer(bundle)
        if bundle.template_id == TEMPLATE_UPDATE:
            text, faults = self._inject(bundle, text)
            if faults:
                with self._lock:
                    self.injections.append((bundle.section('text'), bundle.attempt, faults))
                log.debug(f'Injected faults={faults} on attempt={bundle.attempt}')
        return self._completion(bundle, text)

    def _inject(self, bundle: PromptBundle, text: str) -> Tuple[str, Tuple[str, ...]]:
        rng = random.Random(stable_seed(self.seed, bundle.template_id, bundle.sections, bundle.attempt))
        context = sorted(context_triplets(bundle))
        parsed = parse_update(text)
        removals, additions = list(parsed.removals), list(parsed.additions)
        drop_remove = drop_add = False
        applied = []
        for name in FAULTS:
            if rng.random() >= self._rate(name, bundle, len(context)):
                continue
            if name == F_DROP_REMOVAL:
                drop_remove = True
            elif name == F_DROP_ADDITION:
                drop_add = True
            elif not _MUTATORS[name](rng, removals, additions, context):
                continue
            applied.append(name)

        if not applied:
            return text, ()
        lines = []
        rendered = render_update(ParsedUpdate(tuple(removals), tuple(additions))).splitlines()
        if not drop_remove:
            lines.append(rendered[0])
        if not drop_add:
            lines.append(rendered[1])
        return '\n'.join(lines), tuple(applied)


# region Fault mutators


def _pick(rng: random.Random, removals: List[RawTriplet], additions: List[RawTriplet]) -> Tuple[List[RawTriplet], int]:
    target = additions if additions else removals
    return target, rng.randrange(len(target))


def _wrong_entity_name(rng, removals, additions, context) -> bool:
    if not (removals or additions):
        return False
    target, i = _pick(rng, removals, additions)
    s, p, o = target[i]
    target[i] = (f'the_{s}', p, o)
    return True


def _wrong_predicate(rng, removals, additions, context) -> bool:
    if not (removals or additions):
        return False
    target, i = _pick(rng, removals, additions)
    s, p, o = target[i]
    target[i] = (s, f'is_{p}', o)
    return True


def _arity_error(rng, removals, additions, context) -> bool:
    if not (removals or additions):
        return False
    target, i = _pick(rng, removals, additions)
    s, p, o = target[i]
    target[i] = (s, p, s) if o == 'true' else (s, p, 'true')
    return True


def _duplicate_addition(rng, removals, additions, context: List[Triplet]) -> bool:
    removed = set(removals)
    existing = [t for t in context if (t.subject, t.predicate, t.object or 'true') not in removed]
    if existing:
        t = existing[rng.randrange(len(existing))]
        additions.append((t.subject, t.predicate, t.object or 'true'))
    elif additions:
        additions.append(additions[rng.randrange(len(additions))])
    else:
        return False
    return True


def _phantom_removal(rng, removals, additions, context) -> bool:
    if not additions:
        return False
    removals.append(additions.pop(rng.randrange(len(additions))))
    return True


def _contradiction(rng, removals, additions, context) -> bool:
    if additions:
        removals.append(additions[rng.randrange(len(additions))])
    elif removals:
        additions.append(removals[rng.randrange(len(removals))])
    else:
        return False
    return True


_MUTATORS = {
    F_WRONG_ENTITY_NAME: _wrong_entity_name,
    F_WRONG_PREDICATE: _wrong_predicate,
    F_ARITY_ERROR: _arity_error,
    F_DUPLICATE_ADDITION: _duplicate_addition,
    F_PHANTOM_REMOVAL: _phantom_removal,
    F_CONTRADICTION: _contradiction,
}

# endregion


class ScriptedBackend(LmBackend, backend_id='scripted'):
    """Replays the completions of a recorded transcript in order"""

    def __init__(self, transcript: Union[LmTranscript, Iterable[Tuple[str, str]]]):
        if not isinstance(transcript, LmTranscript):
            transcript = LmTranscript('scripted', [_script_entry(t, c) for t, c in transcript])
        self.transcript = transcript
        self._pos = 0
        self._lock = Lock()

    @property
    def remaining(self) -> int:
        return len(self.transcript) - self._pos

    def complete(self, bundle: PromptBundle) -> Completion:
        with self._lock:
            if self._pos >= len(self.transcript):
                raise ScriptExhausted(f'Scripted transcript exhausted after {self._pos} completions')
            entry = self.transcript[self._pos]
            self._pos += 1
        if entry.template_id != bundle.template_id:
            log.warning(
                f'Scripted completion #{self._pos} was recorded for {entry.template_id!r}, not {bundle.template_id!r}'
            )
        return Completion(entry.completion, count_tokens(bundle.rendered), count_tokens(entry.completion))


def _script_entry(template_id: str, completion: str) -> TranscriptEntry:
    return TranscriptEntry(template_id, '', completion, 0, count_tokens(completion))


class ChatResponse:
    """Field access for an OpenAI-compatible chat-completion response body"""
    content = DictAttrProperty('raw', 'choices.0.message.content', type=str)
    prompt_tokens = DictAttrProperty('raw', 'usage.prompt_tokens', default=None)
    completion_tokens = DictAttrProperty('raw', 'usage.completion_tokens', default=None)
    model = DictAttrProperty('raw', 'model', default=None)

    def __init__(self, raw: Mapping[str, Any]):
        self.raw = raw


class HttpChatBackend(LmBackend, backend_id='http'):
    """Minimal OpenAI-compatible chat-completion client"""

    def __init__(self, url: str, model: str, api_key: Optional[str] = None, timeout: float = 60):
        self.url = url.rstrip('/') + '/chat/completions'
        self.model = model
        self.api_key = api_key
        self.timeout = timeout
        self.session = requests.Session()

    @classmethod
    def from_env(cls) -> 'HttpChatBackend':
        try:
            url, model = os.environ['KGPLAN_LM_URL'], os.environ['KGPLAN_LM_MODEL']
        except KeyError as e:
            raise ConfigError(f'The http backend requires the {e.args[0]} environment variable') from None
        timeout = float(os.environ.get('KGPLAN_LM_TIMEOUT') or 60)
        return cls(url, model, os.environ.get('KGPLAN_LM_API_KEY'), timeout)

    def complete(self, bundle: PromptBundle) -> Completion:
        headers = {'Authorization': f'Bearer {self.api_key}'} if self.api_key else {}
        payload = {'model': self.model, 'messages': [{'role': 'user', 'content': bundle.rendered}], 'temperature': 0}
        try:
            resp = self.session.post(self.url, json=payload, headers=headers, timeout=self.timeout)
        except requests.RequestException as e:
            raise BackendError(f'Request to {self.url} failed: {e}') from e

        if resp.status_code == 429 or resp.status_code >= 500:
            raise BackendError(f'{self.url} responded with HTTP {resp.status_code}')
        elif not resp.ok:
            raise LmError(f'{self.url} rejected the request with HTTP {resp.status_code}: {resp.text[:200]}')

        try:
            response = ChatResponse(resp.json())
            text = response.content
        except Exception as e:
            raise BackendError(f'Unexpected response from {self.url}: {e}') from e

        input_tokens = response.prompt_tokens
        output_tokens = response.completion_tokens
        return Completion(
            text,
            count_tokens(bundle.rendered) if input_tokens is None else int(input_tokens),
            count_tokens(text) if output_tokens is None else int(output_tokens),
        )
