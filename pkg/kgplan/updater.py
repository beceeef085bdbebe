"""
Natural-language and perception updates of the world graph.

A natural-language update retrieves the relevant context, asks the model for the triplets to remove and add, verifies
the answer, and re-prompts with the verifier's findings until the answer is valid or the retry cap is reached.  The
verifier only checks syntax and typing: a well-formed answer that describes the wrong change is accepted.

:author: Doug Skrypa
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Tuple, Optional, List, FrozenSet, Iterable, Set, Union

from .core.constants import (
    V_WRONG_FORM, V_REMOVE_ABSENT, V_ADD_DUPLICATE, V_ADD_REMOVE_OVERLAP, V_MALFORMED_OUTPUT, DEFAULT_RETRY_CAP,
)
from .core.exceptions import UpdateParseError
from .core.utils import normalize_name
from .graph.world import (
    WorldGraph, GraphDelta, Triplet, check_triplet, apply_delta, apply_lenient, SOURCE_VERBAL, SOURCE_PERCEPTION,
)
from .lm.gateway import LmGateway
from .lm.parsing import ParsedUpdate, RawTriplet, parse_update, raw_to_text
from .lm.prompts import build_prompt, format_entities, format_context, format_domain, format_errors, TEMPLATE_UPDATE
from .pddl.model import Domain
from .retrieval.retrievers import Retriever, RetrievalResult

__all__ = [
    'Violation', 'VerifierReport', 'UpdateOutcome', 'verify', 'verify_completion', 'process_nl_update',
    'process_perception_update', 'read_perception_delta',
]
log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Violation:
    code: str
    triplet: Optional[str]      # text form; None when the completion could not be parsed at all
    message: str

    def __str__(self):
        return f'{self.code}: {self.triplet}: {self.message}' if self.triplet else f'{self.code}: {self.message}'


@dataclass(frozen=True)
class VerifierReport:
    violations: Tuple[Violation, ...] = ()
    candidate: Optional[GraphDelta] = field(default=None, compare=False)

    def __len__(self):
        return len(self.violations)

    def __iter__(self):
        return iter(self.violations)

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def codes(self) -> Tuple[str, ...]:
        return tuple(v.code for v in self.violations)

    def messages(self) -> List[str]:
        return [str(v) for v in self.violations]


def _checked(triplet: Triplet, graph: WorldGraph, domain: Domain) -> List[Violation]:
    return [Violation(code, str(triplet), msg) for code, msg in check_triplet(triplet, graph.entities, domain)]


def _triplet(raw: RawTriplet) -> Optional[Triplet]:
    return None if raw[2] == 'false' else Triplet.from_parts(*raw)


def verify(
    candidate: ParsedUpdate,
    graph: WorldGraph,
    domain: Optional[Domain] = None,
    scope: Optional[FrozenSet[Triplet]] = None,
) -> VerifierReport:
    """
    Check a parsed update against the graph and the domain.  Every problem is reported, not only the first.

    :param candidate: The parsed model answer
    :param graph: The graph the answer would be applied to
    :param domain: Predicate signatures to check against (default: the graph's domain)
    :param scope: The retrieved context; removals outside it are reported as ``remove-absent``
    :return: A report whose ``candidate`` is the delta the answer describes; the report is empty iff that delta can
      be applied
    """
    domain = domain or graph.domain
    violations: List[Violation] = []

    def convert(raws: Iterable[RawTriplet]) -> List[Triplet]:
        converted = []
        for raw in raws:
            if (triplet := _triplet(raw)) is None:
                violations.append(
                    Violation(V_WRONG_FORM, raw_to_text(raw), 'false is never stored; remove the true triplet instead')
                )
            else:
                converted.append(triplet)
        return converted

    removals, additions = convert(candidate.removals), convert(candidate.additions)
    overlap = set(removals).intersection(additions)
    for triplet in sorted(overlap):
        violations.append(Violation(V_ADD_REMOVE_OVERLAP, str(triplet), 'triplet is both removed and added'))

    for triplet in sorted(set(removals) - overlap):
        violations.extend(_checked(triplet, graph, domain))
        if triplet not in graph.triplets:
            violations.append(Violation(V_REMOVE_ABSENT, str(triplet), 'triplet is not in the graph'))
        elif scope is not None and triplet not in scope:
            violations.append(Violation(V_REMOVE_ABSENT, str(triplet), 'triplet is not in the retrieved context'))

    seen: Set[Triplet] = set()
    for triplet in additions:
        if triplet in overlap:
            continue
        if triplet in seen:
            violations.append(Violation(V_ADD_DUPLICATE, str(triplet), 'triplet is listed more than once'))
            continue
        seen.add(triplet)
        if triplet in graph.triplets:
            violations.append(Violation(V_ADD_DUPLICATE, str(triplet), 'triplet is already in the graph'))
        violations.extend(_checked(triplet, graph, domain))

    delta = GraphDelta(removals, additions, SOURCE_VERBAL)
    return VerifierReport(tuple(violations), delta)


def verify_completion(completion: str, graph: WorldGraph, scope: Optional[FrozenSet[Triplet]] = None) -> VerifierReport:
    """Strictly parse and verify a raw completion; grammar violations are reported as ``malformed-output``"""
    try:
        parsed = parse_update(completion, strict=True)
    except UpdateParseError as e:
        return VerifierReport((Violation(V_MALFORMED_OUTPUT, None, str(e)),))
    return verify(parsed, graph, scope=scope)


@dataclass(frozen=True)
class UpdateOutcome:
    text: str
    success: bool
    delta: Optional[GraphDelta]                     # the applied delta on success
    attempts: int
    reports: Tuple[VerifierReport, ...] = ()        # one per verified attempt
    dropped: Tuple[Triplet, ...] = ()               # additions discarded by lenient application
    retrieval: Optional[RetrievalResult] = field(default=None, compare=False, repr=False)
    transcript_span: Tuple[int, int] = (0, 0)       # [start, end) indexes into the gateway transcript
    input_tokens: int = 0
    output_tokens: int = 0

    def __str__(self):
        status = 'applied' if self.success else 'failed'
        return f'<UpdateOutcome[{status}, attempts={self.attempts}]({self.text!r})>'

    @property
    def total_tokens(self) -> int:
        return self.input_tokens + self.output_tokens

    @property
    def retries(self) -> int:
        return max(0, self.attempts - 1)


def process_nl_update(
    graph: WorldGraph,
    text: str,
    gateway: LmGateway,
    retriever: Retriever,
    retry_cap: int = DEFAULT_RETRY_CAP,
    verifier: bool = True,
    label: Optional[str] = None,
) -> Tuple[UpdateOutcome, WorldGraph]:
    """
    Register a natural-language state change.

    :param graph: The current world graph (not modified)
    :param text: The state change description
    :param gateway: Gateway for the update and retrieval prompts
    :param retriever: Selects the context shown to the model and the scope removals must fall in
    :param retry_cap: Maximum number of update prompts
    :param verifier: When False, the first answer is parsed leniently and applied with set arithmetic
    :param label: Transcript label for the prompts of this update
    :return: Tuple of (outcome, new graph).  On failure the given graph is returned unchanged.
    """
    start = len(gateway.transcript)
    retrieval = retriever.retrieve(graph, text, label)
    scope = retrieval.relevant
    sections = dict(
        entities=format_entities(graph.entities.values()),
        context=format_context(scope),
        domain=format_domain(graph.domain),
        text=text,
    )

    def outcome(success: bool, delta: Optional[GraphDelta], attempts: int, **kwargs) -> UpdateOutcome:
        end = len(gateway.transcript)
        inp, out = gateway.transcript.tokens_since(start)
        return UpdateOutcome(
            text, success, delta, attempts, retrieval=retrieval, transcript_span=(start, end), input_tokens=inp,
            output_tokens=out, **kwargs
        )

    if not verifier:
        bundle = build_prompt(TEMPLATE_UPDATE, 1, **sections)
        parsed = parse_update(gateway.complete(bundle, label).text, strict=False)
        removals = [t for t in map(_triplet, parsed.removals) if t is not None]
        additions = [t for t in map(_triplet, parsed.additions) if t is not None]
        new, dropped = apply_lenient(graph, removals, additions, scope)
        delta = GraphDelta(graph.triplets - new.triplets, new.triplets - graph.triplets, SOURCE_VERBAL, graph.revision)
        if not delta:
            new = graph
        removed, added = len(delta.removals), len(delta.additions)
        log.info(f'Applied unverified update to revision={graph.revision}: -{removed} +{added}')
        return outcome(True, delta, 1, dropped=tuple(dropped)), new

    errors: List[str] = []
    reports: List[VerifierReport] = []
    for attempt in range(1, retry_cap + 1):
        bundle = build_prompt(TEMPLATE_UPDATE, attempt, **sections, errors=format_errors(errors))
        completion = gateway.complete(bundle, label)
        report = verify_completion(completion.text, graph, scope)
        reports.append(report)
        if report.ok:
            delta = GraphDelta(report.candidate.removals, report.candidate.additions, SOURCE_VERBAL, graph.revision)
            new = apply_delta(graph, delta) if delta else graph
            log.info(
                f'Applied update on {attempt=} to revision={graph.revision}:'
                f' -{len(delta.removals)} +{len(delta.additions)}'
            )
            return outcome(True, delta, attempt, reports=tuple(reports)), new

        log.debug(f'Verifier found {len(report)} problem(s) on {attempt=}:\n' + '\n'.join(report.messages()))
        errors.extend(report.messages())

    log.warning(f'Update failed after {retry_cap} attempts: {text!r}')
    return outcome(False, None, retry_cap, reports=tuple(reports)), graph


def process_perception_update(graph: WorldGraph, delta: GraphDelta) -> WorldGraph:
    """Apply a perceived change directly; no model and no retries are involved."""
    if not delta:
        return graph
    if delta.source != SOURCE_PERCEPTION:
        delta = GraphDelta(delta.removals, delta.additions, SOURCE_PERCEPTION, delta.revision)
    new = apply_delta(graph, delta)
    log.debug(f'Applied perception delta: -{len(delta.removals)} +{len(delta.additions)}')
    return new


def _json_triplet(raw: Any, path: Path) -> RawTriplet:
    """Normalize a JSON ``[s, p, o]`` the same way the update grammar does; a boolean object becomes true / false"""
    if not isinstance(raw, list) or len(raw) != 3 or not all(isinstance(part, (str, bool)) for part in raw):
        raise UpdateParseError(f'Invalid triplet in delta file {path}', json.dumps(raw))
    return tuple(normalize_name(str(part)) for part in raw)


def read_perception_delta(path: Union[str, Path]) -> GraphDelta:
    """
    Read a perceived change from a file.  JSON files hold ``{"remove": [[s, p, o], ...], "add": [...]}``; any other
    file uses the ``REMOVE: ... / ADD: ...`` update grammar.

    :raises: :class:`~kgplan.core.exceptions.UpdateParseError` if the file cannot be parsed
    """
    path = Path(path).expanduser()
    text = path.read_text('utf-8')
    if path.suffix.lower() == '.json':
        try:
            data = json.loads(text)
            raw = [data.get(key) or [] for key in ('remove', 'add')]
        except (ValueError, AttributeError) as e:
            raise UpdateParseError(f'Invalid delta file {path}: {e}', text[:40]) from e
        if not all(isinstance(triplets, list) for triplets in raw):
            raise UpdateParseError(f'Invalid delta file {path}: remove and add must be lists', text[:40])
        parsed = ParsedUpdate(*(tuple(_json_triplet(t, path) for t in triplets) for triplets in raw))
    else:
        parsed = parse_update(text)

    removals = set(filter(None, map(_triplet, parsed.removals)))
    additions = set(filter(None, map(_triplet, parsed.additions)))
    return GraphDelta(removals, additions, SOURCE_PERCEPTION)
