"""
Scoring of simulated runs: state-change success per event, plan success per task, and the per-variant scoreboard
with its token and planner-time reports.

:author: Doug Skrypa
"""

import csv
import json
import logging
from collections import Counter
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Optional, FrozenSet, List, Dict, Any, Union, Iterable

import numpy as np

from ..core.exceptions import SimulationError
from ..core.utils import atomic_write
from ..graph.world import Triplet, WorldGraph, format_triplets
from ..pddl.model import Problem, Domain
from ..planner.search import Plan
from ..planner.validation import validate, FAIL_GOAL

__all__ = [
    'StateScore', 'PlanScore', 'EventRecord', 'TaskRecord', 'VariantScore', 'ScoreBoard', 'score_state_change',
    'score_plan', 'PLAN_INEXECUTABLE', 'PLAN_GOAL_UNSATISFIED', 'PLAN_MISSING',
]
log = logging.getLogger(__name__)

PLAN_INEXECUTABLE = 'inexecutable'
PLAN_GOAL_UNSATISFIED = 'goal-unsatisfied'
PLAN_MISSING = 'no-plan'
TIME_FIELDS = (
    'index', 'success', 'kind', 'stage', 'planner_time', 'full_planner_time', 'ground_actions', 'full_ground_actions',
)


@dataclass(frozen=True)
class StateScore:
    missing: FrozenSet[Triplet] = frozenset()   # in the ground truth but not in the agent's graph
    extra: FrozenSet[Triplet] = frozenset()     # in the agent's graph but not in the ground truth

    def __bool__(self):
        return self.match

    def __str__(self):
        if self.match:
            return 'match'
        return f'mismatch(missing: {format_triplets(self.missing)}; extra: {format_triplets(self.extra)})'

    @property
    def match(self) -> bool:
        return not (self.missing or self.extra)


@dataclass(frozen=True)
class PlanScore:
    success: bool
    kind: Optional[str] = None
    reason: str = ''

    def __bool__(self):
        return self.success

    def __str__(self):
        return 'success' if self.success else f'failure({self.kind}): {self.reason}'


def score_state_change(graph: WorldGraph, truth: WorldGraph) -> StateScore:
    """Compare the agent's graph with the ground truth by set equality on triplets"""
    if graph.entities.keys() != truth.entities.keys():
        raise SimulationError('The agent graph and the ground truth must have the same entities')
    return StateScore(truth.triplets - graph.triplets, graph.triplets - truth.triplets)


def score_plan(plan: Optional[Plan], problem: Problem, domain: Domain) -> PlanScore:
    """Validate the plan against the ground-truth initial state and goal"""
    if plan is None:
        return PlanScore(False, PLAN_MISSING, 'no plan was produced')
    result = validate(domain, problem, plan)
    if result:
        return PlanScore(True)
    return PlanScore(False, PLAN_GOAL_UNSATISFIED if result.kind == FAIL_GOAL else PLAN_INEXECUTABLE, str(result))


# region Records


@dataclass
class EventRecord:
    index: int
    success: Optional[bool]                     # None when the variant does not process updates
    attempts: int = 0
    input_tokens: int = 0
    output_tokens: int = 0
    missing: int = 0
    extra: int = 0

    @property
    def total_tokens(self) -> int:
        return self.input_tokens + self.output_tokens


@dataclass
class TaskRecord:
    index: int
    success: bool
    kind: Optional[str] = None                  # plan failure kind
    stage: Optional[str] = None                 # failing pipeline stage
    input_tokens: int = 0
    output_tokens: int = 0
    planner_time: Optional[float] = None        # retrieved initial state
    full_planner_time: Optional[float] = None   # full initial state
    ground_actions: Optional[int] = None
    full_ground_actions: Optional[int] = None


@dataclass
class VariantScore:
    variant: str
    events: List[EventRecord] = field(default_factory=list)
    tasks: List[TaskRecord] = field(default_factory=list)
    complete: bool = True
    error: Optional[str] = None

    def __repr__(self):
        return (
            f'<{self.__class__.__name__}[{self.variant}](state={_pct(self.state_change_rate)},'
            f' plan={_pct(self.plan_success_rate)})>'
        )

    @property
    def scored_events(self) -> List[EventRecord]:
        return [e for e in self.events if e.success is not None]

    @property
    def state_change_rate(self) -> Optional[float]:
        if not (scored := self.scored_events):
            return None
        return 100 * sum(e.success for e in scored) / len(scored)

    @property
    def plan_success_rate(self) -> Optional[float]:
        if not self.tasks:
            return None
        return 100 * sum(t.success for t in self.tasks) / len(self.tasks)

    @property
    def failure_kinds(self) -> Dict[str, int]:
        return dict(Counter(t.stage or t.kind for t in self.tasks if not t.success))

    @property
    def update_tokens(self) -> int:
        return sum(e.total_tokens for e in self.events)

    @property
    def plan_tokens(self) -> int:
        return sum(t.input_tokens + t.output_tokens for t in self.tasks)

    @property
    def tokens_per_state_change(self) -> Optional[float]:
        """Mean prompt + completion tokens per successful state change"""
        if not (successes := [e for e in self.events if e.success]):
            return None
        return sum(e.total_tokens for e in successes) / len(successes)

    @property
    def retries(self) -> int:
        return sum(max(0, e.attempts - 1) for e in self.events)

    @property
    def speedups(self) -> List[float]:
        return [
            t.full_planner_time / t.planner_time for t in self.tasks
            if t.success and t.planner_time and t.full_planner_time is not None
        ]

    @property
    def median_speedup(self) -> Optional[float]:
        return float(np.median(speedups)) if (speedups := self.speedups) else None

    def summary(self) -> Dict[str, Any]:
        return {
            'variant': self.variant,
            'complete': self.complete,
            'error': self.error,
            'events': len(self.scored_events),
            'state_change_success': self.state_change_rate,
            'tasks': len(self.tasks),
            'plan_success': self.plan_success_rate,
            'failure_kinds': self.failure_kinds,
            'update_tokens': self.update_tokens,
            'plan_tokens': self.plan_tokens,
            'tokens_per_state_change': self.tokens_per_state_change,
            'retries': self.retries,
            'median_planner_speedup': self.median_speedup,
        }


def _pct(value: Optional[float]) -> str:
    return 'n/a' if value is None else f'{value:.1f}%'


# endregion


@dataclass
class ScoreBoard:
    seed: int
    backend: str
    stream_hash: str
    variants: Dict[str, VariantScore] = field(default_factory=dict)
    files: List[Path] = field(default_factory=list)

    def __getitem__(self, variant: str) -> VariantScore:
        return self.variants[variant]

    def __iter__(self):
        return iter(self.variants.values())

    @property
    def complete(self) -> bool:
        return all(v.complete for v in self.variants.values())

    def to_dict(self) -> Dict[str, Any]:
        return {
            'seed': self.seed,
            'backend': self.backend,
            'stream_hash': self.stream_hash,
            'complete': self.complete,
            'variants': {
                name: {**score.summary(), 'event_records': list(map(asdict, score.events))}
                for name, score in self.variants.items()
            },
        }

    def table(self) -> List[Dict[str, Any]]:
        """One summary row per variant"""
        rows = []
        for score in self:
            summary = score.summary()
            rows.append({
                'variant': score.variant,
                'state change': _pct(summary['state_change_success']),
                'plan': _pct(summary['plan_success']),
                'tokens/change': _round(summary['tokens_per_state_change']),
                'retries': summary['retries'],
                'speedup': _round(summary['median_planner_speedup'], 2),
                'complete': score.complete,
            })
        return rows

    def write(self, run_dir: Union[str, Path]) -> List[Path]:
        """Write ``scoreboard.json``, ``tokens.csv`` and ``planner_time.csv`` to the given directory"""
        run_dir = Path(run_dir).expanduser()
        run_dir.mkdir(parents=True, exist_ok=True)
        paths = [run_dir.joinpath(name) for name in ('scoreboard.json', 'tokens.csv', 'planner_time.csv')]
        with atomic_write(paths[0]) as f:
            json.dump(self.to_dict(), f, indent=4, sort_keys=True, default=str)

        token_rows = (
            {'variant': s.variant, **asdict(e), 'total_tokens': e.total_tokens} for s in self for e in s.events
        )
        _write_csv(paths[1], token_rows, [*EventRecord.__dataclass_fields__, 'total_tokens'])
        time_rows = (
            {'variant': s.variant, **{k: v for k, v in asdict(t).items() if k in TIME_FIELDS}}
            for s in self for t in s.tasks
        )
        _write_csv(paths[2], time_rows, list(TIME_FIELDS))

        self.files.extend(paths)
        for path in paths:
            log.info(f'Wrote {path}')
        return paths


def _round(value: Optional[float], digits: int = 1) -> Optional[float]:
    return None if value is None else round(value, digits)


def _write_csv(path: Path, rows: Iterable[Dict[str, Any]], fields: List[str]):
    if fields[0] != 'variant':
        fields = ['variant', *fields]
    with atomic_write(path) as f:
        writer = csv.DictWriter(f, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)
