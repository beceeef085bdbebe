"""
Runs the simulated event and task streams through each retrieval / verification variant and scores them against the
ground truth.

Each variant gets its own agent starting from the initial world, and processes the same stream in order: events
become natural-language updates, and each task is planned, scored, and then followed by a perception resync of the
entities the executed plan touched.

:author: Doug Skrypa
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union, Iterable, List, Dict

from ..agent import Agent
from ..config import RunConfig
from ..core.constants import (
    RETRIEVER_FULL, RETRIEVER_BASELINE, RETRIEVER_SEARCH, VARIANT_S, VARIANT_R_MINUS, VARIANT_R_MINUS_V, VARIANT_R_PLUS,
    VARIANT_R_PLUS_V, VARIANT_R_SEARCH, VARIANT_R_SEARCH_V,
)
from ..core.exceptions import ConfigError, RetrievalError, LmError, PlannerError
from ..graph.world import WorldGraph, to_init_atoms
from ..lm.backends import TruthBook
from ..pddl.model import Problem
from ..planner.search import solve
from .scoring import EventRecord, TaskRecord, VariantScore, ScoreBoard, score_state_change, score_plan
from .simulation import Simulation, truth_entry
from .events import SimEvent
from .tasks import SimTask, resync_delta

__all__ = ['Variant', 'VARIANTS', 'VariantRunner', 'parse_variants', 'run_variant', 'run_ablation']
log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Variant:
    name: str
    retriever: str
    verifier: bool = False
    updates: bool = True        # False: verbal updates are ignored and the graph only changes through perception
    slug: str = ''

    def configure(self, config: RunConfig, run_dir: Optional[Path] = None) -> RunConfig:
        variant_dir = str(run_dir.joinpath(self.slug)) if run_dir else None
        return config.updated(retriever=self.retriever, verifier=self.verifier, run_dir=variant_dir)


VARIANTS: Dict[str, Variant] = {
    v.name: v for v in (
        Variant(VARIANT_S, RETRIEVER_FULL, updates=False, slug='S'),
        Variant(VARIANT_R_MINUS, RETRIEVER_FULL, slug='R_minus'),
        Variant(VARIANT_R_MINUS_V, RETRIEVER_FULL, True, slug='R_minus_V'),
        Variant(VARIANT_R_PLUS, RETRIEVER_BASELINE, slug='R_plus'),
        Variant(VARIANT_R_PLUS_V, RETRIEVER_BASELINE, True, slug='R_plus_V'),
        Variant(VARIANT_R_SEARCH, RETRIEVER_SEARCH, slug='R_search'),
        Variant(VARIANT_R_SEARCH_V, RETRIEVER_SEARCH, True, slug='R_search_V'),
    )
}


def parse_variants(text: Union[str, Iterable[str], None]) -> List[str]:
    """Accepts ``all``, a comma-separated string, or an iterable of variant names"""
    if not text or text == 'all':
        return list(VARIANTS)
    names = [n.strip() for n in text.split(',')] if isinstance(text, str) else list(text)
    if bad := [n for n in names if n not in VARIANTS]:
        raise ConfigError(f'Unknown variant(s): {", ".join(bad)} - expected one of: {", ".join(VARIANTS)}')
    return names


class VariantRunner:
    def __init__(self, sim: Simulation, variant: Variant, config: RunConfig, run_dir: Optional[Path] = None):
        self.sim = sim
        self.variant = variant
        self.config = variant.configure(config, run_dir)
        self.book = TruthBook()
        self.agent = Agent.from_config(self.config, graph=sim.world, book=self.book)
        self.planner_config = self.agent.pipeline.planner_config
        self.score = VariantScore(variant.name)

    def run(self) -> VariantScore:
        log.info(f'Running variant={self.variant.name} with {self.agent!r}')
        try:
            for step, _, after in self.sim.truth_states():
                self.book.add(truth_entry(step))
                if isinstance(step, SimEvent):
                    self.score.events.append(self.process_event(step))
                else:
                    self.score.tasks.append(self.process_task(step, after))
        except LmError as e:
            self.score.complete = False
            self.score.error = f'{e.__class__.__name__}: {e}'
            log.warning(f'Variant={self.variant.name} stopped early: {self.score.error}')

        if self.config.run_dir:
            path = Path(self.config.run_dir).expanduser()
            path.mkdir(parents=True, exist_ok=True)
            self.agent.gateway.transcript.dump(path.joinpath('transcript.jsonl'))
        log.info(f'Finished {self.score!r}')
        return self.score

    def process_event(self, event: SimEvent) -> EventRecord:
        if not self.variant.updates:
            return EventRecord(event.index, None)

        before = self.agent.graph
        expected = before.with_triplets((before.triplets - event.delta.removals) | event.delta.additions)
        try:
            outcome = self.agent.update(event.text)
        except RetrievalError as e:
            log.warning(f'Update {event} failed during retrieval: {e}')
            result = score_state_change(before, expected)
            return EventRecord(event.index, False, missing=len(result.missing), extra=len(result.extra))

        result = score_state_change(self.agent.graph, expected)
        if not result:
            log.debug(f'State change mismatch for {event}: {result}')
        return EventRecord(
            event.index, result.match, outcome.attempts, outcome.input_tokens, outcome.output_tokens,
            len(result.missing), len(result.extra),
        )

    def process_task(self, task: SimTask, truth_after: WorldGraph) -> TaskRecord:
        outcome = self.agent.plan(task.text)
        scored = score_plan(outcome.plan if outcome.success else None, task.problem, self.sim.domain)
        record = TaskRecord(
            task.index, scored.success, scored.kind, outcome.stage, outcome.input_tokens, outcome.output_tokens,
        )
        if outcome.success:
            record.planner_time = outcome.planner_time
            record.ground_actions = outcome.plan.stats.ground_actions
            if self.variant.retriever == RETRIEVER_FULL:
                record.full_planner_time, record.full_ground_actions = record.planner_time, record.ground_actions
            else:
                self._solve_full(outcome.problem, record)
        if not scored:
            log.debug(f'Plan for {task} scored {scored}')

        # The robot observes the entities it acted on while executing the task
        self.agent.perceive(resync_delta(self.agent.graph, truth_after, task.touched))
        return record

    def _solve_full(self, problem: Problem, record: TaskRecord):
        graph = self.agent.graph
        full = Problem(problem.name, problem.domain_name, graph.objects(), to_init_atoms(graph.triplets), problem.goal)
        try:
            plan = solve(graph.domain, full, self.planner_config)
        except PlannerError as e:
            log.debug(f'The full-context problem for task #{record.index} was not solved: {e}')
        else:
            record.full_planner_time = plan.stats.total_time
            record.full_ground_actions = plan.stats.ground_actions


def run_variant(
    sim: Simulation, variant: Union[str, Variant], config: RunConfig, run_dir: Union[str, Path, None] = None
) -> VariantScore:
    if isinstance(variant, str):
        variant = VARIANTS[parse_variants([variant])[0]]
    run_dir = Path(run_dir).expanduser() if run_dir else None
    return VariantRunner(sim, variant, config, run_dir).run()


def run_ablation(
    sim: Simulation,
    config: RunConfig,
    variants: Union[str, Iterable[str], None] = None,
    run_dir: Union[str, Path, None] = None,
) -> ScoreBoard:
    """
    Run each variant over the simulation, one after another.  A variant that exhausts the token budget or loses its
    backend is marked incomplete and the remaining variants still run.

    :param sim: The generated simulation
    :param config: Base configuration; the retriever and verifier settings are overridden per variant
    :param variants: Variant names (default: all)
    :param run_dir: Directory for the score reports, and per-variant PDDL files and transcripts
    :return: The scoreboard, which is also written to ``run_dir`` when one is given
    """
    run_dir = run_dir or config.run_dir
    board = ScoreBoard(sim.spec.seed, config.backend, sim.stream_hash())
    for name in parse_variants(variants):
        board.variants[name] = run_variant(sim, VARIANTS[name], config, run_dir)
    if run_dir:
        board.write(run_dir)
    return board
