"""
Natural-language task to validated plan: retrieve the relevant context, have the model write the goal, synthesize a
PDDL problem whose initial state is the retrieved context, and solve it.

:author: Doug Skrypa
"""

import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Dict, Tuple, List, FrozenSet, Union

from .core.constants import (
    STAGE_RETRIEVAL, STAGE_GOAL, STAGE_PROBLEM, STAGE_GROUNDING, STAGE_SEARCH, STAGE_RETRIEVAL_INSUFFICIENT,
    DEFAULT_ALWAYS_INCLUDE, DEFAULT_RETRY_CAP,
)
from .core.exceptions import (
    PipelineError, RetrievalError, GoalParseError, PddlError, GroundingLimitExceeded, PlannerError, UnsolvableProblem,
)
from .core.utils import atomic_write
from .graph.world import WorldGraph, to_init_atoms
from .lm.gateway import LmGateway
from .lm.parsing import parse_goal_block
from .lm.prompts import build_prompt, format_domain, format_entities, format_context, format_errors, TEMPLATE_GOAL
from .pddl.goals import goal_objects
from .pddl.model import Problem, GoalFormula, Atom
from .pddl.printer import print_problem
from .planner.external import ExternalPlanner
from .planner.search import Plan, PlannerConfig, solve
from .planner.validation import ValidationResult, validate
from .retrieval.retrievers import Retriever, RetrievalResult

__all__ = ['PlanOutcome', 'TaskPipeline', 'init_diff']
log = logging.getLogger(__name__)


@dataclass
class PlanOutcome:
    text: str
    success: bool = False
    stage: Optional[str] = None             # the failing stage
    error: Optional[str] = None
    retrieval: Optional[RetrievalResult] = field(default=None, repr=False)
    goal: Optional[GoalFormula] = None
    problem: Optional[Problem] = field(default=None, repr=False)
    plan: Optional[Plan] = None
    full_validation: Optional[ValidationResult] = None
    revision: int = 0                       # revision of the graph snapshot the plan was made for
    timings: Dict[str, float] = field(default_factory=dict)
    transcript_span: Tuple[int, int] = (0, 0)
    input_tokens: int = 0
    output_tokens: int = 0
    problem_path: Optional[Path] = None
    plan_path: Optional[Path] = None

    def __str__(self):
        status = 'success' if self.success else f'failed at {self.stage}'
        return f'<PlanOutcome[{status}]({self.text!r})>'

    @property
    def total_tokens(self) -> int:
        return self.input_tokens + self.output_tokens

    @property
    def planner_time(self) -> float:
        return self.timings.get(STAGE_GROUNDING, 0.0) + self.timings.get(STAGE_SEARCH, 0.0)

    def raise_for_failure(self):
        if not self.success:
            raise PipelineError(self.stage, self.error or 'unknown failure')


def init_diff(problem: Problem, graph: WorldGraph) -> Tuple[FrozenSet[Atom], FrozenSet[Atom]]:
    """
    :return: Tuple of (atoms of the full graph missing from the problem's init, init atoms absent from the graph)
    """
    full = to_init_atoms(graph.triplets)
    return full - problem.init, problem.init - full


class TaskPipeline:
    """
    :param gateway: Gateway for goal generation
    :param retriever: Selects the triplets that populate the problem's initial state
    :param planner_config: Embedded planner settings
    :param always_include: Predicates whose triplets are always part of the initial state (static topology)
    :param restrict_objects: Limit the problem's objects to the retrieved entities and the goal's objects instead of
      every entity in the graph
    :param diagnose_failures: When the restricted problem is unsolvable, solve the full-context problem to tell
      missing context apart from an unsolvable task
    :param retry_cap: Maximum goal-generation prompts
    :param run_dir: Directory that receives ``problem_N.pddl`` and ``plan_N.txt`` for each task
    :param external_planner: Solve with this executable instead of the embedded planner
    """

    def __init__(
        self,
        gateway: LmGateway,
        retriever: Retriever,
        planner_config: Optional[PlannerConfig] = None,
        always_include: Tuple[str, ...] = DEFAULT_ALWAYS_INCLUDE,
        restrict_objects: bool = False,
        diagnose_failures: bool = True,
        retry_cap: int = DEFAULT_RETRY_CAP,
        run_dir: Union[str, Path, None] = None,
        external_planner: Optional[ExternalPlanner] = None,
    ):
        self.gateway = gateway
        self.retriever = retriever
        self.planner_config = planner_config or PlannerConfig()
        self.always_include = tuple(always_include)
        self.restrict_objects = restrict_objects
        self.diagnose_failures = diagnose_failures
        self.retry_cap = retry_cap
        self.run_dir = Path(run_dir).expanduser() if run_dir else None
        self.external_planner = external_planner
        self.history: List[PlanOutcome] = []

    def __repr__(self):
        return f'<{self.__class__.__name__}[{self.retriever!r}](tasks={len(self.history)})>'

    def plan_task(self, graph: WorldGraph, text: str, label: Optional[str] = None) -> PlanOutcome:
        """
        Run retrieval, goal generation, problem synthesis, and search in that order.  A failure at any stage is
        recorded on the outcome with its stage tag instead of being raised.
        """
        outcome = PlanOutcome(text, revision=graph.revision)
        start = len(self.gateway.transcript)
        began = time.perf_counter()
        try:
            self._run(graph, text, outcome, label)
        except PipelineError as e:
            outcome.stage, outcome.error = e.stage, e.message
            log.warning(f'Planning failed at stage={e.stage}: {e.message}')
        finally:
            outcome.timings['total'] = time.perf_counter() - began
            outcome.transcript_span = (start, len(self.gateway.transcript))
            outcome.input_tokens, outcome.output_tokens = self.gateway.transcript.tokens_since(start)
            self.history.append(outcome)
        return outcome

    def _run(self, graph: WorldGraph, text: str, outcome: PlanOutcome, label: Optional[str]):
        with _timed(outcome, STAGE_RETRIEVAL):
            try:
                retrieval = self.retriever.retrieve(graph, text, label)
            except RetrievalError as e:
                raise PipelineError(STAGE_RETRIEVAL, str(e)) from e
            static = {t for t in graph.triplets if t.predicate in self.always_include}
            outcome.retrieval = retrieval = retrieval.with_extra(static)

        with _timed(outcome, STAGE_GOAL):
            outcome.goal = goal = self._generate_goal(graph, text, retrieval, label)

        with _timed(outcome, STAGE_PROBLEM):
            outcome.problem = problem = self._synthesize(graph, retrieval, goal)
            outcome.problem_path = self._write(f'problem_{len(self.history) + 1}.pddl', print_problem(problem))

        outcome.plan = plan = self._solve(graph, problem, outcome)
        outcome.plan_path = self._write(f'plan_{len(self.history) + 1}.txt', str(plan) + '\n' if plan else '')

        full_problem = Problem(problem.name, problem.domain_name, graph.objects(), to_init_atoms(graph.triplets), goal)
        outcome.full_validation = result = validate(graph.domain, full_problem, plan)
        if not result:
            raise PipelineError(
                STAGE_RETRIEVAL_INSUFFICIENT, f'the plan does not hold against the full world state: {result}'
            )
        outcome.success = True
        log.info(f'Planned {len(plan)} step(s) for {text!r}')

    def _generate_goal(self, graph: WorldGraph, text: str, retrieval: RetrievalResult, label: Optional[str]):
        sections = dict(
            domain=format_domain(graph.domain, types=True),
            entities=format_entities(graph.entities.values()),
            context=format_context(retrieval.relevant),
            text=text,
        )
        objects = graph.objects()
        errors = []
        for attempt in range(1, self.retry_cap + 1):
            bundle = build_prompt(TEMPLATE_GOAL, attempt, **sections, errors=format_errors(errors))
            completion = self.gateway.complete(bundle, label)
            try:
                return parse_goal_block(completion.text, graph.domain, objects)
            except (GoalParseError, PddlError) as e:
                log.debug(f'Invalid goal on {attempt=}: {e}')
                errors.append(str(e))
        raise PipelineError(STAGE_GOAL, f'no valid goal after {self.retry_cap} attempts: {errors[-1]}')

    def _synthesize(self, graph: WorldGraph, retrieval: RetrievalResult, goal: GoalFormula) -> Problem:
        objects = graph.objects()
        if self.restrict_objects:
            keep = retrieval.objects | goal_objects(goal)
            objects = {name: type_name for name, type_name in objects.items() if name in keep}
        init = to_init_atoms(retrieval.relevant)
        if stray := {arg for atom in init for arg in atom.args if arg not in objects}:
            names = ', '.join(sorted(stray))
            raise PipelineError(STAGE_PROBLEM, f'init refers to objects outside the problem: {names}')
        return Problem(f'task_{len(self.history) + 1}', graph.domain.name, objects, init, goal)

    def _solve(self, graph: WorldGraph, problem: Problem, outcome: PlanOutcome) -> Plan:
        try:
            if self.external_planner is not None:
                with _timed(outcome, STAGE_SEARCH):
                    return self.external_planner.solve(graph.domain, problem)
            plan = solve(graph.domain, problem, self.planner_config)
        except GroundingLimitExceeded as e:
            raise PipelineError(STAGE_GROUNDING, str(e)) from e
        except UnsolvableProblem as e:
            stage = STAGE_SEARCH
            if self.diagnose_failures and outcome.retrieval.irrelevant and self._full_context_solvable(graph, problem):
                stage = STAGE_RETRIEVAL_INSUFFICIENT
            raise PipelineError(stage, str(e)) from e
        except PlannerError as e:
            raise PipelineError(STAGE_SEARCH, str(e)) from e

        outcome.timings[STAGE_GROUNDING] = plan.stats.grounding_time
        outcome.timings[STAGE_SEARCH] = plan.stats.search_time
        return plan

    def _full_context_solvable(self, graph: WorldGraph, problem: Problem) -> bool:
        full = Problem(problem.name, problem.domain_name, graph.objects(), to_init_atoms(graph.triplets), problem.goal)
        try:
            solve(graph.domain, full, self.planner_config)
        except PlannerError:
            return False
        log.debug('The task is solvable with the full context; retrieval missed relevant facts')
        return True

    def _write(self, name: str, content: str) -> Optional[Path]:
        if self.run_dir is None:
            return None
        self.run_dir.mkdir(parents=True, exist_ok=True)
        path = self.run_dir.joinpath(name)
        with atomic_write(path) as f:
            f.write(content)
        log.debug(f'Wrote {path}')
        return path


@contextmanager
def _timed(outcome: PlanOutcome, stage: str):
    start = time.perf_counter()
    try:
        yield
    finally:
        outcome.timings[stage] = time.perf_counter() - start
