"""
The desk-scale demo household and its scripted scenarios.

Each scenario starts from the shipped demo world (optionally adjusted by a setup delta) and runs a short sequence of
updates and tasks through an agent.  The oracle backend answers from the scenario's truth book; the laundry-room
scenario instead replays a recorded set of completions that corrupt the graph, so the resulting plan fails against the
ground truth even though the verifier accepts the update.

:author: Doug Skrypa
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple, List, Dict, Any, Union, FrozenSet, Sequence

import yaml

from ..agent import Agent, load_domain
from ..config import RunConfig, DATA_DIR
from ..core.exceptions import ConfigError, ConformanceError, GraphFileError
from ..graph.world import Entity, Triplet, GraphDelta, WorldGraph, apply_delta, to_init_atoms, from_init_atoms
from ..lm.backends import LmBackend, OracleBackend, ScriptedBackend, TruthEntry, TruthBook
from ..lm.parsing import ParsedUpdate, render_update
from ..lm.prompts import TEMPLATE_QUERY_GRAPH, TEMPLATE_UPDATE, TEMPLATE_GOAL
from ..pddl.model import Domain, Problem
from ..pddl.parser import parse_goal
from ..planner.validation import validate
from ..pipeline import PlanOutcome
from ..updater import UpdateOutcome
from .scoring import StateScore, PlanScore, score_state_change, score_plan
from .tasks import resync_delta

__all__ = [
    'DEMO_WORLD_PATH', 'DemoStep', 'DemoScenario', 'StepResult', 'ScenarioRun', 'SCENARIOS', 'load_demo_world',
    'demo_truth_book', 'run_scenario', 'STEP_UPDATE', 'STEP_TASK', 'STEP_REPLAN',
]
log = logging.getLogger(__name__)

DEMO_WORLD_PATH = DATA_DIR.joinpath('demo_world.yaml')
STEP_UPDATE, STEP_TASK, STEP_REPLAN = 'update', 'task', 'replan'


def load_demo_world(domain: Optional[Domain] = None, path: Union[str, Path, None] = None) -> WorldGraph:
    """Load the demo household from its YAML description"""
    domain = domain or load_domain(RunConfig())
    path = Path(path).expanduser() if path else DEMO_WORLD_PATH
    with path.open('r', encoding='utf-8') as f:
        data = yaml.safe_load(f)
    if not isinstance(data, dict) or 'entities' not in data:
        raise GraphFileError(f'Invalid world description: {path}')
    if (domain_name := data.get('domain')) != domain.name:
        raise ConformanceError('domain', domain_name, f'the loaded domain is {domain.name!r}')

    entities = []
    for type_name, names in data['entities'].items():
        for item in names:
            if isinstance(item, dict):
                (name, attrs), = item.items()
                entities.append(Entity.of(name, type_name, **(attrs or {})))
            else:
                entities.append(Entity(item, type_name))

    triplets = [Triplet.from_parts(s, p, 'true' if o is True else o) for s, p, o in data.get('triplets', ())]
    return WorldGraph(domain, entities, triplets)


# region Scenario Model


def _query_graph(*entities: Tuple[str, Sequence[str], str], relations=()) -> Dict[str, Any]:
    return {
        'entities': [{'name': name, 'attributes': list(attrs), 'type': kind} for name, attrs, kind in entities],
        'relations': [list(rel) for rel in relations],
    }


def _delta(remove=(), add=()) -> GraphDelta:
    return GraphDelta({Triplet.from_parts(*t) for t in remove}, {Triplet.from_parts(*t) for t in add})


@dataclass(frozen=True)
class DemoStep:
    kind: str                                   # update, task, or replan (an update followed by the last task)
    truth: TruthEntry

    @property
    def text(self) -> str:
        return self.truth.text


@dataclass(frozen=True)
class DemoScenario:
    name: str
    description: str
    steps: Tuple[DemoStep, ...]
    setup: GraphDelta = field(default_factory=GraphDelta)
    script: Tuple[Tuple[str, str], ...] = ()    # (template, completion) pairs replayed instead of the oracle
    retriever: str = 'search'

    def world(self, domain: Optional[Domain] = None) -> WorldGraph:
        world = load_demo_world(domain)
        return apply_delta(world, self.setup) if self.setup else world

    def truth_book(self) -> TruthBook:
        return TruthBook(step.truth for step in self.steps)

    def backend(self) -> LmBackend:
        return ScriptedBackend(self.script) if self.script else OracleBackend(self.truth_book())


# endregion

# region Scenarios


def _empty_dish_goal(context: FrozenSet[Triplet]) -> str:
    full = {t.subject for t in context if t.predicate == 'container_full'}
    dish = next((d for d in ('mug', 'bowl') if d not in full), 'mug')
    return f'(and (in_person_hand {dish} gary) (not (container_full {dish})))'


GARY_UPDATE = TruthEntry(
    "Gary went to Alexander's bedroom and placed the red pen on the table.",
    _delta(
        remove=[('red_pen', 'in_person_hand', 'gary'), ('gary', 'person_in_room', 'jessica_bedroom')],
        add=[
            ('gary', 'person_in_room', 'alexander_bedroom'), ('red_pen', 'placed_at_table', 'alexander_bedroom_table'),
        ],
    ),
    _query_graph(
        ('gary', (), 'person'), ('bedroom', ('alexander',), 'room'), ('pen', ('red',), 'pen'), ('table', (), 'table'),
        relations=[(0, 'in', 1), (2, 'on', 3), (3, 'in', 1)],
    ),
    ('gary', 'alexander_bedroom', 'red_pen', 'alexander_bedroom_table'),
)
GARY_NO_CHANGE = TruthEntry('Gary hummed a tune.', GraphDelta(), _query_graph(('gary', (), 'person')), ('gary',))
KATHLEEN_UPDATE = TruthEntry(
    "Kathleen placed the red pen on the 3rd level of the shelf in Jerry's bedroom.",
    _delta(
        remove=[('red_pen', 'in_person_hand', 'kathleen')],
        add=[('red_pen', 'placed_at_shelf', 'jerry_bedroom_shelf'), ('red_pen', 'on_shelf_level', 'shelf_level_3')],
    ),
    _query_graph(
        ('kathleen', (), 'person'), ('pen', ('red',), 'pen'), ('level', ('shelf', '3'), 'shelf_level'),
        ('shelf', ('jerry', 'bedroom'), 'shelf'), ('bedroom', ('jerry',), 'room'),
        relations=[(1, 'on', 3), (1, 'on', 2), (3, 'in', 4)],
    ),
    ('kathleen', 'red_pen', 'shelf_level_3', 'jerry_bedroom_shelf', 'jerry_bedroom'),
)
KATHLEEN_TASK = TruthEntry(
    "Place the red pen on the 5th level of the shelf in Alexander's bedroom.",
    None,
    _query_graph(
        ('pen', ('red',), 'pen'), ('level', ('shelf', '5'), 'shelf_level'),
        ('shelf', ('alexander', 'bedroom'), 'shelf'), ('bedroom', ('alexander',), 'room'),
        relations=[(0, 'on', 2), (0, 'on', 1), (2, 'in', 3)],
    ),
    ('red_pen', 'shelf_level_5', 'alexander_bedroom_shelf', 'alexander_bedroom'),
    '(and (placed_at_shelf red_pen alexander_bedroom_shelf) (on_shelf_level red_pen shelf_level_5))',
)
FAUCET_TASK = TruthEntry(
    'Turn off the faucet in the bathroom.',
    None,
    _query_graph(('faucet', ('bathroom',), 'sink'), ('bathroom', (), 'room'), relations=[(0, 'in', 1)]),
    ('bathroom_sink', 'bathroom'),
    '(not (faucet_on bathroom_sink))',
)
MUG_TASK = TruthEntry(
    'Bring Gary the mug or the bowl, whichever is empty.',
    None,
    _query_graph(('gary', (), 'person'), ('mug', (), 'dish'), ('bowl', (), 'dish')),
    ('gary', 'mug', 'bowl'),
    _empty_dish_goal,
)
MUG_UPDATE = TruthEntry(
    'The mug is not empty.',
    _delta(add=[('mug', 'container_full', 'true')]),
    _query_graph(('mug', (), 'dish')),
    ('mug',),
)
LAUNDRY_UPDATE = TruthEntry(
    'Someone turned off the light in the laundry room.',
    _delta(remove=[('laundry_room_light', 'light_on', 'true')]),
    _query_graph(('light', ('laundry', 'room'), 'light'), ('laundry room', (), 'room'), relations=[(0, 'in', 1)]),
    ('laundry_room_light', 'laundry_room'),
)
LAUNDRY_TASK = TruthEntry(
    'Turn on the light in the laundry room and turn off the faucet in the bathroom.',
    None,
    _query_graph(
        ('light', ('laundry', 'room'), 'light'), ('laundry room', (), 'room'), ('faucet', ('bathroom',), 'sink'),
        ('bathroom', (), 'room'),
        relations=[(0, 'in', 1), (2, 'in', 3)],
    ),
    ('laundry_room_light', 'laundry_room', 'bathroom_sink', 'bathroom'),
    '(and (light_on laundry_room_light) (not (faucet_on bathroom_sink)))',
)
# The recorded model removed the light's room instead of its on state; the delta is well-typed, so verification
# accepts it, and the light stays on in the agent's graph.
LAUNDRY_SCRIPT = (
    (TEMPLATE_QUERY_GRAPH, json.dumps(LAUNDRY_UPDATE.query_graph)),
    (TEMPLATE_UPDATE, render_update(ParsedUpdate((('laundry_room_light', 'in_room', 'laundry_room'),), ()))),
    (TEMPLATE_QUERY_GRAPH, json.dumps(LAUNDRY_TASK.query_graph)),
    (TEMPLATE_GOAL, f'(:goal {LAUNDRY_TASK.goal})'),
)

SCENARIOS: Dict[str, DemoScenario] = {
    s.name: s for s in (
        DemoScenario(
            'gary', 'Gary moves to a bedroom and leaves the red pen there', (
                DemoStep(STEP_UPDATE, GARY_UPDATE), DemoStep(STEP_UPDATE, GARY_NO_CHANGE),
            ),
        ),
        DemoScenario(
            'kathleen', 'Kathleen shelves the red pen; the robot moves it to another shelf', (
                DemoStep(STEP_UPDATE, KATHLEEN_UPDATE), DemoStep(STEP_TASK, KATHLEEN_TASK),
            ),
            setup=_delta(
                remove=[('red_pen', 'in_person_hand', 'gary')], add=[('red_pen', 'in_person_hand', 'kathleen')]
            ),
        ),
        DemoScenario('faucet', 'The robot turns off the bathroom faucet', (DemoStep(STEP_TASK, FAUCET_TASK),)),
        DemoScenario(
            'mug', 'The robot fetches an empty dish and switches to the bowl when told the mug is full', (
                DemoStep(STEP_TASK, MUG_TASK), DemoStep(STEP_REPLAN, MUG_UPDATE),
            ),
        ),
        DemoScenario(
            'laundry', 'A semantically wrong update leaves a plan that fails in the real world', (
                DemoStep(STEP_UPDATE, LAUNDRY_UPDATE), DemoStep(STEP_TASK, LAUNDRY_TASK),
            ),
            script=LAUNDRY_SCRIPT,
        ),
    )
}


def demo_truth_book() -> TruthBook:
    """Ground truth for every oracle-backed demo step; lets the CLI and REPL use the oracle backend on the demo world"""
    return TruthBook(step.truth for s in SCENARIOS.values() for step in s.steps)


# endregion

# region Running


@dataclass
class StepResult:
    step: DemoStep
    update: Optional[UpdateOutcome] = None
    plan: Optional[PlanOutcome] = None
    state_score: Optional[StateScore] = None
    plan_score: Optional[PlanScore] = None

    @property
    def success(self) -> bool:
        if self.plan_score is not None:
            return self.plan_score.success
        return bool(self.state_score)


@dataclass
class ScenarioRun:
    scenario: DemoScenario
    agent: Agent
    truth: WorldGraph                           # the true world state after the last step
    results: List[StepResult] = field(default_factory=list)

    def __repr__(self):
        ok = sum(r.success for r in self.results)
        return f'<{self.__class__.__name__}[{self.scenario.name}]({ok}/{len(self.results)} steps succeeded)>'

    @property
    def success(self) -> bool:
        return all(r.success for r in self.results)


def _truth_problem(truth: WorldGraph, goal: Union[str, TruthEntry]) -> Problem:
    if isinstance(goal, TruthEntry):
        goal = goal.goal if isinstance(goal.goal, str) else goal.goal(truth.triplets)
    objects = truth.objects()
    formula = parse_goal(goal, truth.domain, objects)
    return Problem('truth', truth.domain.name, objects, to_init_atoms(truth.triplets), formula)


class _ScenarioRunner:
    def __init__(self, scenario: DemoScenario, config: RunConfig, domain: Optional[Domain]):
        world = scenario.world(domain)
        agent = Agent.from_config(config.updated(retriever=scenario.retriever), graph=world, backend=scenario.backend())
        self.run = ScenarioRun(scenario, agent, world)
        self.last_task: Optional[TruthEntry] = None

    def step(self, step: DemoStep) -> StepResult:
        result = StepResult(step)
        if step.kind in (STEP_UPDATE, STEP_REPLAN):
            self._update(step, result)
        if step.kind == STEP_TASK:
            self._plan(step.truth, result)
        elif step.kind == STEP_REPLAN and self.last_task is not None:
            self._plan(self.last_task, result)
        return result

    def _update(self, step: DemoStep, result: StepResult):
        run = self.run
        result.update = run.agent.update(step.text)
        if step.truth.delta:
            run.truth = apply_delta(run.truth, step.truth.delta)
        result.state_score = score_state_change(run.agent.graph, run.truth)
        log.info(f'{step.text!r} -> {result.update} ({result.state_score})')

    def _plan(self, task: TruthEntry, result: StepResult):
        run = self.run
        self.last_task = task
        result.plan = outcome = run.agent.plan(task.text)
        problem = _truth_problem(run.truth, task)
        result.plan_score = score_plan(outcome.plan if outcome.success else None, problem, run.truth.domain)
        log.info(f'{task.text!r} -> {outcome} ({result.plan_score})')
        if not result.plan_score:
            return
        # The plan is executed in the real world, and the robot observes what it acted on
        final = validate(run.truth.domain, problem, outcome.plan).final_state
        run.truth = run.truth.with_triplets(from_init_atoms(final, run.truth.domain))
        touched = frozenset(arg for action in outcome.plan for arg in action.args)
        run.agent.perceive(resync_delta(run.agent.graph, run.truth, touched))


def run_scenario(
    scenario: Union[str, DemoScenario], config: Optional[RunConfig] = None, domain: Optional[Domain] = None
) -> ScenarioRun:
    """
    Run the given scenario and score each step against the ground truth.  Updates are scored by comparing the agent's
    graph with the true state; plans are validated against the true state and the true goal.  A plan that succeeds
    in the true world is executed there, and the robot perceives the entities it acted on.
    """
    if isinstance(scenario, str):
        try:
            scenario = SCENARIOS[scenario]
        except KeyError as e:
            raise ConfigError(f'Unknown scenario={scenario!r} - expected one of: {", ".join(SCENARIOS)}') from e

    runner = _ScenarioRunner(scenario, config or RunConfig(), domain)
    for step in scenario.steps:
        runner.run.results.append(runner.step(step))
    log.info(f'Finished {runner.run!r}')
    return runner.run


# endregion
