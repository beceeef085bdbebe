"""
Command-line entry point: build worlds, apply updates, plan tasks, run the variant comparison, and drive an
interactive session.

Exit codes:

    ==  ============================================================
    0   success
    1   unexpected error
    2   configuration / argument error
    3   file not found
    4   language-model backend error (including an exhausted token budget)
    5   update failed (retry cap exhausted)
    6   planning failed (any pipeline stage)
    7   PDDL or graph file error (parse, version, checksum, conformance)
    8   graph file locked by another writer
    ==  ============================================================

:author: Doug Skrypa
"""

import logging
import sys
from argparse import ArgumentParser, Namespace
from contextlib import nullcontext
from fnmatch import fnmatch
from pathlib import Path
from traceback import format_exc
from typing import Optional, Sequence, Tuple

from .__version__ import __version__
from .agent import Agent, load_domain
from .config import RunConfig, BACKENDS, SIMILARITY_PROVIDERS
from .core.constants import (
    EXIT_OK, EXIT_UNEXPECTED, EXIT_CONFIG, EXIT_FILE_NOT_FOUND, EXIT_BACKEND, EXIT_UPDATE_FAILED, EXIT_PLAN_FAILED,
    EXIT_FILE_FORMAT, EXIT_LOCKED, RETRIEVERS,
)
from .core.exceptions import (
    KgPlanException, ConfigError, GraphLockedError, GraphError, PddlError, UpdateParseError, LmError, UpdateFailed,
    PipelineError, PlannerError, SimulationError,
)
from .core.utils import FileLock
from .graph.persistence import load as load_graph, save as save_graph
from .graph.world import WorldGraph
from .lm.backends import TruthBook
from .pipeline import init_diff
from .planner.plan_text import format_plan
from .shell.printer import Printer

__all__ = ['main', 'parser', 'exit_code_for']
log = logging.getLogger(__name__)

CONFIG_FLAGS = (
    'graph', 'domain', 'backend', 'transcript', 'retriever', 'similarity', 'verifier', 'cutoff', 'depth', 'seed',
    'token_budget', 'run_dir', 'planner_timeout', 'retry_cap', 'restrict_objects', 'external_planner',
)


# region Argument Parsing


def parser() -> ArgumentParser:
    common = ArgumentParser(add_help=False)
    group = common.add_argument_group('Configuration Options')
    group.add_argument('--config', '-c', metavar='PATH', help='YAML config file (default: in ~/.config/kgplan)')
    group.add_argument('--graph', '-g', metavar='PATH', help='World graph file')
    group.add_argument('--domain', '-D', metavar='PATH', help='PDDL domain file (default: household)')
    group.add_argument('--backend', '-b', choices=BACKENDS, help='Language model backend')
    group.add_argument('--transcript', metavar='PATH', help='Transcript for the scripted backend to replay')
    group.add_argument('--retriever', '-r', choices=RETRIEVERS, help='Context retrieval strategy')
    group.add_argument('--similarity', choices=SIMILARITY_PROVIDERS, help='Node similarity provider')
    group.add_argument('--no-verifier', dest='verifier', action='store_false', default=None, help='Skip update checks')
    group.add_argument('--cutoff', type=float, help='Candidate similarity cutoff, relative to the best candidate')
    group.add_argument('--depth', help='Neighborhood depth around matched entities (an integer or inf)')
    group.add_argument('--seed', '-s', type=int, help='Random seed')
    group.add_argument('--token-budget', type=int, help='Maximum prompt + completion tokens')
    group.add_argument('--run-dir', metavar='PATH', help='Directory for problems, plans, and scores')
    group.add_argument('--planner-timeout', type=float, help='Planner time limit in seconds')
    group.add_argument('--retry-cap', type=int, help='Maximum attempts per update or goal prompt')
    group.add_argument('--restrict-objects', action='store_true', default=None, help='Only context objects')
    group.add_argument('--external-planner', metavar='PATH', help='Solve with this planner executable instead')
    group.add_argument('--record', metavar='PATH', help='Write the model transcript to this file when done')
    group.add_argument('--verbose', '-v', action='count', default=0, help='Increase logging verbosity')

    parser = ArgumentParser(prog='kgplan', description='Knowledge-graph world memory and task planning')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    sub = parser.add_subparsers(dest='action', title='subcommands', required=True)

    init = sub.add_parser('init', parents=[common], help='Create a world graph file')
    init_src = init.add_mutually_exclusive_group()
    init_src.add_argument('--demo', action='store_true', help='Use the demo household instead of a generated world')
    init_src.add_argument('--large', action='store_true', help='Generate a larger world (250+ triplets)')
    init.add_argument('--force', '-f', action='store_true', help='Overwrite an existing graph file')

    update = sub.add_parser('update', parents=[common], help='Register a natural-language state change')
    update.add_argument('text', help='The change, e.g. "Gary placed the red pen on the table"')

    perceive = sub.add_parser('perceive', parents=[common], help='Apply a perceived change from a delta file')
    perceive.add_argument('delta', metavar='DELTA_FILE', help='JSON or REMOVE/ADD delta file')

    plan = sub.add_parser('plan', parents=[common], help='Plan a natural-language task')
    plan.add_argument('text', help='The task, e.g. "Turn off the faucet in the bathroom"')
    plan.add_argument('--diff-init', action='store_true', help='Show how the synthesized init differs from the graph')

    sim = sub.add_parser('simulate', parents=[common], help='Run the variant comparison over a generated simulation')
    sim.add_argument('--variants', '-V', default='all', help='Comma-separated variant names, or all')
    sim.add_argument('--events', type=int, help='Number of events to generate')
    sim.add_argument('--tasks', type=int, help='Number of tasks to generate')
    sim.add_argument('--large', action='store_true', help='Use a larger world (250+ triplets)')
    sim.add_argument('--format', '-f', dest='out_fmt', choices=Printer.formats, default='plain', help='Output format')

    demo = sub.add_parser('demo', parents=[common], help='Run the scripted demo-world scenarios')
    demo.add_argument('scenarios', nargs='*', help='Scenario names (default: all)')

    repl = sub.add_parser('repl', parents=[common], help='Interactive session; plain lines are updates, !help for more')
    repl.add_argument('--script', metavar='PATH', help='Run the lines in this file (- for stdin) instead of prompting')

    inspect = sub.add_parser('inspect', parents=[common], help='Show entities and triplets')
    inspect.add_argument('patterns', nargs='*', help='Entity name patterns, e.g. "*_pen" (default: everything)')
    inspect.add_argument(
        '--format', '-f', dest='out_fmt', choices=Printer.formats, default='yaml', help='The output format to use'
    )
    return parser


def load_config(args: Namespace) -> RunConfig:
    config = RunConfig.load(args.config)
    overrides = {key: getattr(args, key, None) for key in CONFIG_FLAGS}
    config = config.updated(**overrides)
    log.debug(f'Using {config=}')
    return config


# endregion


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = parser().parse_args(argv)
    if args.verbose:
        logging.basicConfig(level=logging.DEBUG, format='%(asctime)s %(levelname)s %(name)s %(lineno)d %(message)s')
    else:
        logging.basicConfig(level=logging.INFO, format='%(message)s')

    try:
        config = load_config(args)
        return ACTIONS[args.action](args, config)
    except KeyboardInterrupt:
        print('kgplan: interrupted', file=sys.stderr)
        return EXIT_UNEXPECTED
    except Exception as e:
        code, stage = exit_code_for(e)
        if code == EXIT_UNEXPECTED:
            log.error(format_exc())
        else:
            log.debug(format_exc())
        message = e.message if isinstance(e, PipelineError) else e
        print(f'kgplan: [{stage}] {message}', file=sys.stderr)
        return code


def exit_code_for(error: BaseException) -> Tuple[int, str]:
    """:return: Tuple of (exit code, stage tag) for the given error"""
    if isinstance(error, PipelineError):
        return EXIT_PLAN_FAILED, error.stage
    elif isinstance(error, ConfigError):
        return EXIT_CONFIG, 'config'
    elif isinstance(error, FileNotFoundError):
        return EXIT_FILE_NOT_FOUND, 'file'
    elif isinstance(error, GraphLockedError):
        return EXIT_LOCKED, 'lock'
    elif isinstance(error, (PddlError, GraphError, UpdateParseError)):
        return EXIT_FILE_FORMAT, 'format'
    elif isinstance(error, LmError):
        return EXIT_BACKEND, 'backend'
    elif isinstance(error, UpdateFailed):
        return EXIT_UPDATE_FAILED, 'update'
    elif isinstance(error, PlannerError):
        return EXIT_PLAN_FAILED, 'planner'
    elif isinstance(error, SimulationError):
        return EXIT_CONFIG, 'simulation'
    return EXIT_UNEXPECTED, 'error' if isinstance(error, KgPlanException) else 'unexpected'


# region Helpers


def _graph_path(config: RunConfig) -> Path:
    if not config.graph:
        raise ConfigError('A graph file is required (--graph or the graph config key)')
    return Path(config.graph)


def _truth_book(config: RunConfig) -> Optional[TruthBook]:
    if config.backend in ('oracle', 'faulty'):
        from .simulator.demo import demo_truth_book

        return demo_truth_book()
    return None


def _agent(config: RunConfig, graph: Optional[WorldGraph] = None) -> Agent:
    if graph is None:
        graph = load_graph(_graph_path(config), load_domain(config))
    return Agent.from_config(config, graph=graph, book=_truth_book(config))


def _lock(path: Path, mutating: bool = True):
    return FileLock(path) if mutating else nullcontext()


def _record(args: Namespace, agent: Agent):
    if args.record:
        agent.gateway.transcript.dump(args.record)
        log.info(f'Saved the model transcript to {args.record}')


# endregion

# region Actions


def init_graph(args: Namespace, config: RunConfig) -> int:
    path = _graph_path(config)
    if path.exists() and not args.force:
        raise ConfigError(f'{path} already exists (use --force to overwrite it)')

    domain = load_domain(config)
    if args.demo:
        from .simulator.demo import load_demo_world

        graph = load_demo_world(domain)
    else:
        from .simulator.world import WorldSpec, generate_world

        spec = WorldSpec.large(config.seed) if args.large else WorldSpec(seed=config.seed)
        graph = generate_world(spec, domain)

    with _lock(path):
        save_graph(graph, path)
    print(f'Saved {len(graph.entities)} entities and {len(graph.triplets)} triplets to {path}')
    return EXIT_OK


def update_graph(args: Namespace, config: RunConfig) -> int:
    path = _graph_path(config)
    with _lock(path):
        agent = _agent(config)
        try:
            outcome = agent.update(args.text, raise_on_failure=True)
        finally:
            _record(args, agent)
        if outcome.delta:
            agent.save(path)
        print(outcome.delta if outcome.delta else 'No change')
        log.info(f'Graph is at revision={agent.graph.revision} ({outcome.attempts} attempt(s))')
    return EXIT_OK


def perceive(args: Namespace, config: RunConfig) -> int:
    from .updater import read_perception_delta

    path = _graph_path(config)
    delta = read_perception_delta(args.delta)
    with _lock(path):
        agent = _agent(config)
        agent.perceive(delta)
        if delta:
            agent.save(path)
    print(delta)
    return EXIT_OK


def plan_task(args: Namespace, config: RunConfig) -> int:
    agent = _agent(config)
    try:
        outcome = agent.plan(args.text)
    finally:
        _record(args, agent)
    if args.diff_init and outcome.problem is not None:
        missing, extra = init_diff(outcome.problem, agent.graph)
        print(f'; init omits {len(missing)} graph atom(s)')
        for atom in sorted(missing, key=str):
            print(f';   - {atom}')
        if extra:
            print(f'; init has {len(extra)} atom(s) not in the graph: {", ".join(sorted(map(str, extra)))}')
    outcome.raise_for_failure()
    if steps := format_plan(outcome.plan.steps):
        print(steps)
    log.info(
        f'Found a {len(outcome.plan.steps)}-step plan in {outcome.planner_time:.3f}s'
        f' using {outcome.total_tokens:,d} tokens'
    )
    return EXIT_OK


def simulate(args: Namespace, config: RunConfig) -> int:
    from .simulator import WorldSpec, generate, run_ablation, parse_variants

    variants = parse_variants(args.variants)
    counts = {k: v for k, v in (('events', args.events), ('tasks', args.tasks)) if v is not None}
    spec = WorldSpec.large(config.seed, **counts) if args.large else WorldSpec(seed=config.seed, **counts)
    sim = generate(spec, load_domain(config))
    board = run_ablation(sim, config, variants)
    Printer(args.out_fmt).pprint(board.table() if args.out_fmt == 'plain' else board.to_dict())
    if board.files:
        log.info(f'Wrote {", ".join(map(str, board.files))}')
    if not board.complete:
        log.warning('At least one variant stopped early')
        return EXIT_BACKEND
    return EXIT_OK


def demo(args: Namespace, config: RunConfig) -> int:
    from .simulator.demo import SCENARIOS, run_scenario

    for name in args.scenarios or SCENARIOS:
        run = run_scenario(name, config)
        print(f'{name}: {run.scenario.description}')
        for result in run.results:
            status = 'ok' if result.success else 'FAILED'
            detail = result.plan_score or result.state_score
            print(f'  [{status}] {result.step.kind}: {result.step.text!r} ({detail})')
    return EXIT_OK


def repl(args: Namespace, config: RunConfig) -> int:
    from .shell import AgentShell

    path = Path(config.graph) if config.graph else None
    with _lock(path, path is not None):
        if path is None:
            from .simulator.demo import load_demo_world

            agent = _agent(config, load_demo_world(load_domain(config)))
        else:
            agent = _agent(config)
        shell = AgentShell(agent, path)
        try:
            if args.script:
                if args.script == '-':
                    failed = shell.run_lines(sys.stdin)
                else:
                    with open(args.script, 'r', encoding='utf-8') as f:
                        failed = shell.run_lines(f)
                if failed:
                    log.warning(f'{failed} line(s) failed')
            else:
                shell.cmdloop()
        finally:
            _record(args, agent)
    return EXIT_OK


def inspect(args: Namespace, config: RunConfig) -> int:
    graph = load_graph(_graph_path(config), load_domain(config))
    patterns = args.patterns or ['*']
    names = {name for name in graph.entities if any(fnmatch(name, p) for p in patterns)}
    content = {
        'revision': graph.revision,
        'entities': {name: graph.entities[name].type for name in sorted(names)},
        'triplets': [str(t) for t in sorted(graph.triplets) if names.intersection(t.endpoints)],
    }
    Printer(args.out_fmt).pprint(content)
    return EXIT_OK


ACTIONS = {
    'init': init_graph,
    'update': update_graph,
    'perceive': perceive,
    'plan': plan_task,
    'simulate': simulate,
    'demo': demo,
    'repl': repl,
    'inspect': inspect,
}

# endregion
