"""
Hook for running an external planner executable instead of the embedded search.

The command is given as a list (or a shell-style string) with ``{domain}``, ``{problem}`` and ``{plan}`` placeholders
that are replaced by paths in a temporary directory.  The plan is read from the ``{plan}`` file when the planner
writes one, otherwise from its stdout, in the numbered-step plan text format.

:author: Doug Skrypa
"""

import logging
import shlex
import subprocess
import time
from pathlib import Path
from tempfile import TemporaryDirectory
from typing import Sequence, Union

from ..core.constants import DEFAULT_PLANNER_TIMEOUT
from ..core.exceptions import ExternalPlannerError, PlannerTimeout
from ..pddl.model import Domain, Problem
from ..pddl.printer import print_domain, print_problem
from .grounding import instantiate
from .plan_text import parse_plan
from .search import Plan, SearchStats
from .validation import validate

__all__ = ['ExternalPlanner']
log = logging.getLogger(__name__)


class ExternalPlanner:
    def __init__(self, command: Union[str, Sequence[str]], timeout: float = DEFAULT_PLANNER_TIMEOUT):
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        if not self.command:
            raise ExternalPlannerError('An external planner command is required')
        self.timeout = timeout

    def __repr__(self):
        return f'<{self.__class__.__name__}({shlex.join(self.command)!r})>'

    def solve(self, domain: Domain, problem: Problem) -> Plan:
        with TemporaryDirectory(prefix='kgplan-') as tmp_dir:
            tmp_dir = Path(tmp_dir)
            paths = {'domain': tmp_dir.joinpath('domain.pddl'), 'problem': tmp_dir.joinpath('problem.pddl')}
            paths['plan'] = tmp_dir.joinpath('plan.txt')
            paths['domain'].write_text(print_domain(domain), 'utf-8')
            paths['problem'].write_text(print_problem(problem), 'utf-8')
            args = [part.format(**{k: str(v) for k, v in paths.items()}) for part in self.command]

            log.debug(f'Running external planner: {shlex.join(args)}')
            start = time.monotonic()
            try:
                proc = subprocess.run(args, capture_output=True, text=True, timeout=self.timeout, cwd=tmp_dir)
            except subprocess.TimeoutExpired as e:
                raise PlannerTimeout(f'External planner did not finish within {self.timeout}s') from e
            except OSError as e:
                raise ExternalPlannerError(f'Unable to run external planner {args[0]!r}: {e}') from e
            elapsed = time.monotonic() - start

            text = paths['plan'].read_text('utf-8') if paths['plan'].exists() else proc.stdout
            if proc.returncode != 0 and not paths['plan'].exists():
                stderr = proc.stderr.strip().splitlines()[-5:]
                raise ExternalPlannerError(
                    f'External planner exited with code={proc.returncode}: ' + ' / '.join(stderr)
                )

        steps = parse_plan(text)
        if not (result := validate(domain, problem, steps)):
            raise ExternalPlannerError(f'External planner returned an invalid plan: {result}')
        ground_steps = tuple(instantiate(domain.actions[name], args) for name, args in steps)
        return Plan(ground_steps, SearchStats(search_time=elapsed))
