"""
Shell commands that drive the agent: updates, perception, and planning.

:author: Doug Skrypa
"""

import logging
from argparse import REMAINDER
from typing import Sequence

from ...core.exceptions import KgPlanException
from ...pipeline import PlanOutcome
from ...planner.plan_text import format_plan
from ...updater import UpdateOutcome, read_perception_delta
from ..argparse import ShellArgParser
from ..color import colored
from ..exceptions import ArgError
from ..printer import Printer
from .base import ShellCommand

__all__ = []
log = logging.getLogger(__name__)


def _text(words: Sequence[str], cmd: str) -> str:
    if not (text := ' '.join(words).strip()):
        raise ArgError(f'{cmd}: some text is required')
    return text


class _AgentCommand(ShellCommand):
    def show_update(self, outcome: UpdateOutcome):
        retries = f', {outcome.retries} retries' if outcome.retries else ''
        if not outcome.delta:
            self.print(colored(f'No change (revision {self.agent.graph.revision}){retries}', 11))
            return
        for triplet in sorted(outcome.delta.removals):
            self.print(colored(f'- {triplet}', 9))
        for triplet in sorted(outcome.delta.additions):
            self.print(colored(f'+ {triplet}', 10))
        self.print(f'revision {self.agent.graph.revision} ({outcome.total_tokens:,d} tokens{retries})')

    def show_plan(self, outcome: PlanOutcome):
        outcome.raise_for_failure()
        steps = format_plan(outcome.plan.steps)
        self.print(steps or colored('The goal is already satisfied', 11))
        self.print(
            f'{len(outcome.plan.steps)} step(s), {outcome.plan.stats.ground_actions:,d} ground actions,'
            f' {outcome.planner_time:.3f}s, {outcome.total_tokens:,d} tokens'
        )


class Update(_AgentCommand, cmd='update'):
    parser = ShellArgParser('update', description='Register a natural-language state change')
    parser.add_argument('text', nargs=REMAINDER, help='The change, e.g. "Gary put the pen on the table"')

    def __call__(self, text: Sequence[str]):
        outcome = self.agent.update(_text(text, self.name), raise_on_failure=True)
        self.show_update(outcome)
        self.autosave()
        return outcome


class Perceive(_AgentCommand, cmd='perceive'):
    parser = ShellArgParser('perceive', description='Apply a perceived change read from a delta file')
    parser.add_argument('path', help='JSON ({"remove": [...], "add": [...]}) or REMOVE/ADD delta file')

    def __call__(self, path: str):
        delta = read_perception_delta(path)
        before = self.agent.graph.revision
        graph = self.agent.perceive(delta)
        self.print(f'revision {before} -> {graph.revision}: -{len(delta.removals)} +{len(delta.additions)}')
        self.autosave()


class Plan(_AgentCommand, cmd='plan'):
    parser = ShellArgParser('plan', description='Plan a natural-language task')
    parser.add_argument('text', nargs=REMAINDER, help='The task, e.g. "Turn off the faucet in the bathroom"')

    def __call__(self, text: Sequence[str]):
        outcome = self.agent.plan(_text(text, self.name))
        self.show_plan(outcome)
        return outcome


class Replan(_AgentCommand, cmd='replan'):
    parser = ShellArgParser('replan', description='Register a change, then plan the most recent task again')
    parser.add_argument('text', nargs=REMAINDER, help='The change that invalidates the previous plan')

    def __call__(self, text: Sequence[str]):
        outcome = self.agent.replan_on_update(_text(text, self.name))
        self.autosave()
        self.show_plan(outcome)
        return outcome


class History(ShellCommand, cmd='history'):
    parser = ShellArgParser('history', description='Show the graph revision history or the plan history')
    parser.add_argument('--plans', '-p', action='store_true', help='Show plan outcomes instead of graph deltas')
    parser.add_format_arg()

    def __call__(self, plans: bool = False, out_fmt: str = 'plain'):
        if plans:
            rows = [
                {
                    'task': o.text,
                    'success': o.success,
                    'stage': o.stage,
                    'revision': o.revision,
                    'steps': len(o.plan.steps) if o.plan else 0,
                    'tokens': o.total_tokens,
                }
                for o in self.agent.pipeline.history
            ]
        else:
            rows = [
                {'revision': d.revision, 'source': d.source, 'remove': sorted(map(str, d.removals)),
                 'add': sorted(map(str, d.additions))}
                for d in self.agent.store.history
            ]
        if out_fmt == 'plain':
            for row in rows:
                self.print(' '.join(f'{k}={v}' for k, v in row.items()))
        else:
            Printer(out_fmt).pprint(rows, file=self.stdout)


class Tokens(ShellCommand, cmd='tokens'):
    parser = ShellArgParser('tokens', description='Show token usage per transcript label')
    parser.add_argument('--save', '-s', metavar='PATH', help='Also write the transcript to this JSON lines file')
    parser.add_format_arg()

    def __call__(self, save: str = None, out_fmt: str = 'plain'):
        transcript = self.agent.gateway.transcript
        usage = {
            str(label): {'input': inp, 'output': out} for label, (inp, out) in transcript.by_label().items()
        }
        usage['total'] = {'input': transcript.input_tokens, 'output': transcript.output_tokens}
        if out_fmt == 'plain':
            for label, counts in usage.items():
                self.print(f'{label}: {counts["input"]:,d} in / {counts["output"]:,d} out')
        else:
            Printer(out_fmt).pprint(usage, file=self.stdout)
        if save:
            try:
                transcript.dump(save)
            except OSError as e:
                raise KgPlanException(f'Unable to write {save}: {e}') from e
            self.print(f'Saved {len(transcript)} transcript entries to {save}')
