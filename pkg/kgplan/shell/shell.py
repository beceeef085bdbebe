"""
An interactive session with the planning agent.  Plain lines are registered as state changes; lines that start with
``!`` are commands (``!plan <task>``, ``!inspect <entity>``, ``!help``, ...).

:author: Doug Skrypa
"""

import json
import logging
import sys
from datetime import datetime
from functools import cached_property
from itertools import count
from pathlib import Path
from shutil import get_terminal_size
from traceback import print_exc, format_exc
from typing import Optional, Dict, Any, Iterable, TextIO, Union

from ..agent import Agent
from ..config import CONFIG_DIR
from ..core.exceptions import KgPlanException
from .color import colored
from .commands import run_shell_command
from .commands.base import ALIASES_PATH
from .exceptions import ExitLoop, ShellError

__all__ = ['AgentShell']
log = logging.getLogger(__name__)
HISTORY_PATH = CONFIG_DIR.joinpath('shell.history')


class AgentShell:
    """
    :param agent: The agent to drive
    :param graph_path: When set, the graph is written back to this file after every change
    :param stdout: Where command output goes
    """

    def __init__(self, agent: Agent, graph_path: Union[str, Path, None] = None, stdout: TextIO = None):
        self.agent = agent
        self.graph_path = Path(graph_path).expanduser() if graph_path else None
        self.stdout = stdout or sys.stdout
        name = self.graph_path.stem if self.graph_path else agent.domain.name
        self._ps1 = '{} {}[{}] {}{} '.format(
            colored('{}', 11), colored(name, 13), colored('r{}', 14), colored('{}', 10), colored('>', 11)
        )

    @cached_property
    def env(self) -> Dict[str, Any]:
        env = {'graph_path': self.graph_path, 'aliases_path': ALIASES_PATH}
        if ALIASES_PATH.exists():
            try:
                with ALIASES_PATH.open('r', encoding='utf-8') as f:
                    env['aliases'] = json.load(f)
            except (OSError, ValueError) as e:
                log.warning(f'Ignoring aliases in {ALIASES_PATH}: {e}')
        return env

    def cmdloop(self, intro: Optional[str] = None):
        from prompt_toolkit import PromptSession
        from prompt_toolkit.history import FileHistory
        from .completion import EntityCompleter

        HISTORY_PATH.parent.mkdir(parents=True, exist_ok=True)
        session = PromptSession(history=FileHistory(HISTORY_PATH.as_posix()))
        completer = EntityCompleter()
        num = count(len(session.history.get_strings()))
        print(colored('=' * (get_terminal_size().columns - 1), 6))
        print(intro or f'Interactive planning session - {self.agent!r}\nType !help for commands')
        while True:
            try:
                self._handle_input(session, completer, next(num))
            except KeyboardInterrupt:
                pass
            except (EOFError, ExitLoop):
                break

    def _handle_input(self, session, completer, num: int):
        from prompt_toolkit import ANSI

        prompt = self._ps1.format(datetime.now().strftime('[%H:%M:%S]'), self.agent.graph.revision, num)
        # noinspection PyTypeChecker
        if input_line := session.prompt(ANSI(prompt), completer=completer(self.agent.graph)).strip():
            self.handle_line(input_line)

    def handle_line(self, line: str) -> bool:
        """
        Run one line of input.  Errors are reported on stderr instead of being raised, except for :class:`ExitLoop`.

        :return: True if the line ran without an error
        """
        try:
            run_shell_command(self.agent, line, self.env, self.stdout)
        except ExitLoop:
            raise
        except (ShellError, KgPlanException) as e:
            log.debug(format_exc())
            print(e, file=sys.stderr)
        except Exception as e:
            print_exc()
            print(colored(f'Unexpected error: {e}', 9), file=sys.stderr)
        else:
            return True
        return False

    def run_lines(self, lines: Iterable[str]) -> int:
        """
        Run scripted input, e.g. piped from a file.  Stops at ``!exit``.

        :return: The number of lines that failed
        """
        failed = 0
        for line in lines:
            if not (line := line.strip()):
                continue
            try:
                failed += not self.handle_line(line)
            except ExitLoop:
                break
        return failed
