import json
import logging
import shlex
from abc import ABC, abstractmethod
from argparse import REMAINDER
from pathlib import Path
from sys import stdout as out, stderr as err
from typing import Dict, Optional, Type, Any, Sequence, MutableMapping, Mapping, Tuple, TextIO

from ...agent import Agent
from ...config import CONFIG_DIR
from ...core.exceptions import KgPlanException
from ...core.utils import atomic_write
from ..argparse import ShellArgParser
from ..exceptions import ArgError, ExitLoop, UnknownCommand, ExecutionError, AliasError

__all__ = ['ShellCommand', 'run_shell_command', 'resolve_aliases', 'COMMAND_PREFIX', 'ALIASES_PATH']
log = logging.getLogger(__name__)

COMMAND_PREFIX = '!'
ALIASES_PATH = CONFIG_DIR.joinpath('aliases.json')
MAX_ALIAS_DEPTH = 30


def run_shell_command(agent: Agent, input_str: str, env: MutableMapping[str, Any], stdout: TextIO = out) -> Any:
    """
    Lines that start with ``!`` are commands; any other line is registered as a natural-language update.  Lines that
    start with ``#`` are ignored.
    """
    if input_str.startswith('#'):
        return None
    elif input_str.startswith(COMMAND_PREFIX):
        name, raw_args = resolve_aliases(input_str[len(COMMAND_PREFIX):], env.get('aliases'))
        try:
            cmd_cls = ShellCommand._commands[name]
        except KeyError:
            raise UnknownCommand(name) from None
        # noinspection PyUnresolvedReferences
        kwargs = cmd_cls.parser.parse_kwargs(raw_args)
    else:
        name, cmd_cls, kwargs = 'update', ShellCommand._commands['update'], {'text': [input_str]}

    try:
        return cmd_cls(agent, env, stdout)(**kwargs)
    except KgPlanException as e:
        raise ExecutionError(name, e) from e


def resolve_aliases(input_str: str, aliases: Optional[Mapping[str, str]]) -> Tuple[str, Sequence[str]]:
    if not input_str.strip():
        raise ArgError('A command name is required (try !help)')
    try:
        name, *raw_args = shlex.split(input_str)
    except ValueError as e:  # Unbalanced quotes, e.g. "Alexander's bedroom"
        log.debug(f'Splitting on whitespace instead: {e}')
        name, *raw_args = input_str.split()

    if aliases:
        i = 0
        while alias := aliases.get(name):
            if i > MAX_ALIAS_DEPTH:
                raise AliasError(f'Possible infinite alias loop detected: {alias=!r} {name=!r}')
            name, *extra = shlex.split(alias)
            raw_args = extra + raw_args
            i += 1

    return name, raw_args


class ShellCommand(ABC):
    _commands: Dict[str, Type['ShellCommand']] = {}
    name: Optional[str] = None

    # noinspection PyMethodOverriding
    def __init_subclass__(cls, cmd: Optional[str] = None):
        if cmd:
            cls.name = cmd
            ShellCommand._commands[cmd] = cls

    def __init__(self, agent: Agent, env: MutableMapping[str, Any], stdout: TextIO = out, stderr: TextIO = err):
        self.agent = agent
        self.env = env
        self.stdout = stdout
        self.stderr = stderr

    @abstractmethod
    def __call__(self, **kwargs) -> Any:
        raise NotImplementedError

    @property
    @abstractmethod
    def parser(self) -> ShellArgParser:
        raise NotImplementedError

    def print(self, text: Any = None):
        if text is None:
            text = ''
        elif not isinstance(text, str):
            text = str(text)
        self.stdout.write(text + '\n')

    def error(self, text: Any):
        if not isinstance(text, str):
            text = str(text)
        self.stderr.write(text + '\n')

    def autosave(self):
        """Write the graph back to the session's graph file, if it has one"""
        if path := self.env.get('graph_path'):
            save_graph(self.agent, path)


def save_graph(agent: Agent, path: Path):
    """The session holds the graph file's lock; saves are atomic."""
    agent.save(path)
    log.debug(f'Saved revision={agent.graph.revision} to {path}')


class Exit(ShellCommand, cmd='exit'):
    parser = ShellArgParser('exit', description='Exit the shell')

    def __call__(self, **kwargs):
        raise ExitLoop


class Help(ShellCommand, cmd='help'):
    parser = ShellArgParser('help', description='Print help information')

    def __call__(self, **kwargs):
        self.print('Lines without a leading "!" are registered as updates.  Available commands:')
        for name, cls in sorted(self._commands.items()):
            self.print(f'  {COMMAND_PREFIX}{name}: {cls.parser.description}')


class Alias(ShellCommand, cmd='alias'):
    parser = ShellArgParser('alias', description='Store a command alias')
    parser.add_argument('alias', nargs='?', help='The text to use as an alias')
    mgroup = parser.add_mutually_exclusive_group()
    mgroup.add_argument('--remove', '-r', action='store_true', help='Remove the specified alias')
    mgroup.add_argument('--list', '-l', action='store_true', help='List existing aliases')
    parser.add_argument('command', nargs=REMAINDER, help='The command with which alias should be replaced')

    def __call__(self, alias: str, command: Sequence[str], remove: bool, list: bool):
        aliases = self.env.setdefault('aliases', {})
        if list:
            for alias, command in sorted(aliases.items()):
                self.print(f'{alias} => {command!r}')
        elif not alias:
            raise ArgError(f'{self.name}: An alias must be specified')
        elif remove:
            if aliases.pop(alias, None) is None:
                raise ArgError(f'{self.name}: {alias!r} does not exist')
            self.print(f'{self.name}: Removed {alias!r}')
            self._save(aliases)
        elif not command:
            raise ArgError(f'{self.name}: A command must be specified')
        else:
            aliases[alias] = command = ' '.join(command)
            self.print(f'{self.name}: {alias} => {command!r}')
            self._save(aliases)

    def _save(self, aliases: Mapping[str, str]):
        path = Path(self.env.get('aliases_path') or ALIASES_PATH)
        path.parent.mkdir(parents=True, exist_ok=True)
        with atomic_write(path) as f:
            json.dump(aliases, f, ensure_ascii=False, indent=4, sort_keys=True)
