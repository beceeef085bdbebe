__all__ = ['run_shell_command', 'ShellCommand', 'COMMAND_PREFIX']

from .base import run_shell_command, ShellCommand, COMMAND_PREFIX
from . import agent
from . import graph
