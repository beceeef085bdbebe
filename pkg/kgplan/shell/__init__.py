__all__ = ['AgentShell']

from .shell import AgentShell
