from ..core.exceptions import KgPlanException


class ExitLoop(StopIteration):
    pass


class ShellError(Exception):
    pass


class CommandError(ShellError):
    pass


class AliasError(ShellError):
    pass


class ArgError(CommandError):
    pass


class UnknownCommand(CommandError):
    def __str__(self):
        return f'Unknown command: {self.args[0]} (commands start with "!"; try !help)'


class ExecutionError(CommandError):
    def __init__(self, command: str, error: KgPlanException):
        super().__init__(command, error)
        self.command = command
        self.error = error

    def __str__(self):
        if stage := getattr(self.error, 'stage', None):
            return f'{self.command}: [{stage}] {getattr(self.error, "message", self.error)}'
        return f'{self.command}: error: {self.error}'
