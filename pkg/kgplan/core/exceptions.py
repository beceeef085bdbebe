"""
Exceptions for kgplan

:author: Doug Skrypa
"""

from typing import TYPE_CHECKING, Optional, Any

if TYPE_CHECKING:
    from ..graph.world import Triplet

__all__ = [
    'KgPlanException', 'ConfigError',
    'PddlError', 'PddlSyntaxError', 'UnsupportedFeatureError', 'PddlSemanticError', 'PddlTypeError',
    'UnknownTypeError',
    'GraphError', 'DeltaError', 'UnknownEntityError', 'TripletConversionError', 'GraphFileError',
    'GraphVersionError', 'ChecksumError', 'ConformanceError', 'GraphLockedError',
    'SimilarityProviderError', 'RetrievalError', 'QueryGraphError',
    'LmError', 'BackendError', 'TokenBudgetExceeded', 'ScriptExhausted', 'UpdateParseError', 'GoalParseError',
    'UpdateFailed',
    'PlannerError', 'GroundingLimitExceeded', 'UnsolvableProblem', 'PlannerTimeout', 'ExternalPlannerError',
    'PipelineError', 'SimulationError', 'SpecCapExceeded',
]


class KgPlanException(Exception):
    """Base exception class for all exceptions in kgplan"""


class ConfigError(KgPlanException):
    pass


# region PDDL


class PddlError(KgPlanException):
    """Base class for PDDL problems; optionally located in a source file"""
    def __init__(self, message: str, line: Optional[int] = None, col: Optional[int] = None, path: str = None):
        super().__init__(message)
        self.message = message
        self.line = line
        self.col = col
        self.path = path

    def __str__(self):
        if self.line is None:
            return self.message
        return f'{self.path or "<string>"}:{self.line}:{self.col}: {self.message}'


class PddlSyntaxError(PddlError):
    pass


class UnsupportedFeatureError(PddlError):
    def __init__(self, feature: str, line: Optional[int] = None, col: Optional[int] = None, path: str = None):
        super().__init__(f'unsupported PDDL feature: {feature}', line, col, path)
        self.feature = feature


class PddlSemanticError(PddlError):
    pass


class PddlTypeError(PddlSemanticError):
    def __init__(self, atom: str, position: int, message: str, line=None, col=None, path=None):
        super().__init__(f'type mismatch in {atom} at argument {position}: {message}', line, col, path)
        self.atom = atom
        self.position = position


class UnknownTypeError(PddlSemanticError):
    def __init__(self, type_name: str, line=None, col=None, path=None):
        super().__init__(f'unknown type: {type_name}', line, col, path)
        self.type_name = type_name


# endregion

# region Graph


class GraphError(KgPlanException):
    pass


class DeltaError(GraphError):
    """Raised when a delta cannot be applied; names the violation code and the offending triplet"""
    def __init__(self, code: str, triplet: 'Triplet', message: str = ''):
        super().__init__(code, triplet, message)
        self.code = code
        self.triplet = triplet
        self.message = message

    def __str__(self):
        suffix = f': {self.message}' if self.message else ''
        return f'{self.code} {self.triplet}{suffix}'


class UnknownEntityError(GraphError):
    def __str__(self):
        return f'Unknown entity: {self.args[0]}'


class TripletConversionError(GraphError):
    pass


class GraphFileError(GraphError):
    pass


class GraphVersionError(GraphFileError):
    pass


class ChecksumError(GraphFileError):
    pass


class ConformanceError(GraphFileError):
    def __init__(self, kind: str, name: str, message: str = ''):
        super().__init__(kind, name, message)
        self.kind = kind
        self.name = name
        self.message = message

    def __str__(self):
        suffix = f' ({self.message})' if self.message else ''
        return f'Graph does not conform to the domain: unknown {self.kind} {self.name!r}{suffix}'


class GraphLockedError(GraphFileError):
    pass


# endregion

# region Retrieval


class SimilarityProviderError(KgPlanException):
    """The external embedding backend failed; callers may retry"""
    retryable = True


class RetrievalError(KgPlanException):
    pass


class QueryGraphError(RetrievalError):
    pass


# endregion

# region Language model


class LmError(KgPlanException):
    retryable = False


class BackendError(LmError):
    retryable = True


class TokenBudgetExceeded(LmError):
    def __init__(self, used: int, budget: int):
        super().__init__(used, budget)
        self.used = used
        self.budget = budget

    def __str__(self):
        return f'Token budget exceeded: {self.used:,d} tokens used, budget={self.budget:,d}'


class ScriptExhausted(LmError):
    pass


class UpdateParseError(LmError):
    def __init__(self, message: str, span: str = ''):
        super().__init__(message, span)
        self.message = message
        self.span = span

    def __str__(self):
        return f'{self.message} at {self.span!r}' if self.span else self.message


class GoalParseError(LmError):
    pass


class UpdateFailed(KgPlanException):
    def __init__(self, outcome: Any):
        super().__init__(outcome)
        self.outcome = outcome

    def __str__(self):
        last = self.outcome.reports[-1].messages() if self.outcome.reports else []
        suffix = f": {'; '.join(last)}" if last else ''
        return f'Update failed after {self.outcome.attempts} attempt(s){suffix}'


# endregion

# region Planning


class PlannerError(KgPlanException):
    pass


class GroundingLimitExceeded(PlannerError):
    def __init__(self, count: int, cap: int):
        super().__init__(count, cap)
        self.count = count
        self.cap = cap

    def __str__(self):
        return f'Grounding would instantiate {self.count:,d} actions, more than the cap of {self.cap:,d}'


class UnsolvableProblem(PlannerError):
    pass


class PlannerTimeout(PlannerError):
    pass


class ExternalPlannerError(PlannerError):
    pass


class PipelineError(KgPlanException):
    def __init__(self, stage: str, message: str):
        super().__init__(stage, message)
        self.stage = stage
        self.message = message

    def __str__(self):
        return f'[{self.stage}] {self.message}'


# endregion


class SimulationError(KgPlanException):
    pass


class SpecCapExceeded(SimulationError):
    pass
