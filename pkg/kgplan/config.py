"""
Run configuration, loaded from a YAML file and overridden by command line flags and environment variables.

:author: Doug Skrypa
"""

import logging
import os
from dataclasses import dataclass, field, fields, replace, asdict
from pathlib import Path
from typing import Optional, Mapping, Tuple, Any, Dict, Union

import yaml

from .core.constants import (
    DEFAULT_CUTOFF, DEFAULT_DEPTH, DEFAULT_EDGE_WEIGHT, DEFAULT_LABEL_BONUS, DEFAULT_RETRY_CAP, DEFAULT_ALWAYS_INCLUDE,
    DEFAULT_PLANNER_TIMEOUT, DEFAULT_EXPANSION_CAP, DEFAULT_GROUNDING_CAP, DEFAULT_PLATEAU_THRESHOLD, FAULTS,
    RETRIEVERS, INFINITE_DEPTH,
)
from .core.exceptions import ConfigError

__all__ = ['RunConfig', 'CONFIG_DIR', 'DEFAULT_CONFIG_PATH', 'DATA_DIR', 'DEFAULT_DOMAIN_PATH']
log = logging.getLogger(__name__)

CONFIG_DIR = Path('~/.config/kgplan').expanduser()
DEFAULT_CONFIG_PATH = CONFIG_DIR.joinpath('config.yaml')
DATA_DIR = Path(__file__).resolve().parent.joinpath('data')
DEFAULT_DOMAIN_PATH = DATA_DIR.joinpath('household.pddl')
BACKENDS = ('oracle', 'faulty', 'scripted', 'http')
SIMILARITY_PROVIDERS = ('lexical', 'embedding')
PATH_KEYS = ('domain', 'graph', 'transcript', 'run_dir')


@dataclass(frozen=True)
class RunConfig:
    domain: Optional[str] = None                # PDDL domain file; the shipped household domain when unset
    graph: Optional[str] = None                 # world graph file
    backend: str = 'oracle'
    transcript: Optional[str] = None            # transcript replayed by the scripted backend
    fault_rates: Mapping[str, float] = field(default_factory=dict)
    retry_fault_rates: Optional[Mapping[str, float]] = None
    fault_context_scale: float = 0.0
    retriever: str = 'search'
    similarity: str = 'lexical'
    verifier: bool = True
    cutoff: float = DEFAULT_CUTOFF
    depth: float = DEFAULT_DEPTH
    edge_weight: float = DEFAULT_EDGE_WEIGHT
    label_bonus: float = DEFAULT_LABEL_BONUS
    retry_cap: int = DEFAULT_RETRY_CAP
    seed: int = 0
    token_budget: Optional[int] = None
    run_dir: Optional[str] = None
    planner_timeout: float = DEFAULT_PLANNER_TIMEOUT
    expansion_cap: int = DEFAULT_EXPANSION_CAP
    grounding_cap: int = DEFAULT_GROUNDING_CAP
    plateau_threshold: int = DEFAULT_PLATEAU_THRESHOLD
    always_include: Tuple[str, ...] = DEFAULT_ALWAYS_INCLUDE
    restrict_objects: bool = False
    external_planner: Optional[str] = None
    diagnose_failures: bool = True

    def __post_init__(self):
        set_ = object.__setattr__
        if isinstance(self.depth, str):
            if self.depth.strip().isdigit():
                set_(self, 'depth', int(self.depth))
            elif self.depth.lower() in ('inf', 'infinite', 'infinity'):
                set_(self, 'depth', INFINITE_DEPTH)
            else:
                raise ConfigError(f'Invalid depth={self.depth!r} - expected an integer >= 1 or inf')
        set_(self, 'always_include', tuple(self.always_include))
        set_(self, 'fault_rates', dict(self.fault_rates or {}))
        if self.retry_fault_rates is not None:
            set_(self, 'retry_fault_rates', dict(self.retry_fault_rates))
        for key in PATH_KEYS:
            if value := getattr(self, key):
                set_(self, key, os.path.expanduser(str(value)))
        self.validate()

    def validate(self):
        if self.backend not in BACKENDS:
            raise ConfigError(f'Invalid backend={self.backend!r} - choose from: {", ".join(BACKENDS)}')
        if self.retriever not in RETRIEVERS:
            raise ConfigError(f'Invalid retriever={self.retriever!r} - choose from: {", ".join(RETRIEVERS)}')
        if self.similarity not in SIMILARITY_PROVIDERS:
            choices = ', '.join(SIMILARITY_PROVIDERS)
            raise ConfigError(f'Invalid similarity={self.similarity!r} - choose from: {choices}')
        if not 0 < self.cutoff <= 1:
            raise ConfigError(f'Invalid cutoff={self.cutoff} - must be in (0, 1]')
        if self.depth < 1:
            raise ConfigError(f'Invalid depth={self.depth} - must be >= 1')
        if self.retry_cap < 1:
            raise ConfigError(f'Invalid retry_cap={self.retry_cap} - must be >= 1')
        if self.token_budget is not None and self.token_budget < 1:
            raise ConfigError(f'Invalid token_budget={self.token_budget} - must be >= 1')
        for key in ('fault_rates', 'retry_fault_rates'):
            for name, rate in (getattr(self, key) or {}).items():
                if name not in FAULTS:
                    raise ConfigError(f'Invalid {key} entry {name!r} - choose from: {", ".join(FAULTS)}')
                if not 0 <= rate <= 1:
                    raise ConfigError(f'Invalid {key} entry {name}={rate} - must be in [0, 1]')
        if self.backend == 'scripted' and not self.transcript:
            raise ConfigError('The scripted backend requires a transcript')

    @property
    def domain_path(self) -> Path:
        return Path(self.domain) if self.domain else DEFAULT_DOMAIN_PATH

    @classmethod
    def keys(cls) -> Tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> 'RunConfig':
        if unknown := sorted(set(data).difference(cls.keys())):
            raise ConfigError(f'Unknown config key(s): {", ".join(unknown)}')
        try:
            return cls(**data)
        except TypeError as e:
            raise ConfigError(f'Invalid config: {e}') from e

    @classmethod
    def load(cls, path: Union[str, Path, None] = None) -> 'RunConfig':
        """
        Load the YAML config at the given path.  Without a path, the default config file is used if it exists;
        otherwise the defaults apply.
        """
        if path is None:
            if not DEFAULT_CONFIG_PATH.exists():
                return cls().with_env()
            path = DEFAULT_CONFIG_PATH
        path = Path(path).expanduser()
        try:
            data = yaml.safe_load(path.read_text('utf-8')) or {}
        except FileNotFoundError:
            raise
        except (OSError, yaml.YAMLError) as e:
            raise ConfigError(f'Unable to read config file {path}: {e}') from e
        if not isinstance(data, dict):
            raise ConfigError(f'Expected a mapping in config file {path}')
        log.debug(f'Loaded config from {path}')
        return cls.from_dict(data).with_env()

    def with_env(self) -> 'RunConfig':
        if backend := os.environ.get('KGPLAN_LM_BACKEND'):
            return self.updated(backend=backend)
        return self

    def updated(self, **overrides) -> 'RunConfig':
        """Return a copy with the given values replaced; ``None`` values (unset CLI flags) are ignored."""
        if unknown := sorted(set(overrides).difference(self.keys())):
            raise ConfigError(f'Unknown config key(s): {", ".join(unknown)}')
        changes = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **changes) if changes else self

    def as_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['always_include'] = list(self.always_include)
        if data['depth'] == INFINITE_DEPTH:
            data['depth'] = 'inf'
        return data
