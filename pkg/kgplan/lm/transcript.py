"""
Append-only record of every language-model call, used for token accounting and for replay.

:author: Doug Skrypa
"""

import json
import logging
import re
from dataclasses import dataclass, asdict
from pathlib import Path
from threading import Lock
from typing import List, Optional, Union, Iterator, Tuple, Dict

from ..core.utils import atomic_write

__all__ = ['TranscriptEntry', 'LmTranscript', 'count_tokens']
log = logging.getLogger(__name__)

TOKEN_FINDALL = re.compile(r'\w+|[^\w\s]').findall


def count_tokens(text: str) -> int:
    """Approximate token count (words and punctuation marks); backends that report usage override it"""
    return len(TOKEN_FINDALL(text))


@dataclass(frozen=True)
class TranscriptEntry:
    template_id: str
    prompt: str
    completion: str
    input_tokens: int
    output_tokens: int
    attempt: int = 1
    label: Optional[str] = None

    def __post_init__(self):
        if self.input_tokens < 0 or self.output_tokens < 0:
            raise ValueError(f'Token counts must be non-negative: {self.input_tokens=}, {self.output_tokens=}')

    @property
    def total_tokens(self) -> int:
        return self.input_tokens + self.output_tokens


class LmTranscript:
    def __init__(self, backend_id: str = 'unknown', entries: Optional[List[TranscriptEntry]] = None):
        self.backend_id = backend_id
        self._entries: List[TranscriptEntry] = list(entries or ())
        self._lock = Lock()

    def __repr__(self):
        return f'<{self.__class__.__name__}[{self.backend_id}](entries={len(self)}, tokens={self.total_tokens:,d})>'

    def __len__(self):
        return len(self._entries)

    def __iter__(self) -> Iterator[TranscriptEntry]:
        return iter(tuple(self._entries))

    def __getitem__(self, item) -> TranscriptEntry:
        return self._entries[item]

    def append(self, entry: TranscriptEntry):
        with self._lock:
            self._entries.append(entry)

    @property
    def input_tokens(self) -> int:
        return sum(e.input_tokens for e in self._entries)

    @property
    def output_tokens(self) -> int:
        return sum(e.output_tokens for e in self._entries)

    @property
    def total_tokens(self) -> int:
        return self.input_tokens + self.output_tokens

    def tokens_since(self, index: int) -> Tuple[int, int]:
        """(input, output) token totals for entries appended at or after the given index"""
        entries = self._entries[index:]
        return sum(e.input_tokens for e in entries), sum(e.output_tokens for e in entries)

    def by_label(self) -> Dict[Optional[str], Tuple[int, int]]:
        totals = {}
        for entry in self._entries:
            inp, out = totals.get(entry.label, (0, 0))
            totals[entry.label] = (inp + entry.input_tokens, out + entry.output_tokens)
        return totals

    # region Serialization

    def dumps(self) -> str:
        lines = [json.dumps({'backend': self.backend_id, 'entries': len(self._entries)})]
        lines.extend(json.dumps(asdict(entry), ensure_ascii=False) for entry in self._entries)
        return '\n'.join(lines) + '\n'

    def dump(self, path: Union[str, Path]):
        path = Path(path).expanduser()
        path.parent.mkdir(parents=True, exist_ok=True)
        with atomic_write(path) as f:
            f.write(self.dumps())
        log.debug(f'Saved {self} to {path}')

    @classmethod
    def loads(cls, text: str) -> 'LmTranscript':
        lines = [line for line in text.splitlines() if line.strip()]
        if not lines:
            return cls()
        header = json.loads(lines[0])
        return cls(header.get('backend', 'unknown'), [TranscriptEntry(**json.loads(line)) for line in lines[1:]])

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'LmTranscript':
        return cls.loads(Path(path).expanduser().read_text('utf-8'))

    # endregion
