"""
Utils

:author: Doug Skrypa
"""

import hashlib
import json
import logging
import os
import re
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Union, Iterator, IO

from .exceptions import GraphLockedError

__all__ = [
    'DictAttrProperty', 'DictAttrFieldNotFoundError', 'normalize_name', 'is_identifier', 'atomic_write',
    'FileLock', 'stable_hash', 'stable_seed',
]
log = logging.getLogger(__name__)
_NotSet = object()
IDENTIFIER_MATCH = re.compile(r'^[a-z][a-z0-9_]*$').match
_NAME_SUB = re.compile(r"[\s\-]+").sub


class DictAttrProperty:
    def __init__(self, attr: str, path: str, type=_NotSet, default=_NotSet):  # noqa
        """
        Cached, read-only view of a value nested in a dict (or list) held by another attribute of the same object.
        Nothing is read until the first access.  Path segments are separated by ``.``; segments made of digits index
        into lists, so ``choices.0.message.content`` reads the content of the first choice in a chat response.

        :param attr: Name of the attribute that holds the dict
        :param path: Location of the value within that dict
        :param type: Conversion applied to the value (default: none)
        :param default: Returned when the path does not exist (default: raise :class:`DictAttrFieldNotFoundError`)
        """
        self.path = [int(p) if p.isdigit() else p for p in path.split('.') if p]
        self.path_repr = '.'.join(map(str, self.path))
        self.attr = attr
        self.type = type
        self.default = default
        self.name = f'_{self.__class__.__name__}#{self.path_repr}'

    def __set_name__(self, owner, name):
        self.name = name
        self.__doc__ = f"This {owner.__name__}'s {self.attr}{''.join(f'[{p!r}]' for p in self.path)}"

    def __get__(self, obj, cls):
        if obj is None:
            return self

        value = getattr(obj, self.attr)
        for key in self.path:
            try:
                value = value[key]
            except (KeyError, IndexError, TypeError):
                if self.default is _NotSet:
                    raise DictAttrFieldNotFoundError(obj, self.name, self.attr, self.path_repr) from None
                value = self.default
                break

        if self.type is not _NotSet:
            value = self.type(value)
        obj.__dict__[self.name] = value
        return value


class DictAttrFieldNotFoundError(Exception):
    def __init__(self, obj, prop_name: str, attr: str, path_repr: str):
        super().__init__(obj, prop_name, attr, path_repr)
        self.obj = obj
        self.prop_name = prop_name
        self.attr = attr
        self.path_repr = path_repr

    def __str__(self):
        obj_type = type(self.obj).__name__
        return f'{obj_type!r} object has no attribute {self.prop_name!r} ({self.path_repr} not found in .{self.attr})'


def normalize_name(name: str) -> str:
    """Case-fold and map ``-`` / whitespace to ``_`` so KG entity names and PDDL names can be joined"""
    return _NAME_SUB('_', name.strip().lower())


def is_identifier(name: str) -> bool:
    return bool(IDENTIFIER_MATCH(name))


@contextmanager
def atomic_write(path: Union[str, Path], mode: str = 'w', encoding: str = 'utf-8') -> Iterator[IO]:
    """
    Write to a temp file next to ``path`` and rename it over ``path`` only after the body completes, so a killed
    process leaves either the old file or the new one, never a partial file.
    """
    path = Path(path)
    tmp_path = path.with_name(f'.{path.name}.{os.getpid()}.tmp')
    kwargs = {} if 'b' in mode else {'encoding': encoding, 'newline': '\n'}
    try:
        with tmp_path.open(mode, **kwargs) as f:
            yield f
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp_path, path)
    finally:
        if tmp_path.exists():
            tmp_path.unlink()


class FileLock:
    """Advisory, non-blocking exclusive lock on ``<path>.lock``; prevents concurrent writers of a graph file"""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path).with_name(Path(path).name + '.lock')
        self._f = None

    def acquire(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._f = self.path.open('a+')
        try:
            if sys.platform in ('win32', 'cygwin'):
                import msvcrt
                msvcrt.locking(self._f.fileno(), msvcrt.LK_NBLCK, 1)
            else:
                import fcntl
                fcntl.flock(self._f.fileno(), fcntl.LOCK_EX | fcntl.LOCK_NB)
        except OSError as e:
            self._f.close()
            self._f = None
            raise GraphLockedError(f'Graph file is locked by another writer: {self.path}') from e
        log.debug(f'Acquired lock {self.path}')

    def release(self):
        if self._f is None:
            return
        try:
            if sys.platform in ('win32', 'cygwin'):
                import msvcrt
                msvcrt.locking(self._f.fileno(), msvcrt.LK_UNLCK, 1)
            else:
                import fcntl
                fcntl.flock(self._f.fileno(), fcntl.LOCK_UN)
        finally:
            self._f.close()
            self._f = None

    def __enter__(self):
        self.acquire()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.release()


def stable_hash(obj) -> str:
    """sha256 of the canonical JSON encoding of ``obj``; identical across processes (unlike ``hash``)"""
    blob = json.dumps(obj, separators=(',', ':'), sort_keys=True, default=str)
    return hashlib.sha256(blob.encode('utf-8')).hexdigest()


def stable_seed(*parts) -> int:
    return int(stable_hash(parts)[:16], 16)
