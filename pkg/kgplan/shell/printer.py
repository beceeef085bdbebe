"""
Output formatting for the shell and the CLI.

:author: Doug Skrypa
"""

import json
import logging
import sys
from collections.abc import Mapping, KeysView, ValuesView
from dataclasses import is_dataclass, asdict
from typing import Any, Optional, TextIO

import yaml

__all__ = ['Printer', 'yaml_dump']
log = logging.getLogger(__name__)


class Printer:
    formats = ['plain', 'yaml', 'json', 'json-pretty']

    def __init__(self, output_format: Optional[str] = 'plain'):
        if output_format is None or output_format in Printer.formats:
            self.output_format = output_format or 'plain'
        else:
            raise ValueError(f'Invalid output format: {output_format} (valid options: {self.formats})')

    def pformat(self, content: Any) -> str:
        if self.output_format == 'json':
            return json.dumps(content, cls=PermissiveJSONEncoder, ensure_ascii=False)
        elif self.output_format == 'json-pretty':
            return json.dumps(content, sort_keys=True, indent=4, cls=PermissiveJSONEncoder, ensure_ascii=False)
        elif self.output_format == 'yaml':
            return yaml_dump(content)
        elif isinstance(content, str):
            return content
        elif isinstance(content, Mapping):
            return '\n'.join(f'{k}: {_plain(v)}' for k, v in content.items())
        elif isinstance(content, (list, tuple, set, frozenset)):
            return '\n'.join(map(_plain, content))
        return str(content)

    def pprint(self, content: Any, file: TextIO = None):
        print(self.pformat(content), file=file or sys.stdout)


def _plain(value: Any) -> str:
    if isinstance(value, (list, tuple, set, frozenset)):
        return ', '.join(map(str, value))
    elif isinstance(value, Mapping):
        return ', '.join(f'{k}={v}' for k, v in value.items())
    return str(value)


class PermissiveJSONEncoder(json.JSONEncoder):
    def default(self, o):
        if isinstance(o, (set, frozenset, KeysView)):
            return sorted(o, key=str)
        elif isinstance(o, ValuesView):
            return list(o)
        elif isinstance(o, Mapping):
            return dict(o)
        elif is_dataclass(o) and not isinstance(o, type):
            return asdict(o)
        elif hasattr(o, '__to_json__'):
            return o.__to_json__()
        return str(o)


def _prep_for_yaml(obj):
    if isinstance(obj, Mapping):
        return {_prep_for_yaml(k): _prep_for_yaml(v) for k, v in obj.items()}
    elif isinstance(obj, (list, tuple, set, frozenset)):
        values = sorted(obj, key=str) if isinstance(obj, (set, frozenset)) else obj
        return [_prep_for_yaml(v) for v in values]
    elif is_dataclass(obj) and not isinstance(obj, type):
        return _prep_for_yaml(asdict(obj))
    elif obj is None or isinstance(obj, (str, int, float, bool)):
        return obj
    return str(obj)


def yaml_dump(data, **kwargs) -> str:
    """Serialize the given data as a single YAML document"""
    kwargs.setdefault('explicit_start', True)
    kwargs.setdefault('width', float('inf'))
    kwargs.setdefault('allow_unicode', True)
    kwargs.setdefault('default_flow_style', False)
    kwargs.setdefault('sort_keys', False)
    formatted = yaml.safe_dump(_prep_for_yaml(data), **kwargs)
    if formatted.endswith('...\n'):
        formatted = formatted[:-4]
    return formatted.rstrip('\n')
