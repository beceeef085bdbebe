"""
ANSI color handling for shell output, using 256-color codes.

:author: Doug Skrypa
"""

import re
from typing import Union, Iterable

__all__ = ['colored', 'strip_ansi']

ESC = '\x1b['
END = 'm'
COLOR_RESET = ESC + '0' + END
ANSI_SUB = re.compile(r'\x1b\[[0-9;]*m').sub
ANSI_ATTRS = {'bold': 1, 'dim': 2, 'underlined': 4, 'blink': 5, 'reverse': 7, 'hidden': 8, 'reset': 0}
ANSI_COLORS = {
    'black': 0, 'red': 1, 'green': 2, 'yellow': 3, 'blue': 4, 'magenta': 5, 'cyan': 6, 'light_gray': 7,
    'dark_gray': 8, 'light_red': 9, 'light_green': 10, 'light_yellow': 11, 'light_blue': 12, 'light_magenta': 13,
    'light_cyan': 14, 'white': 15,
}
Color = Union[str, int, None]


def colored(text, color: Color = None, bg_color: Color = None, attrs: Union[str, Iterable[str], None] = None) -> str:
    parts = (
        _color_code(color, '38;5;') if color is not None else '',
        _color_code(bg_color, '48;5;') if bg_color is not None else '',
        _attr_code(attrs) if attrs is not None else '',
        str(text),
        COLOR_RESET,
    )
    return ''.join(parts)


def _attr_code(attrs: Union[str, Iterable[str]]) -> str:
    if isinstance(attrs, (str, int)):
        attrs = (attrs,)
    try:
        return ''.join(f'{ESC}{a if isinstance(a, int) else ANSI_ATTRS[a]}{END}' for a in attrs)
    except KeyError as e:
        raise ValueError(f'Invalid ANSI attribute: {e}') from e


def _color_code(color: Color, base: str) -> str:
    if isinstance(color, str) and not color.isdigit():
        try:
            color = ANSI_COLORS[color]
        except KeyError as e:
            raise ValueError(f'Invalid color: {color}') from e
    if not 0 <= (code := int(color)) <= 255:
        raise ValueError(f'Invalid color: {color}')
    return f'{ESC}{base}{code}{END}'


def strip_ansi(text: str) -> str:
    """Remove color codes added by :func:`colored`"""
    return ANSI_SUB('', text)
