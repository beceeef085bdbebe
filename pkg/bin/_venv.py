"""
Used by the scripts in this directory to re-run themselves with the project's virtualenv (``venv`` or ``.venv`` in the
project root) when one exists and no virtualenv is active.  Set ``KGPLAN_NO_VENV=1`` to skip this.

:author: Doug Skrypa
"""

from os import environ


def maybe_activate_venv():
    if environ.get('VIRTUAL_ENV') or environ.get('KGPLAN_NO_VENV'):
        return

    from pathlib import Path

    proj_root = Path(__file__).resolve().parents[1]
    if not (venv_path := next((p for p in map(proj_root.joinpath, ('venv', '.venv')) if p.is_dir()), None)):
        return

    import platform
    import sys
    from subprocess import call

    on_windows = platform.system().lower() == 'windows'
    bin_path = venv_path.joinpath('Scripts' if on_windows else 'bin')
    python = bin_path.joinpath('python.exe' if on_windows else 'python')
    if not python.exists():
        return

    environ.update(
        PYTHONHOME='',
        VIRTUAL_ENV=venv_path.as_posix(),
        PATH='{}{}{}'.format(bin_path.as_posix(), ';' if on_windows else ':', environ['PATH']),
    )
    sys.exit(call([python.as_posix()] + sys.argv, env=environ))


maybe_activate_venv()
