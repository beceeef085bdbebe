
__title__ = 'kgplan'
__description__ = 'Knowledge-graph world memory and PDDL task planning for language-driven service robots'
__url__ = 'https://github.com/dskrypa/kgplan'
__version__ = '2026.10.17'
__author__ = 'Doug Skrypa'
__author_email__ = 'dskrypa@gmail.com'
__copyright__ = 'Copyright 2026 Doug Skrypa'
