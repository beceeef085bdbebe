"""
Deterministic PDDL rendering; the output of each function parses back to an equal value.

:author: Doug Skrypa
"""

from typing import Iterable, List, Mapping

from .model import Domain, Problem, ActionSchema

__all__ = ['print_domain', 'print_problem', 'print_objects']
INDENT = '    '


def print_objects(objects: Mapping[str, str]) -> List[str]:
    """Group consecutive objects of the same type onto one line, preserving declaration order"""
    lines, names, current = [], [], None
    for name, type_name in objects.items():
        if type_name != current and names:
            lines.append(f'{" ".join(names)} - {current}')
            names = []
        current = type_name
        names.append(name)
    if names:
        lines.append(f'{" ".join(names)} - {current}')
    return lines


def print_problem(problem: Problem) -> str:
    parts = [f'(define (problem {problem.name})', f'{INDENT}(:domain {problem.domain_name})']
    parts.append(_block(':objects', print_objects(problem.objects)))
    parts.append(_block(':init', map(str, sorted(problem.init))))
    parts.append(f'{INDENT}(:goal {problem.goal})')
    parts.append(')')
    return '\n'.join(parts) + '\n'


def print_domain(domain: Domain) -> str:
    parts = [f'(define (domain {domain.name})']
    if domain.requirements:
        parts.append(f'{INDENT}(:requirements {" ".join(domain.requirements)})')
    if domain.types:
        by_parent = {}
        for child, parent in domain.types.items():
            by_parent.setdefault(parent, []).append(child)
        type_lines = [f'{" ".join(children)} - {parent}' for parent, children in by_parent.items()]
        parts.append(_block(':types', type_lines))
    parts.append(_block(':predicates', map(str, domain.predicates.values())))
    parts.extend(_action(action) for action in domain.actions.values())
    parts.append(')')
    return '\n'.join(parts) + '\n'


def _block(keyword: str, lines: Iterable[str]) -> str:
    lines = list(lines)
    if not lines:
        return f'{INDENT}({keyword})'
    body = '\n'.join(f'{INDENT * 2}{line}' for line in lines)
    return f'{INDENT}({keyword}\n{body}\n{INDENT})'


def _action(action: ActionSchema) -> str:
    params = ' '.join(f'{var} - {type_name}' for var, type_name in action.params)
    pre = _and(map(str, action.preconditions))
    effects = _and([*map(str, action.add), *(f'(not {atom})' for atom in action.delete)])
    return (
        f'{INDENT}(:action {action.name}\n'
        f'{INDENT * 2}:parameters ({params})\n'
        f'{INDENT * 2}:precondition {pre}\n'
        f'{INDENT * 2}:effect {effects}\n'
        f'{INDENT})'
    )


def _and(parts: Iterable[str]) -> str:
    parts = list(parts)
    return f'(and {" ".join(parts)})' if parts else '(and)'
