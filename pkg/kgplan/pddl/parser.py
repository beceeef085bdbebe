"""
Parser for the supported PDDL subset.

The text is first split into located tokens with pyparsing, then assembled into nested s-expressions so that every
error can point at a line and column in the original source.

:author: Doug Skrypa
"""

import logging
import re
from typing import List, Optional, Dict, Tuple, Union, Iterable, Mapping, Set

from pyparsing import Literal as Lit, Regex, lineno, col

from ..core.exceptions import (
    PddlSyntaxError, UnsupportedFeatureError, PddlSemanticError, PddlTypeError, UnknownTypeError, GoalParseError
)
from .model import ROOT_TYPE, Atom, Literal, Predicate, ActionSchema, GoalAnd, GoalForall, GoalFormula, Domain, Problem

__all__ = ['parse_domain', 'parse_problem', 'parse_goal', 'parse_sexp', 'Symbol', 'SList']
log = logging.getLogger(__name__)

NAME_MATCH = re.compile(r'^[a-z][a-z0-9_]*$').match
SUPPORTED_REQUIREMENTS = {':strips', ':typing', ':negative-preconditions'}
PROBLEM_REQUIREMENTS = SUPPORTED_REQUIREMENTS | {':universal-preconditions'}    # forall is allowed in goals only
UNSUPPORTED_SECTIONS = {
    ':constants', ':functions', ':durative-action', ':derived', ':constraints', ':metric', ':timed-initial-literals',
}
UNSUPPORTED_OPERATORS = {'or', 'imply', 'exists', '=', 'when', 'increase', 'decrease', 'assign', 'either'}
NOT_OPERANDS_REJECTED = {'and', 'forall', 'not', *UNSUPPORTED_OPERATORS}  # (not ...) takes a single atom

_TOKENIZER = (Lit('(') | Lit(')') | Regex(r';[^\n]*') | Regex(r'[^()\s;]+')).parse_with_tabs()


class Symbol(str):
    loc: int = 0

    def __new__(cls, value: str, loc: int = 0):
        self = super().__new__(cls, value)
        self.loc = loc
        return self


class SList(list):
    loc: int = 0


SExp = Union[Symbol, SList]


class _Source:
    """Keeps the original text so token offsets can be turned into line/column pairs"""

    def __init__(self, text: str, path: Optional[str] = None):
        self.text = text
        self.path = path

    def where(self, node: Union[SExp, int]) -> Dict[str, Union[int, str, None]]:
        loc = node if isinstance(node, int) else node.loc
        return {'line': lineno(loc, self.text), 'col': col(loc, self.text), 'path': self.path}

    def syntax_error(self, message: str, node) -> PddlSyntaxError:
        return PddlSyntaxError(message, **self.where(node))

    def semantic_error(self, message: str, node) -> PddlSemanticError:
        return PddlSemanticError(message, **self.where(node))

    def unsupported(self, feature: str, node) -> UnsupportedFeatureError:
        return UnsupportedFeatureError(feature, **self.where(node))


def parse_sexp(text: str, path: Optional[str] = None) -> List[SExp]:
    """Split the given text into a list of top-level s-expressions; comments are discarded."""
    src = _Source(text, path)
    stack: List[SList] = [SList()]
    for parsed, start, _end in _TOKENIZER.scan_string(text):
        token = parsed[0]
        if token.startswith(';'):
            continue
        elif token == '(':
            node = SList()
            node.loc = start
            stack[-1].append(node)
            stack.append(node)
        elif token == ')':
            if len(stack) == 1:
                raise src.syntax_error("unexpected ')'", start)
            stack.pop()
        else:
            stack[-1].append(Symbol(token, start))

    if len(stack) > 1:
        raise src.syntax_error("unbalanced '(' is never closed", stack[-1])
    return stack[0]


# region Helpers


def _name(src: _Source, node: SExp, kind: str = 'name') -> str:
    if not isinstance(node, Symbol):
        raise src.syntax_error(f'expected a {kind}, found a list', node)
    name = node.lower().replace('-', '_')
    if not NAME_MATCH(name):
        raise src.syntax_error(f'invalid {kind}: {node!r}', node)
    return name


def _variable(src: _Source, node: SExp) -> str:
    if not isinstance(node, Symbol) or not node.startswith('?'):
        raise src.syntax_error(f'expected a variable, found {node!r}', node)
    return '?' + _name(src, Symbol(node[1:], node.loc + 1), 'variable')


def _keyword(node: SExp) -> Optional[str]:
    if isinstance(node, SList) and node and isinstance(node[0], Symbol) and node[0].startswith(':'):
        return node[0].lower()
    return None


def _expect_list(src: _Source, node: SExp, what: str) -> SList:
    if not isinstance(node, SList):
        raise src.syntax_error(f'expected {what}, found {node!r}', node)
    return node


def _typed_list(src: _Source, items: Iterable[SExp], variables: bool) -> List[Tuple[str, str, SExp]]:
    """
    Parse ``a b - type c - other d`` style lists.  Names without an explicit type are of type ``object``.

    :return: List of (name, type, node) tuples
    """
    parsed, pending = [], []
    items = list(items)
    i = 0
    while i < len(items):
        node = items[i]
        if isinstance(node, Symbol) and node == '-':
            if not pending or i + 1 >= len(items):
                raise src.syntax_error("dangling '-' in typed list", node)
            type_node = items[i + 1]
            if isinstance(type_node, SList):
                if type_node and isinstance(type_node[0], Symbol) and type_node[0].lower() == 'either':
                    raise src.unsupported('either', type_node)
                raise src.syntax_error('expected a type name', type_node)
            type_name = _name(src, type_node, 'type name')
            parsed.extend((name, type_name, n) for name, n in pending)
            pending = []
            i += 2
            continue
        name = _variable(src, node) if variables else _name(src, node)
        pending.append((name, node))
        i += 1
    parsed.extend((name, ROOT_TYPE, n) for name, n in pending)
    return parsed


def _unique(src: _Source, entries: Iterable[Tuple[str, SExp]], kind: str):
    seen = set()
    for name, node in entries:
        if name in seen:
            raise src.semantic_error(f'repeated {kind}: {name}', node)
        seen.add(name)


# endregion

# region Domain


def parse_domain(text: str, path: Optional[str] = None) -> Domain:
    src = _Source(text, path)
    root = _define_block(src, parse_sexp(text, path), 'domain')
    name = _name(src, root[1][1], 'domain name')

    requirements: Tuple[str, ...] = ()
    types: Dict[str, str] = {}
    predicates: Dict[str, Predicate] = {}
    actions: Dict[str, ActionSchema] = {}
    raw_predicates = None
    raw_actions = []
    for section in root[2:]:
        key = _keyword(section)
        if key is None:
            raise src.syntax_error('expected a domain section', section)
        elif key in UNSUPPORTED_SECTIONS:
            raise src.unsupported(key, section)
        elif key == ':requirements':
            requirements = tuple(_requirements(src, section[1:]))
        elif key == ':types':
            types = _types(src, section[1:])
        elif key == ':predicates':
            raw_predicates = section
        elif key == ':action':
            raw_actions.append(section)
        else:
            raise src.unsupported(key, section)

    if raw_predicates is not None:
        predicates = _predicates(src, raw_predicates[1:], types)
    for section in raw_actions:
        action = _action(src, section, types, predicates)
        if action.name in actions:
            raise src.semantic_error(f'repeated action: {action.name}', section)
        actions[action.name] = action

    domain = Domain(name, types, predicates, actions, requirements)
    log.debug(f'Parsed domain {name} with {len(types)} types, {len(predicates)} predicates, {len(actions)} actions')
    return domain


def _define_block(src: _Source, exprs: List[SExp], kind: str) -> SList:
    if len(exprs) != 1 or not isinstance(exprs[0], SList):
        node = exprs[1] if len(exprs) > 1 else (exprs[0] if exprs else 0)
        raise src.syntax_error(f'expected exactly one (define ({kind} ...) ...) block', node)
    root = exprs[0]
    if not root or not isinstance(root[0], Symbol) or root[0].lower() != 'define':
        raise src.syntax_error('expected (define ...)', root)
    if len(root) < 2 or not isinstance(root[1], SList) or len(root[1]) != 2:
        raise src.syntax_error(f'expected ({kind} <name>)', root)
    if not isinstance(root[1][0], Symbol) or root[1][0].lower() != kind:
        raise src.syntax_error(f'expected ({kind} <name>)', root[1])
    return root


def _requirements(src: _Source, nodes: Iterable[SExp], supported: Set[str] = SUPPORTED_REQUIREMENTS) -> Iterable[str]:
    for node in nodes:
        if not isinstance(node, Symbol):
            raise src.syntax_error('expected a requirement flag', node)
        req = node.lower()
        if req not in supported:
            raise src.unsupported(req, node)
        yield req


def _types(src: _Source, nodes: Iterable[SExp]) -> Dict[str, str]:
    entries = _typed_list(src, nodes, False)
    _unique(src, ((name, node) for name, _, node in entries), 'type')
    types = {}
    for name, parent, node in entries:
        if name == ROOT_TYPE:
            raise src.semantic_error(f'{ROOT_TYPE!r} cannot be redeclared', node)
        types[name] = parent
    for parent in set(types.values()):
        if parent != ROOT_TYPE and parent not in types:
            # Parent types that are only ever mentioned as a parent hang directly off the root
            types[parent] = ROOT_TYPE

    for name in types:  # reject cycles
        seen = {name}
        current = types[name]
        while current != ROOT_TYPE:
            if current in seen:
                raise PddlSemanticError(f'type hierarchy contains a cycle through {name!r}', path=src.path)
            seen.add(current)
            current = types[current]
    return types


def _check_type(src: _Source, types: Mapping[str, str], type_name: str, node: SExp):
    if type_name != ROOT_TYPE and type_name not in types:
        raise UnknownTypeError(type_name, **src.where(node))


def _predicates(src: _Source, nodes: Iterable[SExp], types: Mapping[str, str]) -> Dict[str, Predicate]:
    predicates = {}
    for node in nodes:
        node = _expect_list(src, node, 'a predicate declaration')
        if not node:
            raise src.syntax_error('empty predicate declaration', node)
        name = _name(src, node[0], 'predicate name')
        if name in predicates:
            raise src.semantic_error(f'repeated predicate: {name}', node)
        params = _typed_list(src, node[1:], True)
        _unique(src, ((p, n) for p, _, n in params), 'parameter')
        for _, type_name, p_node in params:
            _check_type(src, types, type_name, p_node)
        predicates[name] = Predicate(name, tuple((p, t) for p, t, _ in params))
    return predicates


def _action(
    src: _Source, node: SList, types: Mapping[str, str], predicates: Mapping[str, Predicate]
) -> ActionSchema:
    if len(node) < 2:
        raise src.syntax_error('action is missing a name', node)
    name = _name(src, node[1], 'action name')
    fields: Dict[str, SExp] = {}
    i = 2
    while i < len(node):
        key_node = node[i]
        if not isinstance(key_node, Symbol) or not key_node.startswith(':'):
            raise src.syntax_error(f'expected an action field in {name}', key_node)
        key = key_node.lower()
        if key not in (':parameters', ':precondition', ':effect'):
            raise src.unsupported(key, key_node)
        if i + 1 >= len(node):
            raise src.syntax_error(f'{key} of {name} has no value', key_node)
        fields[key] = node[i + 1]
        i += 2

    params = []
    if (param_node := fields.get(':parameters')) is not None:
        param_node = _expect_list(src, param_node, 'a parameter list')
        params = _typed_list(src, param_node, True)
        _unique(src, ((p, n) for p, _, n in params), 'parameter')
        for _, type_name, p_node in params:
            _check_type(src, types, type_name, p_node)
    scope = {p: t for p, t, _ in params}

    preconditions = ()
    if (pre_node := fields.get(':precondition')) is not None:
        preconditions = tuple(_conjunction(src, pre_node, scope, predicates, types, allow_negative=True))
    add, delete = [], []
    if (eff_node := fields.get(':effect')) is not None:
        for literal in _conjunction(src, eff_node, scope, predicates, types, allow_negative=True, effect=True):
            (add if literal.positive else delete).append(literal.atom)

    return ActionSchema(name, tuple((p, t) for p, t, _ in params), preconditions, tuple(add), tuple(delete))


def _conjunction(
    src: _Source,
    node: SExp,
    scope: Mapping[str, str],
    predicates: Mapping[str, Predicate],
    types: Mapping[str, str],
    allow_negative: bool,
    effect: bool = False,
) -> Iterable[Literal]:
    node = _expect_list(src, node, 'a formula')
    if not node:
        return
    head = node[0]
    if isinstance(head, Symbol):
        op = head.lower()
        if op == 'and':
            for part in node[1:]:
                yield from _conjunction(src, part, scope, predicates, types, allow_negative, effect)
            return
        elif op == 'forall':
            raise src.unsupported('forall in effects' if effect else 'forall in preconditions', node)
        elif op in UNSUPPORTED_OPERATORS:
            raise src.unsupported(op, node)
    yield _literal(src, node, scope, predicates, types, allow_negative)


def _literal(
    src: _Source,
    node: SList,
    scope: Mapping[str, str],
    predicates: Mapping[str, Predicate],
    types: Mapping[str, str],
    allow_negative: bool,
) -> Literal:
    if isinstance(node[0], Symbol) and node[0].lower() == 'not':
        if not allow_negative:
            raise src.unsupported('negation', node)
        if len(node) != 2:
            raise src.syntax_error('(not ...) takes exactly one atom', node)
        inner = _expect_list(src, node[1], 'an atom')
        if inner and isinstance(inner[0], Symbol) and inner[0].lower() in NOT_OPERANDS_REJECTED:
            raise src.unsupported(f'not over {inner[0].lower()}', inner)
        return Literal(_atom(src, inner, scope, predicates, types), False)
    return Literal(_atom(src, node, scope, predicates, types))


def _atom(
    src: _Source, node: SList, scope: Mapping[str, str], predicates: Mapping[str, Predicate], types: Mapping[str, str]
) -> Atom:
    if not node:
        raise src.syntax_error('empty atom', node)
    name = _name(src, node[0], 'predicate name')
    try:
        predicate = predicates[name]
    except KeyError:
        raise src.semantic_error(f'unknown predicate: {name}', node) from None

    args = []
    for arg in node[1:]:
        if isinstance(arg, Symbol) and arg.startswith('?'):
            var = _variable(src, arg)
            if var not in scope:
                raise src.semantic_error(f'variable {var} is not declared', arg)
            args.append(var)
        else:
            raise src.semantic_error(f'constants are not supported in schemas: {arg}', arg)

    atom = Atom(name, tuple(args))
    if len(args) != predicate.arity:
        raise src.semantic_error(f'{atom} has {len(args)} argument(s); {name} takes {predicate.arity}', node)
    for pos, (arg, (_, expected)) in enumerate(zip(args, predicate.params), 1):
        if not _is_subtype(types, scope[arg], expected):
            raise PddlTypeError(str(atom), pos, f'{arg} is a {scope[arg]}, expected {expected}', **src.where(node))
    return atom


def _is_subtype(types: Mapping[str, str], type_name: str, parent: str) -> bool:
    if parent == ROOT_TYPE:
        return True
    while type_name != ROOT_TYPE:
        if type_name == parent:
            return True
        type_name = types.get(type_name, ROOT_TYPE)
    return False


# endregion

# region Problem


def parse_problem(text: str, domain: Domain, path: Optional[str] = None) -> Problem:
    src = _Source(text, path)
    root = _define_block(src, parse_sexp(text, path), 'problem')
    name = _name(src, root[1][1], 'problem name')

    domain_name = None
    objects: Dict[str, str] = {}
    init_nodes: List[SExp] = []
    goal_node = None
    for section in root[2:]:
        key = _keyword(section)
        if key is None:
            raise src.syntax_error('expected a problem section', section)
        elif key == ':domain':
            if len(section) != 2:
                raise src.syntax_error('expected (:domain <name>)', section)
            domain_name = _name(src, section[1], 'domain name')
        elif key == ':requirements':
            tuple(_requirements(src, section[1:], PROBLEM_REQUIREMENTS))
        elif key == ':objects':
            entries = _typed_list(src, section[1:], False)
            _unique(src, ((o, n) for o, _, n in entries), 'object')
            for obj, type_name, node in entries:
                _check_type(src, domain.types, type_name, node)
                objects[obj] = type_name
        elif key == ':init':
            init_nodes = section[1:]
        elif key == ':goal':
            if len(section) != 2:
                raise src.syntax_error('(:goal ...) takes exactly one formula', section)
            goal_node = section[1]
        elif key in UNSUPPORTED_SECTIONS:
            raise src.unsupported(key, section)
        else:
            raise src.unsupported(key, section)

    if domain_name is None:
        raise src.syntax_error('problem is missing (:domain <name>)', root)
    elif domain_name != domain.name:
        raise src.semantic_error(f'problem is for domain {domain_name!r}, not {domain.name!r}', root[1])

    init = frozenset(_ground_atom(src, _expect_list(src, n, 'an atom'), domain, objects) for n in init_nodes)
    goal = _goal(src, goal_node, domain, objects, {}) if goal_node is not None else GoalAnd()
    return Problem(name, domain_name, objects, init, goal)


def _ground_atom(src: _Source, node: SList, domain: Domain, objects: Mapping[str, str]) -> Atom:
    if node and isinstance(node[0], Symbol) and node[0].lower() in ('not', 'and', *UNSUPPORTED_OPERATORS):
        raise src.unsupported(f'{node[0].lower()} in :init', node)
    if not node:
        raise src.syntax_error('empty atom', node)
    name = _name(src, node[0], 'predicate name')
    if name not in domain.predicates:
        raise src.semantic_error(f'unknown predicate: {name}', node)
    args = tuple(_name(src, arg, 'object name') for arg in node[1:])
    atom = Atom(name, args)
    _type_check(src, atom, node, domain, objects)
    return atom


def _type_check(src: _Source, atom: Atom, node: SExp, domain: Domain, objects: Mapping[str, str]):
    predicate = domain.predicates[atom.predicate]
    if atom.arity != predicate.arity:
        raise src.semantic_error(f'{atom} has {atom.arity} argument(s); {predicate.name} takes {predicate.arity}', node)
    for pos, (arg, (_, expected)) in enumerate(zip(atom.args, predicate.params), 1):
        try:
            actual = objects[arg]
        except KeyError:
            raise src.semantic_error(f'unknown object {arg!r} in {atom}', node) from None
        if not domain.is_subtype(actual, expected):
            raise PddlTypeError(str(atom), pos, f'{arg} is a {actual}, expected {expected}', **src.where(node))


def _goal(src: _Source, node: SExp, domain: Domain, objects: Mapping[str, str], scope: Dict[str, str]) -> GoalFormula:
    node = _expect_list(src, node, 'a goal formula')
    if not node:
        return GoalAnd()
    head = node[0]
    op = head.lower() if isinstance(head, Symbol) else None
    if op == 'and':
        return GoalAnd(tuple(_goal(src, part, domain, objects, scope) for part in node[1:]))
    elif op == 'forall':
        if len(node) != 3:
            raise src.syntax_error('expected (forall (<vars>) <formula>)', node)
        var_node = _expect_list(src, node[1], 'a variable list')
        variables = _typed_list(src, var_node, True)
        _unique(src, ((v, n) for v, _, n in variables), 'variable')
        inner = dict(scope)
        for var, type_name, v_node in variables:
            _check_type(src, domain.types, type_name, v_node)
            inner[var] = type_name
        body = _goal(src, node[2], domain, objects, inner)
        return GoalForall(tuple((v, t) for v, t, _ in variables), body)
    elif op == 'not':
        if len(node) != 2:
            raise src.syntax_error('(not ...) takes exactly one atom', node)
        inner_node = _expect_list(src, node[1], 'an atom')
        if inner_node and isinstance(inner_node[0], Symbol):
            inner_op = inner_node[0].lower()
            if inner_op in ('and', 'forall', 'not'):
                raise src.unsupported(f'not over {inner_op}', inner_node)
            elif inner_op in UNSUPPORTED_OPERATORS:
                raise src.unsupported(inner_op, inner_node)
        return Literal(_goal_atom(src, inner_node, domain, objects, scope), False)
    elif op in UNSUPPORTED_OPERATORS:
        raise src.unsupported(op, node)
    return Literal(_goal_atom(src, node, domain, objects, scope))


def _goal_atom(src: _Source, node: SList, domain: Domain, objects: Mapping[str, str], scope: Mapping[str, str]) -> Atom:
    if not node:
        raise src.syntax_error('empty atom', node)
    name = _name(src, node[0], 'predicate name')
    if name not in domain.predicates:
        raise src.semantic_error(f'unknown predicate: {name}', node)
    args = []
    arg_types = {}
    for arg in node[1:]:
        if isinstance(arg, Symbol) and arg.startswith('?'):
            var = _variable(src, arg)
            if var not in scope:
                raise src.semantic_error(f'variable {var} is not bound by a forall', arg)
            args.append(var)
            arg_types[var] = scope[var]
        else:
            obj = _name(src, arg, 'object name')
            args.append(obj)
            try:
                arg_types[obj] = objects[obj]
            except KeyError:
                raise src.semantic_error(f'unknown object {obj!r} in goal', arg) from None

    atom = Atom(name, tuple(args))
    _type_check(src, atom, node, domain, arg_types)
    return atom


def parse_goal(text: str, domain: Domain, objects: Mapping[str, str]) -> GoalFormula:
    """
    Parse a standalone ``(:goal <formula>)`` block or a bare formula against the given objects.

    :raises: :class:`GoalParseError` wrapping the underlying PDDL error
    """
    try:
        src = _Source(text)
        exprs = parse_sexp(text)
        if len(exprs) != 1:
            raise src.syntax_error('expected exactly one goal formula', exprs[1] if len(exprs) > 1 else 0)
        node = exprs[0]
        if _keyword(node) == ':goal':
            if len(node) != 2:
                raise src.syntax_error('(:goal ...) takes exactly one formula', node)
            node = node[1]
        return _goal(src, node, domain, objects, {})
    except (PddlSyntaxError, PddlSemanticError, UnsupportedFeatureError) as e:
        raise GoalParseError(f'invalid goal: {e}') from e


# endregion
