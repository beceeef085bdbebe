import random
from typing import Dict, List, Mapping

import pytest

from kgplan.core.exceptions import (
    PddlSyntaxError, PddlSemanticError, PddlTypeError, UnsupportedFeatureError, UnknownTypeError, GoalParseError
)
from kgplan.pddl.goals import ground_goal, goal_holds, goal_objects
from kgplan.pddl.model import (
    Atom, Literal, GoalAnd, GoalForall, GoalFormula, ROOT_TYPE, Domain, Predicate, ActionSchema, Problem
)
from kgplan.pddl.parser import parse_domain, parse_problem, parse_goal, parse_sexp
from kgplan.pddl.printer import print_domain, print_problem

MINI_DOMAIN = """
; comments are ignored
(define (domain mini)
    (:requirements :strips :typing :negative-preconditions)
    (:types room robot - object sink - appliance)
    (:predicates (at ?r - robot ?x - room) (faucet_on ?s - sink) (in_room ?s - appliance ?x - room))
    (:action turn_off
        :parameters (?s - sink ?x - room ?r - robot)
        :precondition (and (in_room ?s ?x) (at ?r ?x) (faucet_on ?s))
        :effect (and (not (faucet_on ?s)))
    )
)
"""

PROBLEM = """
(define (problem p1)
    (:domain household)
    (:objects kitchen bathroom - room robot - robot bathroom_sink - sink)
    (:init (robot_in_room robot kitchen) (in_room bathroom_sink bathroom) (faucet_on bathroom_sink))
    (:goal (and (not (faucet_on bathroom_sink))))
)
"""


# region Domain parsing


def test_parse_mini_domain():
    domain = parse_domain(MINI_DOMAIN)
    assert domain.name == 'mini'
    assert domain.types == {'room': ROOT_TYPE, 'robot': ROOT_TYPE, 'sink': 'appliance', 'appliance': ROOT_TYPE}
    assert set(domain.predicates) == {'at', 'faucet_on', 'in_room'}
    action = domain.actions['turn_off']
    assert action.variables == ('?s', '?x', '?r')
    assert action.delete == (Atom('faucet_on', ('?s',)),)
    assert action.add == ()
    assert len(action.preconditions) == 3


def test_household_domain_hierarchy(household_domain):
    assert household_domain.is_subtype('robot', 'agent')
    assert household_domain.is_subtype('sink', 'fixture')
    assert not household_domain.is_subtype('pen', 'fixture')
    assert list(household_domain.ancestors('table')) == ['table', 'furniture', 'fixture', ROOT_TYPE]
    assert household_domain.subtypes('appliance') == {'appliance', 'sink', 'light', 'tv'}
    with pytest.raises(UnknownTypeError):
        household_domain.subtypes('spaceship')


def test_household_graph_predicates(household_domain):
    assert set(household_domain.graph_predicates) == set(household_domain.predicates)
    assert household_domain.predicate('faucet_on').arity == 1
    with pytest.raises(PddlSemanticError):
        household_domain.predicate('flying')


def test_domain_print_parse_fixed_point(household_domain):
    printed = print_domain(household_domain)
    reparsed = parse_domain(printed)
    assert reparsed == household_domain
    assert print_domain(reparsed) == printed


@pytest.mark.parametrize('section', [':functions', ':constants', ':derived'])
def test_unsupported_sections(section):
    text = MINI_DOMAIN.replace('(:requirements', f'({section} (foo)) (:requirements', 1)
    with pytest.raises(UnsupportedFeatureError) as exc_info:
        parse_domain(text)
    assert exc_info.value.feature == section
    assert str(exc_info.value).endswith(f'unsupported PDDL feature: {section}')


def test_unsupported_requirement():
    with pytest.raises(UnsupportedFeatureError) as exc_info:
        parse_domain(MINI_DOMAIN.replace(':negative-preconditions', ':fluents'))
    assert exc_info.value.feature == ':fluents'


def test_universal_preconditions_only_in_problems(household_domain):
    with pytest.raises(UnsupportedFeatureError) as exc_info:
        parse_domain(MINI_DOMAIN.replace(':negative-preconditions', ':universal-preconditions'))
    assert exc_info.value.feature == ':universal-preconditions'
    text = PROBLEM.replace(
        '(:domain household)', '(:domain household) (:requirements :strips :universal-preconditions)'
    ).replace('(:goal (and (not (faucet_on bathroom_sink))))', '(:goal (forall (?s - sink) (not (faucet_on ?s))))')
    problem = parse_problem(text, household_domain)
    assert isinstance(problem.goal, GoalForall)


def test_disjunctive_precondition_unsupported():
    text = MINI_DOMAIN.replace('(and (in_room ?s ?x)', '(or (in_room ?s ?x)')
    with pytest.raises(UnsupportedFeatureError) as exc_info:
        parse_domain(text)
    assert exc_info.value.feature == 'or'


def test_unbalanced_parens_located():
    text = MINI_DOMAIN.rstrip()[:-1]
    with pytest.raises(PddlSyntaxError) as exc_info:
        parse_domain(text, 'mini.pddl')
    assert exc_info.value.line == 3
    assert str(exc_info.value).startswith('mini.pddl:3:')


def test_unexpected_close_paren():
    with pytest.raises(PddlSyntaxError):
        parse_sexp('(a b))')


def test_type_cycle_rejected():
    text = MINI_DOMAIN.replace('(:types room robot - object sink - appliance)', '(:types a - b b - a)')
    with pytest.raises(PddlSemanticError, match='cycle'):
        parse_domain(text)


def test_undeclared_variable():
    text = MINI_DOMAIN.replace('(at ?r ?x)', '(at ?q ?x)')
    with pytest.raises(PddlSemanticError, match=r'\?q is not declared'):
        parse_domain(text)


def test_schema_type_mismatch():
    text = MINI_DOMAIN.replace('(faucet_on ?s))', '(faucet_on ?x))', 1)
    with pytest.raises(PddlTypeError) as exc_info:
        parse_domain(text)
    assert exc_info.value.position == 1


def test_sexp_skips_comments():
    assert parse_sexp('(a ; hidden\n b)') == [['a', 'b']]


# endregion

# region Problem parsing


def test_parse_problem(household_domain):
    problem = parse_problem(PROBLEM, household_domain)
    assert problem.name == 'p1'
    assert problem.objects == {'kitchen': 'room', 'bathroom': 'room', 'robot': 'robot', 'bathroom_sink': 'sink'}
    assert Atom('faucet_on', ('bathroom_sink',)) in problem.init
    assert problem.goal == GoalAnd((Literal(Atom('faucet_on', ('bathroom_sink',)), False),))
    assert problem.objects_of_type(household_domain, 'fixture') == ['bathroom_sink']


def test_problem_print_parse_fixed_point(household_domain):
    problem = parse_problem(PROBLEM, household_domain)
    printed = print_problem(problem)
    assert parse_problem(printed, household_domain) == problem
    assert print_problem(parse_problem(printed, household_domain)) == printed


def test_empty_init_and_goal_print(household_domain):
    text = '(define (problem empty) (:domain household) (:objects kitchen - room) (:init))'
    problem = parse_problem(text, household_domain)
    assert problem.init == frozenset()
    printed = print_problem(problem)
    assert '    (:init)' in printed
    assert '(:goal (and))' in printed
    assert parse_problem(printed, household_domain) == problem


def test_init_type_mismatch(household_domain):
    text = PROBLEM.replace('(faucet_on bathroom_sink))', '(faucet_on bathroom_sink) (light_on kitchen_table))', 1)
    text = text.replace('bathroom_sink - sink)', 'bathroom_sink - sink kitchen_table - table)')
    with pytest.raises(PddlTypeError) as exc_info:
        parse_problem(text, household_domain)
    assert exc_info.value.position == 1
    assert exc_info.value.atom == '(light_on kitchen_table)'


def test_init_unknown_object(household_domain):
    text = PROBLEM.replace('(faucet_on bathroom_sink))', '(faucet_on kitchen_sink))', 1)
    with pytest.raises(PddlSemanticError, match='kitchen_sink'):
        parse_problem(text, household_domain)


def test_problem_domain_mismatch(household_domain):
    with pytest.raises(PddlSemanticError, match='not \'household\''):
        parse_problem(PROBLEM.replace('(:domain household)', '(:domain office)'), household_domain)


def test_negated_init_unsupported(household_domain):
    text = PROBLEM.replace('(faucet_on bathroom_sink))', '(not (faucet_on bathroom_sink)))', 1)
    with pytest.raises(UnsupportedFeatureError):
        parse_problem(text, household_domain)


# endregion

# region Goals


OBJECTS = {
    'kitchen': 'room', 'bathroom': 'room', 'hallway': 'room', 'robot': 'robot',
    'sink_a': 'sink', 'sink_b': 'sink', 'lamp': 'light', 'red_pen': 'pen', 'alice': 'person', 'bob': 'person',
}


def test_parse_goal_block(household_domain):
    goal = parse_goal('(:goal (and (not (faucet_on sink_a)) (light_on lamp)))', household_domain, OBJECTS)
    literals = ground_goal(goal, OBJECTS, household_domain)
    assert literals == {Literal(Atom('faucet_on', ('sink_a',)), False), Literal(Atom('light_on', ('lamp',)))}
    assert goal_objects(goal) == {'sink_a', 'lamp'}


def test_forall_grounding(household_domain):
    goal = parse_goal(
        '(forall (?s - sink ?r - room) (not (in_room ?s ?r)))', household_domain, OBJECTS
    )
    assert isinstance(goal, GoalForall)
    literals = ground_goal(goal, OBJECTS, household_domain)
    assert len(literals) == 6
    assert all(not lit.positive for lit in literals)
    assert goal_objects(goal) == frozenset()


def test_forall_over_supertype(household_domain):
    goal = parse_goal('(forall (?x - appliance) (not (in_room ?x kitchen)))', household_domain, OBJECTS)
    names = {lit.atom.args[0] for lit in ground_goal(goal, OBJECTS, household_domain)}
    assert names == {'sink_a', 'sink_b', 'lamp'}


def test_forall_over_empty_type(household_domain):
    goal = parse_goal('(forall (?t - tv) (not (tv_on ?t)))', household_domain, OBJECTS)
    literals = ground_goal(goal, OBJECTS, household_domain)
    assert literals == frozenset()
    assert goal_holds(literals, frozenset())


def test_empty_goal(household_domain):
    goal = parse_goal('(:goal (and))', household_domain, OBJECTS)
    assert goal == GoalAnd()
    assert str(goal) == '(and)'
    assert goal_holds(ground_goal(goal, OBJECTS, household_domain), frozenset({Atom('light_on', ('lamp',))}))


def test_goal_holds_closed_world():
    lamp_on = Atom('light_on', ('lamp',))
    assert goal_holds([Literal(lamp_on, False)], frozenset())
    assert not goal_holds([Literal(lamp_on)], frozenset())
    assert goal_holds([Literal(lamp_on)], frozenset({lamp_on}))
    assert (~Literal(lamp_on)).holds(frozenset())


@pytest.mark.parametrize('text, message', [
    ('(and (light_on)', 'never closed'),
    ('(or (light_on lamp) (tv_on lamp))', 'unsupported PDDL feature: or'),
    ('(not (and (light_on lamp)))', 'not over and'),
    ('(light_on red_pen)', 'type mismatch'),
    ('(light_on ceiling_lamp)', 'unknown object'),
    ('(forall (?l - light) (light_on ?m))', 'not bound'),
])
def test_invalid_goals(household_domain, text, message):
    with pytest.raises(GoalParseError) as exc_info:
        parse_goal(text, household_domain, OBJECTS)
    assert str(exc_info.value).startswith('invalid goal: ')
    assert message in str(exc_info.value)


# endregion

# region Random round trips


def _pick(pool: Mapping[str, str], expected: str, domain: Domain) -> List[str]:
    return [name for name, type_name in pool.items() if domain.is_subtype(type_name, expected)]


def _random_atom(predicate: Predicate, pool: Mapping[str, str], domain: Domain, rng: random.Random):
    args = []
    for _, expected in predicate.params:
        if not (choices := _pick(pool, expected, domain)):
            return None
        args.append(rng.choice(choices))
    return Atom(predicate.name, tuple(args))


def _random_literals(domain: Domain, pool: Mapping[str, str], rng: random.Random, count: int) -> List[Literal]:
    literals = []
    for _ in range(count):
        predicate = rng.choice(list(domain.predicates.values()))
        if atom := _random_atom(predicate, pool, domain, rng):
            literals.append(Literal(atom, rng.random() < 0.6))
    return literals


def random_domain(rng: random.Random) -> Domain:
    types: Dict[str, str] = {}
    for i in range(rng.randint(0, 5)):
        types[f'type_{i}'] = rng.choice([ROOT_TYPE, *types])
    type_names = list(types) or [ROOT_TYPE]
    predicates = {}
    for i in range(rng.randint(1, 5)):
        params = tuple((f'?a{j}', rng.choice(type_names)) for j in range(rng.randint(0, 3)))
        predicates[f'pred_{i}'] = Predicate(f'pred_{i}', params)

    domain = Domain(f'dom_{rng.randrange(1000)}', types, predicates)
    actions = {}
    for i in range(rng.randint(0, 4)):
        params = tuple((f'?p{j}', rng.choice(type_names)) for j in range(rng.randint(0, 3)))
        scope = dict(params)
        preconditions = tuple(_random_literals(domain, scope, rng, rng.randint(0, 3)))
        effects = _random_literals(domain, scope, rng, rng.randint(0, 3))
        add = tuple(lit.atom for lit in effects if lit.positive)
        delete = tuple(lit.atom for lit in effects if not lit.positive)
        actions[f'act_{i}'] = ActionSchema(f'act_{i}', params, preconditions, add, delete)

    supported = (':strips', ':typing', ':negative-preconditions')
    requirements = tuple(req for req in supported if rng.random() < 0.7)
    return Domain(domain.name, types, predicates, actions, requirements)


def _random_goal(domain: Domain, pool: Mapping[str, str], rng: random.Random, depth: int = 0) -> GoalFormula:
    roll = rng.random()
    if depth < 2 and roll < 0.25:
        type_names = list(domain.types) or [ROOT_TYPE]
        variables = tuple((f'?v{depth}_{j}', rng.choice(type_names)) for j in range(rng.randint(1, 2)))
        return GoalForall(variables, _random_goal(domain, {**pool, **dict(variables)}, rng, depth + 1))
    elif depth < 2 and roll < 0.5:
        return GoalAnd(tuple(_random_goal(domain, pool, rng, depth + 1) for _ in range(rng.randint(0, 3))))
    elif literals := _random_literals(domain, pool, rng, 1):
        return literals[0]
    return GoalAnd()


def random_problem(domain: Domain, rng: random.Random) -> Problem:
    type_names = list(domain.types) or [ROOT_TYPE]
    objects = {f'obj_{i}': rng.choice(type_names) for i in range(rng.randint(0, 6))}
    init = frozenset(lit.atom for lit in _random_literals(domain, objects, rng, rng.randint(0, 8)))
    return Problem(f'prob_{rng.randrange(1000)}', domain.name, objects, init, _random_goal(domain, objects, rng))


def test_random_domain_and_problem_fixed_point():
    rng = random.Random(2024)
    for _ in range(1000):
        domain = random_domain(rng)
        printed = print_domain(domain)
        reparsed = parse_domain(printed)
        assert reparsed == domain, printed
        assert print_domain(reparsed) == printed

        problem = random_problem(domain, rng)
        printed = print_problem(problem)
        reparsed = parse_problem(printed, domain)
        assert reparsed == problem, printed
        assert print_problem(reparsed) == printed


# endregion
