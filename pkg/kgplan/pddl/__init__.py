from .model import ROOT_TYPE, Atom, Literal, Predicate, ActionSchema, GoalAnd, GoalForall, GoalFormula, Domain, Problem
from .parser import parse_domain, parse_problem, parse_goal
from .printer import print_domain, print_problem
from .goals import ground_goal, goal_holds, goal_objects
