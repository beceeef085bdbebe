from .grounding import GroundAction, GroundTask, instantiate, ground, count_groundings
from .heuristic import AdditiveHeuristic
from .search import PlannerConfig, SearchStats, Plan, solve, search
from .validation import ValidationResult, validate
from .plan_text import format_plan, parse_plan
from .external import ExternalPlanner
