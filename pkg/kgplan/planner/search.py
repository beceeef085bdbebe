"""
Forward state-space search for plans.

The search is greedy best-first on the additive heuristic, breaking ties breadth-first.  When the heuristic makes no
progress for a configured number of expansions, the search restarts as uniform-cost search, which is complete.  States
whose heuristic is infinite are dead ends in the relaxation and are never expanded.

:author: Doug Skrypa
"""

import logging
import time
from dataclasses import dataclass, field
from heapq import heappush, heappop
from itertools import count
from math import inf
from typing import Tuple, Optional, Dict, List

from ..core.constants import (
    DEFAULT_PLANNER_TIMEOUT, DEFAULT_EXPANSION_CAP, DEFAULT_GROUNDING_CAP, DEFAULT_PLATEAU_THRESHOLD,
)
from ..core.exceptions import UnsolvableProblem, PlannerTimeout
from ..pddl.model import Domain, Problem
from .grounding import GroundAction, GroundTask, State, ground
from .heuristic import AdditiveHeuristic
from .plan_text import format_plan

__all__ = ['PlannerConfig', 'SearchStats', 'Plan', 'solve', 'search', 'eliminate_actions']
log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PlannerConfig:
    timeout: float = DEFAULT_PLANNER_TIMEOUT
    expansion_cap: int = DEFAULT_EXPANSION_CAP
    grounding_cap: int = DEFAULT_GROUNDING_CAP
    plateau_threshold: int = DEFAULT_PLATEAU_THRESHOLD
    eliminate: bool = True


@dataclass
class SearchStats:
    ground_actions: int = 0
    expansions: int = 0
    generated: int = 0
    evaluations: int = 0
    switched_to_ucs: bool = False
    grounding_time: float = 0.0
    search_time: float = 0.0

    @property
    def total_time(self) -> float:
        return self.grounding_time + self.search_time


@dataclass(frozen=True)
class Plan:
    steps: Tuple[GroundAction, ...] = ()
    stats: SearchStats = field(default_factory=SearchStats, compare=False)

    def __len__(self):
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    def __str__(self):
        return format_plan(self.steps)


class _Deadline:
    def __init__(self, config: PlannerConfig, stats: SearchStats):
        self.end = time.monotonic() + config.timeout
        self.cap = config.expansion_cap
        self.stats = stats

    def check(self):
        if self.stats.expansions >= self.cap:
            raise PlannerTimeout(f'Expansion cap of {self.cap:,d} reached without finding a plan')
        if self.stats.expansions % 64 == 0 and time.monotonic() > self.end:
            raise PlannerTimeout(f'No plan found within the time limit ({self.stats.expansions:,d} expansions)')


def _extract(parents: Dict[State, Optional[Tuple[State, GroundAction]]], state: State) -> List[GroundAction]:
    steps = []
    while (link := parents[state]) is not None:
        state, action = link
        steps.append(action)
    return steps[::-1]


def _gbfs(
    task: GroundTask, h: AdditiveHeuristic, config: PlannerConfig, stats: SearchStats, deadline: _Deadline
) -> Optional[List[GroundAction]]:
    """
    :return: The plan, or None when the heuristic plateaued (the caller falls back to uniform-cost search)
    :raises: :class:`UnsolvableProblem` when every reachable non-dead-end state was expanded
    """
    init = task.init
    if (h0 := h(init)) == inf:
        raise UnsolvableProblem('The goal is unreachable even when delete effects are ignored')
    tie = count()
    frontier = [(h0, 0, next(tie), init)]
    parents: Dict[State, Optional[Tuple[State, GroundAction]]] = {init: None}
    best_h, since_progress = h0, 0
    while frontier:
        h_value, depth, _, state = heappop(frontier)
        if task.goal_reached(state):
            return _extract(parents, state)
        deadline.check()
        stats.expansions += 1
        if h_value < best_h:
            best_h, since_progress = h_value, 0
        elif (since_progress := since_progress + 1) > config.plateau_threshold:
            log.debug(f'Heuristic plateau at h={best_h} after {stats.expansions} expansions')
            return None

        for action in task.actions:
            if not action.applicable(state):
                continue
            child = action.apply(state)
            if child in parents:
                continue
            stats.generated += 1
            parents[child] = (state, action)
            if (h_child := h(child)) < inf:
                heappush(frontier, (h_child, depth + 1, next(tie), child))

    raise UnsolvableProblem('Search space exhausted without reaching the goal')


def _ucs(
    task: GroundTask, h: AdditiveHeuristic, stats: SearchStats, deadline: _Deadline
) -> List[GroundAction]:
    # Unit action costs, so this is breadth-first order; dead ends are still pruned
    tie = count()
    frontier = [(0, next(tie), task.init)]
    parents: Dict[State, Optional[Tuple[State, GroundAction]]] = {task.init: None}
    while frontier:
        cost, _, state = heappop(frontier)
        if task.goal_reached(state):
            return _extract(parents, state)
        deadline.check()
        stats.expansions += 1
        for action in task.actions:
            if not action.applicable(state):
                continue
            child = action.apply(state)
            if child in parents:
                continue
            stats.generated += 1
            parents[child] = (state, action)
            if h(child) < inf:
                heappush(frontier, (cost + 1, next(tie), child))

    raise UnsolvableProblem('Search space exhausted without reaching the goal')


def search(task: GroundTask, config: Optional[PlannerConfig] = None, stats: Optional[SearchStats] = None) -> Plan:
    """Search a grounded task for a plan; see :func:`solve`"""
    config = config or PlannerConfig()
    stats = stats or SearchStats(ground_actions=len(task.actions))
    start = time.monotonic()
    h = AdditiveHeuristic(task)
    deadline = _Deadline(config, stats)
    try:
        if task.goal_reached(task.init):
            steps = []
        elif (steps := _gbfs(task, h, config, stats, deadline)) is None:
            stats.switched_to_ucs = True
            steps = _ucs(task, h, stats, deadline)
        if config.eliminate:
            steps = eliminate_actions(task, steps)
    finally:
        stats.evaluations = h.evaluations
        stats.search_time = time.monotonic() - start

    log.debug(
        f'Found a {len(steps)}-step plan after {stats.expansions:,d} expansions'
        f' ({stats.search_time:.3f}s, ucs={stats.switched_to_ucs})'
    )
    return Plan(tuple(steps), stats)


def solve(domain: Domain, problem: Problem, config: Optional[PlannerConfig] = None) -> Plan:
    """
    Ground the problem and search for a plan.  Identical inputs always produce identical plans.

    :raises: :class:`GroundingLimitExceeded`, :class:`UnsolvableProblem`, or :class:`PlannerTimeout`
    """
    config = config or PlannerConfig()
    start = time.monotonic()
    task = ground(domain, problem, config.grounding_cap, reachability=True)
    stats = SearchStats(ground_actions=len(task.actions), grounding_time=time.monotonic() - start)
    return search(task, config, stats)


def _valid(task: GroundTask, steps: List[GroundAction]) -> bool:
    state = task.init
    for action in steps:
        if not action.applicable(state):
            return False
        state = action.apply(state)
    return task.goal_reached(state)


def eliminate_actions(task: GroundTask, steps: List[GroundAction]) -> List[GroundAction]:
    """Greedily drop single steps while the remaining plan still reaches the goal"""
    steps = list(steps)
    i = 0
    while i < len(steps):
        candidate = steps[:i] + steps[i + 1:]
        if _valid(task, candidate):
            log.debug(f'Eliminated redundant step {i + 1}: {steps[i]}')
            steps = candidate
        else:
            i += 1
    return steps
