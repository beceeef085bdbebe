"""
The additive heuristic (h_add) over the delete relaxation of a ground task.

Negative preconditions are ignored by the relaxation.  A negative goal literal that is false in the evaluated state
costs the cheapest relaxed application of an action that deletes it; without such an action it is unreachable.

:author: Doug Skrypa
"""

import logging
from collections import defaultdict
from heapq import heapify, heappush, heappop
from math import inf
from typing import Dict, List, Tuple

from ..pddl.model import Atom
from .grounding import GroundTask, State

__all__ = ['AdditiveHeuristic']
log = logging.getLogger(__name__)


class AdditiveHeuristic:
    def __init__(self, task: GroundTask):
        self.task = task
        self._triggers: Dict[Atom, List[int]] = defaultdict(list)
        self._free: List[int] = []      # actions without positive preconditions
        self._deleters: Dict[Atom, List[int]] = defaultdict(list)
        for i, action in enumerate(task.actions):
            for atom in action.pre_pos:
                self._triggers[atom].append(i)
            if not action.pre_pos:
                self._free.append(i)
            for atom in action.delete:
                if atom in task.goal_neg:
                    self._deleters[atom].append(i)
        self.evaluations = 0

    def __call__(self, state: State) -> float:
        self.evaluations += 1
        task = self.task
        if task.goal_reached(state):
            return 0
        atom_cost, action_cost = self._explore(state)
        total = 0.0
        for atom in task.goal_pos:
            if (cost := atom_cost.get(atom, inf)) == inf:
                return inf
            total += cost
        for atom in task.goal_neg:
            if atom in state:
                cost = min((action_cost.get(i, inf) for i in self._deleters.get(atom, ())), default=inf)
                if cost == inf:
                    return inf
                total += cost
        return total

    def _explore(self, state: State) -> Tuple[Dict[Atom, float], Dict[int, float]]:
        """Generalized Dijkstra over the relaxed task: cost of each reachable atom and applicable action"""
        actions = self.task.actions
        atom_cost: Dict[Atom, float] = {atom: 0 for atom in state}
        action_cost: Dict[int, float] = {}
        unsatisfied = {}
        partial = defaultdict(float)
        heap = [(0, atom) for atom in state]
        heapify(heap)

        def enable(index: int, cost: float):
            action_cost[index] = cost
            for added in actions[index].add:
                if cost < atom_cost.get(added, inf):
                    atom_cost[added] = cost
                    heappush(heap, (cost, added))

        for i in self._free:
            enable(i, 1)

        while heap:
            cost, atom = heappop(heap)
            if cost > atom_cost[atom]:
                continue
            for i in self._triggers.get(atom, ()):
                remaining = unsatisfied.get(i, len(actions[i].pre_pos)) - 1
                unsatisfied[i] = remaining
                partial[i] += cost
                if remaining == 0:
                    enable(i, partial[i] + 1)

        return atom_cost, action_cost
