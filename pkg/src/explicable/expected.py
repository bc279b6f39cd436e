"""Optimal planning in the human model and the expected plan set."""
from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field

from .distances import (
    IDENTITY,
    LITERAL_ADJACENT,
    SUM_SQUARED,
    compare_profiles,
    composite_distance,
    plan_profile,
)
from .errors import EmptyExpectedSet, ResourceLimit, Unsolvable

DEFAULT_NODE_CAP = 10**6
DEFAULT_K_MAX = 64


class HMax:
    """Max-cost relaxed reachability heuristic, cached per state."""

    def __init__(self, task):
        self.task = task
        self.by_pre = {}
        self.free = []
        for a in task.actions:
            if not a.pre:
                self.free.append(a)
            for p in a.pre:
                self.by_pre.setdefault(p, []).append(a)
        self.cache = {}

    def __call__(self, state):
        h = self.cache.get(state)
        if h is None:
            h = self.cache[state] = self._compute(state)
        return h

    def _compute(self, state):
        task = self.task
        dist = {}
        heap = [(0, f) for f in sorted(state)]
        remaining = {a.id: len(a.pre) for a in task.actions}
        for a in self.free:
            for q in a.add:
                heap.append((a.cost, q))
        heapq.heapify(heap)
        goal_left = set(task.goal)
        while heap and goal_left:
            d, f = heapq.heappop(heap)
            if f in dist:
                continue
            dist[f] = d
            goal_left.discard(f)
            for a in self.by_pre.get(f, ()):
                remaining[a.id] -= 1
                if remaining[a.id] == 0:
                    for q in a.add:
                        if q not in dist:
                            heapq.heappush(heap, (d + a.cost, q))
        if goal_left:
            return math.inf
        return max((dist[g] for g in task.goal), default=0)


def blind(task):
    def h(state):
        return 0
    return h


def optimal_plan(task, heuristic="hmax", node_cap=DEFAULT_NODE_CAP):
    """Cost-optimal plan by A*.

    Ties on ``f`` are broken first-in first-out; successors are generated in
    action-id order, so lower ids win among siblings.
    """
    h = HMax(task) if heuristic == "hmax" else blind(task)
    start = task.init
    h0 = h(start)
    if h0 == math.inf:
        raise Unsolvable(f"{task.name}: goal unreachable")
    counter = itertools.count()
    best_g = {start: 0}
    parent = {start: None}
    heap = [(h0, next(counter), 0, start)]
    expansions = 0
    while heap:
        f, _, g, state = heapq.heappop(heap)
        if g > best_g[state]:
            continue
        if task.goal <= state:
            actions = []
            s = state
            while parent[s] is not None:
                prev, aid = parent[s]
                actions.append(aid)
                s = prev
            return task.plan(reversed(actions))
        expansions += 1
        if expansions > node_cap:
            raise ResourceLimit(f"{task.name}: node cap {node_cap} reached")
        for a in task.actions:
            if not a.pre <= state:
                continue
            succ = (state - a.delete) | a.add
            g2 = g + a.cost
            if g2 >= best_g.get(succ, math.inf):
                continue
            hs = h(succ)
            if hs == math.inf:
                continue
            best_g[succ] = g2
            parent[succ] = (state, a.id)
            heapq.heappush(heap, (g2 + hs, next(counter), g2, succ))
    raise Unsolvable(f"{task.name}: search space exhausted without reaching the goal")


@dataclass(frozen=True)
class ExpectedPlanSet:
    plans: tuple
    optimal_cost: int
    expansions: int = 0
    truncated: bool = False

    def __len__(self):
        return len(self.plans)

    def __iter__(self):
        return iter(self.plans)


def generate_expected_set(task, k_max=DEFAULT_K_MAX, node_cap=DEFAULT_NODE_CAP):
    """All loopless plans of optimal cost (at most ``k_max``), in depth-first
    action-id order."""
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    bound = optimal_plan(task, node_cap=node_cap).cost
    h = HMax(task)
    plans = []
    truncated = False
    expansions = 0
    path_states = {task.init}
    prefix = []

    def dfs(state, g):
        nonlocal truncated, expansions
        if g == bound and task.goal <= state:
            if len(plans) == k_max:
                truncated = True
                return
            plans.append(task.plan(prefix))
        expansions += 1
        if expansions > node_cap:
            raise ResourceLimit(f"{task.name}: node cap {node_cap} reached while enumerating")
        for a in task.actions:
            if truncated:
                return
            if not a.pre <= state:
                continue
            g2 = g + a.cost
            if g2 > bound:
                continue
            succ = (state - a.delete) | a.add
            if succ in path_states or g2 + h(succ) > bound:
                continue
            path_states.add(succ)
            prefix.append(a.id)
            dfs(succ, g2)
            prefix.pop()
            path_states.discard(succ)

    dfs(task.init, 0)
    return ExpectedPlanSet(tuple(plans), bound, expansions, truncated)


@dataclass(frozen=True)
class SelectionResult:
    chosen: int
    features: object  # DistanceVector
    composite: float
    all_features: tuple = field(default=(), repr=False)


def select_closest(robot_profile, member_profiles, form=SUM_SQUARED):
    """Index and features of the member closest to ``robot_profile``.
    Ties go to the lowest index."""
    if not member_profiles:
        raise EmptyExpectedSet("expected plan set is empty")
    vectors = tuple(compare_profiles(robot_profile, m) for m in member_profiles)
    best = 0
    best_c = composite_distance(vectors[0], form)
    for i in range(1, len(vectors)):
        c = composite_distance(vectors[i], form)
        if c < best_c:
            best, best_c = i, c
    return SelectionResult(best, vectors[best], best_c, vectors)


def distance_minimizing_plan(robot_task, robot_plan, expected, human_task, mapping=IDENTITY,
                             mode=LITERAL_ADJACENT, form=SUM_SQUARED):
    """Member of ``expected`` with the smallest composite distance to
    ``robot_plan``, together with the feature vector against it."""
    if not len(expected):
        raise EmptyExpectedSet("expected plan set is empty")
    pr = plan_profile(robot_task, robot_plan, mapping, mode)
    members = [plan_profile(human_task, p, IDENTITY, mode) for p in expected]
    return select_closest(pr, members, form)
