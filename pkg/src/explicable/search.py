"""Reconciliation search: cost-bounded anytime greedy search guided by the
learned explicability score of plan prefixes, plus an exhaustive oracle."""
from __future__ import annotations

import heapq
import itertools
import logging
from dataclasses import dataclass, field

from .distances import (
    IDENTITY,
    LITERAL_ADJACENT,
    SUM_SQUARED,
    PlanProfile,
    plan_profile,
)
from .errors import EmptyExpectedSet, EnumerationCapExceeded, NoSolutionWithinBound, ResourceLimit
from .expected import generate_expected_set, select_closest
from .regression import predict

log = logging.getLogger(__name__)

DEFAULT_BUDGET = 10**6
DEFAULT_K_EXPECTED = 16
DEFAULT_ENUMERATION_CAP = 10**4


class ExpectedPrefixIndex:
    """Expected plans of the human model, ready to be cut at any depth."""

    def __init__(self, human_task, expected, mode=LITERAL_ADJACENT):
        if not len(expected):
            raise EmptyExpectedSet("expected plan set is empty")
        self.expected = expected
        self.members = tuple(plan_profile(human_task, p, IDENTITY, mode) for p in expected)
        self._cuts = {}

    def at_depth(self, m):
        cut = self._cuts.get(m)
        if cut is None:
            cut = self._cuts[m] = tuple(p.truncate(m) for p in self.members)
        return cut


class ExplicabilityScorer:
    """Scores robot plans and prefixes against an expected-plan index."""

    def __init__(self, index, model, form=SUM_SQUARED):
        self.index = index
        self.model = model
        self.form = form
        self._cache = {}

    def _predict(self, features):
        key = features.as_tuple()
        v = self._cache.get(key)
        if v is None:
            v = self._cache[key] = predict(self.model, key)
        return v

    def heuristic(self, profile):
        """Score of a prefix against expected plans cut to the same depth;
        the empty prefix is maximally optimistic."""
        if len(profile) == 0:
            return 1.0
        sel = select_closest(profile, self.index.at_depth(len(profile)), self.form)
        return self._predict(sel.features)

    def score(self, profile):
        """Score of a complete plan against the full expected plans."""
        sel = select_closest(profile, self.index.members, self.form)
        return self._predict(sel.features)


def prefix_heuristic(prefix_profile, index, model, form=SUM_SQUARED):
    return ExplicabilityScorer(index, model, form).heuristic(prefix_profile)


def build_scorer(epp, model, k_expected=DEFAULT_K_EXPECTED, mode=LITERAL_ADJACENT, form=SUM_SQUARED):
    expected = generate_expected_set(epp.human, k_expected)
    return ExplicabilityScorer(ExpectedPrefixIndex(epp.human, expected, mode), model, form)


# ---------------------------------------------------------------------------
# incremental prefix profiles
# ---------------------------------------------------------------------------

class _ProfileBuilder:
    def __init__(self, task, mapping, mode):
        self.task = task
        self.mapping = mapping
        self.mode = mode
        self.names = [mapping.to_human(a.name) for a in task.actions]

    def root(self):
        return PlanProfile((), (), (self.task.names(self.task.init),)), {}

    def extend(self, profile, aux, action, succ):
        task = self.task
        j = len(profile.names)
        name = self.names[action.id]
        names = profile.names + (name,)
        new_links = []
        if self.mode == LITERAL_ADJACENT:
            if j > 0:
                prev = aux["prev"]
                for p in sorted((prev.add & action.pre) - task.derived):
                    new_links.append((j, (profile.names[-1], task.fluents[p], name)))
            new_aux = {"prev": action}
        else:
            last_adder = aux.get("last_adder", {})
            for p in sorted(action.pre - task.derived):
                if p in last_adder:
                    i = last_adder[p]
                    new_links.append((j, (names[i], task.fluents[p], name)))
            last_adder = {p: i for p, i in last_adder.items() if p not in action.delete}
            for p in action.add:
                last_adder[p] = j
            new_aux = {"last_adder": last_adder}
        prof = PlanProfile(names, profile.links + tuple(new_links),
                           profile.states + (task.names(succ),))
        return prof, new_aux


# ---------------------------------------------------------------------------
# reconciliation search
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Solution:
    index: int
    plan: object  # task.Plan
    cost: int
    score: float
    names: tuple[str, ...]


@dataclass
class SolutionStream:
    solutions: list = field(default_factory=list)
    best_so_far: list = field(default_factory=list)
    best_index: int = -1
    complete: bool = True
    expansions: int = 0
    generated: int = 0
    reopened: int = 0

    def add(self, sol):
        self.solutions.append(sol)
        if self.best_index < 0 or sol.score > self.solutions[self.best_index].score:
            self.best_index = len(self.solutions) - 1
        self.best_so_far.append(self.solutions[self.best_index].score)

    @property
    def best(self):
        return self.solutions[self.best_index] if self.solutions else None

    def __len__(self):
        return len(self.solutions)

    def __iter__(self):
        return iter(self.solutions)

    def anytime_rows(self):
        return [(s.index, s.cost, s.score, b) for s, b in zip(self.solutions, self.best_so_far)]


@dataclass
class _Node:
    state: frozenset
    g: int
    h: float
    actions: tuple
    path: frozenset
    profile: PlanProfile
    aux: dict


def reconciliation_search(epp, max_cost, model=None, k_expected=DEFAULT_K_EXPECTED, emit=None,
                          mode=LITERAL_ADJACENT, form=SUM_SQUARED, budget=DEFAULT_BUDGET, scorer=None):
    """Greedy best-first search on the predicted explicability of prefixes.

    Goal nodes are reported through ``emit`` as they are found and the
    search keeps going until the open list is empty, so every loopless plan
    within ``max_cost`` is eventually produced.  The closed list keeps the
    best heuristic seen per state; a state reached again with a strictly
    better value is reopened.
    """
    if max_cost < 0:
        raise ValueError("max_cost must be non-negative")
    if scorer is None:
        scorer = build_scorer(epp, model, k_expected, mode, form)
    task = epp.robot
    builder = _ProfileBuilder(task, epp.mapping, mode)
    stream = SolutionStream()
    counter = itertools.count()

    profile, aux = builder.root()
    root = _Node(task.init, 0, 1.0, (), frozenset({task.init}), profile, aux)
    open_list = [(-root.h, next(counter), root)]
    closed = {}

    while open_list:
        if stream.expansions >= budget:
            stream.complete = False
            break
        _, _, n = heapq.heappop(open_list)
        if task.goal <= n.state:
            plan = task.plan(n.actions)
            sol = Solution(len(stream.solutions), plan, n.g, scorer.score(n.profile), n.profile.names)
            stream.add(sol)
            log.debug("solution %d cost=%d score=%.4f", sol.index, sol.cost, sol.score)
            if emit is not None:
                emit(sol)
        if n.h > closed.get(n.state, -1.0):
            closed[n.state] = n.h
        stream.expansions += 1
        for a in task.actions:
            if not a.pre <= n.state:
                continue
            g2 = n.g + a.cost
            if g2 > max_cost:
                continue
            succ = (n.state - a.delete) | a.add
            if succ in n.path:
                continue
            prof, aux = builder.extend(n.profile, n.aux, a, succ)
            h = scorer.heuristic(prof)
            if succ in closed and h > closed[succ]:
                del closed[succ]
                stream.reopened += 1
            child = _Node(succ, g2, h, n.actions + (a.id,), n.path | {succ}, prof, aux)
            stream.generated += 1
            heapq.heappush(open_list, (-h, next(counter), child))

    if not stream.complete:
        raise ResourceLimit(f"node budget {budget} exhausted after {len(stream)} solutions", partial=stream)
    if not stream.solutions:
        raise NoSolutionWithinBound(f"no plan of {task.name} costs at most {max_cost}")
    return stream


# ---------------------------------------------------------------------------
# exhaustive oracle
# ---------------------------------------------------------------------------

def enumerate_plans(task, max_cost, cap=DEFAULT_ENUMERATION_CAP):
    """Every loopless goal-reaching plan with cost at most ``max_cost``, as
    action-id tuples in lexicographic order."""
    found = []
    path = {task.init}
    prefix = []

    def dfs(state, g):
        if task.goal <= state:
            if len(found) >= cap:
                raise EnumerationCapExceeded(f"more than {cap} plans within cost {max_cost}")
            found.append(tuple(prefix))
        for a in task.actions:
            if not a.pre <= state or g + a.cost > max_cost:
                continue
            succ = (state - a.delete) | a.add
            if succ in path:
                continue
            path.add(succ)
            prefix.append(a.id)
            dfs(succ, g + a.cost)
            prefix.pop()
            path.discard(succ)

    dfs(task.init, 0)
    return found


def brute_force_explicable(epp, max_cost, model=None, k_expected=DEFAULT_K_EXPECTED,
                           mode=LITERAL_ADJACENT, form=SUM_SQUARED, cap=DEFAULT_ENUMERATION_CAP,
                           scorer=None):
    """Best-scoring loopless plan within ``max_cost`` by full enumeration.
    Ties go to the lexicographically smallest action-id sequence."""
    if scorer is None:
        scorer = build_scorer(epp, model, k_expected, mode, form)
    plans = enumerate_plans(epp.robot, max_cost, cap)
    if not plans:
        raise NoSolutionWithinBound(f"no plan of {epp.robot.name} costs at most {max_cost}")
    best, best_score = None, -1.0
    for ids in plans:
        plan = epp.robot.plan(ids)
        s = scorer.score(plan_profile(epp.robot, plan, epp.mapping, mode))
        if s > best_score:
            best, best_score = plan, s
    return best, best_score
