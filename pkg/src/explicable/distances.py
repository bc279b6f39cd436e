"""Plan distance measures: action-set, causal-link and state-sequence
distances, the composite distance, and robot-to-human action renaming."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import InvalidPlan, StepFailure
from .task import execute_prefix

LITERAL_ADJACENT = "literal-adjacent"
PRODUCER_CONSUMER = "producer-consumer"
LINK_MODES = (LITERAL_ADJACENT, PRODUCER_CONSUMER)

ROBOT_TO_HUMAN = "robot-to-human"
HUMAN_TO_ROBOT = "human-to-robot"

SUM_SQUARED = "sum-squared"
EUCLIDEAN_SQUARED = "euclidean-squared"


def jaccard_distance(a, b):
    """``1 - |a & b| / |a | b|``, defined as 0 when both sets are empty."""
    a, b = set(a), set(b)
    union = len(a | b)
    if union == 0:
        return 0.0
    return 1.0 - len(a & b) / union


# ---------------------------------------------------------------------------
# action mapping
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MappedPlan:
    names: tuple[str, ...]
    passthrough: tuple[bool, ...]

    @property
    def unmapped(self):
        return sorted({n for n, p in zip(self.names, self.passthrough) if p})


class ActionMapping:
    """Partial renaming of robot ground-action names into the human model's
    vocabulary.  Names without an entry are kept verbatim."""

    def __init__(self, pairs=None):
        pairs = dict(pairs or {})
        inverse = {}
        for r, h in pairs.items():
            if h in inverse:
                raise ValueError(f"mapping is not injective: {inverse[h]} and {r} both map to {h}")
            inverse[h] = r
        self.pairs = pairs
        self.inverse = inverse

    def __eq__(self, other):
        return isinstance(other, ActionMapping) and self.pairs == other.pairs

    def __repr__(self):
        return f"ActionMapping({self.pairs!r})"

    def to_human(self, name):
        return self.pairs.get(name, name)

    def to_robot(self, name):
        return self.inverse.get(name, name)

    def translate(self, names, direction=ROBOT_TO_HUMAN):
        table = self.pairs if direction == ROBOT_TO_HUMAN else self.inverse
        out, flags = [], []
        for n in names:
            out.append(table.get(n, n))
            flags.append(n not in table)
        return MappedPlan(tuple(out), tuple(flags))

    @classmethod
    def parse(cls, text):
        pairs = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split("\t") if "\t" in line else line.split()
            if len(parts) != 2:
                raise ValueError(f"mapping line {lineno}: expected 'robotName<TAB>humanName'")
            r, h = parts[0].strip(), parts[1].strip()
            if r in pairs:
                raise ValueError(f"mapping line {lineno}: {r} mapped twice")
            pairs[r] = h
        return cls(pairs)

    @classmethod
    def read(cls, path):
        return cls.parse(Path(path).read_text(encoding="utf-8"))

    def dump(self):
        return "".join(f"{r}\t{h}\n" for r, h in sorted(self.pairs.items()))


IDENTITY = ActionMapping()


def map_plan(task, plan, mapping, direction=ROBOT_TO_HUMAN):
    """Translate a plan's action names; pass-through names are flagged."""
    return mapping.translate(task.action_names(plan), direction)


# ---------------------------------------------------------------------------
# causal links
# ---------------------------------------------------------------------------

@dataclass(frozen=True, order=True)
class CausalLink:
    producer: int  # ground action id
    fluent: int
    consumer: int


def _link_positions(task, plan, mode):
    """Yield ``(i, fluent, j)`` step positions of causal links in ``plan``.

    Complement fluents introduced by compiling negative preconditions are
    left out.
    """
    if mode not in LINK_MODES:
        raise ValueError(f"unknown causal-link mode {mode!r}")
    acts = [task.actions[i] for i in plan.actions]
    derived = task.derived
    if mode == LITERAL_ADJACENT:
        for i in range(len(acts) - 1):
            for p in sorted((acts[i].add & acts[i + 1].pre) - derived):
                yield i, p, i + 1
        return
    last_adder = {}
    for j, a in enumerate(acts):
        for p in sorted(a.pre - derived):
            if p in last_adder:
                yield last_adder[p], p, j
        for p in a.delete:
            last_adder.pop(p, None)
        for p in a.add:
            last_adder[p] = j


def extract_causal_links(task, plan, mode=LITERAL_ADJACENT):
    """Set of :class:`CausalLink` triples of a plan valid in ``task``."""
    try:
        execute_prefix(task, plan)
    except StepFailure as exc:
        raise InvalidPlan(str(exc)) from exc
    return {
        CausalLink(plan.actions[i], p, plan.actions[j])
        for i, p, j in _link_positions(task, plan, mode)
    }


# ---------------------------------------------------------------------------
# distance measures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DistanceVector:
    action_d: float
    causal_d: float
    state_d: float

    def __iter__(self):
        return iter((self.action_d, self.causal_d, self.state_d))

    def as_tuple(self):
        return (self.action_d, self.causal_d, self.state_d)


ZERO = DistanceVector(0.0, 0.0, 0.0)


def action_distance(names_r, names_h, mapping=IDENTITY):
    """Jaccard distance between the unique (mapped) action names of two plans.

    ``names_r`` are robot action names and are translated through
    ``mapping``; ``names_h`` are already in the human vocabulary.
    """
    return jaccard_distance({mapping.to_human(n) for n in names_r}, set(names_h))


def state_distance(s1, s2):
    return jaccard_distance(s1, s2)


def state_sequence_distance(trace_r, trace_h):
    """Distance between two state sequences ``(s0, ..., sn)``.

    Post-action states are compared pairwise up to the shorter plan; each
    unmatched state of the longer plan counts as maximally different.
    """
    len_r, len_h = len(trace_r) - 1, len(trace_h) - 1
    n, n_short = max(len_r, len_h), min(len_r, len_h)
    if n <= 0:
        return 0.0
    total = sum(state_distance(trace_r[k], trace_h[k]) for k in range(1, n_short + 1))
    return (total + n - n_short) / n


def composite_distance(dv, form=SUM_SQUARED):
    """``(dA + dC + dS) ** 2``; ``euclidean-squared`` gives ``dA² + dC² + dS²``."""
    if form == SUM_SQUARED:
        return (dv.action_d + dv.causal_d + dv.state_d) ** 2
    if form == EUCLIDEAN_SQUARED:
        return dv.action_d**2 + dv.causal_d**2 + dv.state_d**2
    raise ValueError(f"unknown composite form {form!r}")


# ---------------------------------------------------------------------------
# precomputed plan views
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PlanProfile:
    """Name-level view of a plan used for distance computation.

    ``names`` are in the human vocabulary (robot plans are mapped).  Links
    carry the consumer's step index so prefixes can be cut cheaply.
    """

    names: tuple[str, ...]
    links: tuple[tuple[int, tuple[str, str, str]], ...]
    states: tuple[frozenset, ...] = field(repr=False)

    def __len__(self):
        return len(self.names)

    def link_set(self, upto=None):
        if upto is None:
            return {l for _, l in self.links}
        return {l for j, l in self.links if j < upto}

    def truncate(self, m):
        if m >= len(self.names):
            return self
        return PlanProfile(
            self.names[:m],
            tuple((j, l) for j, l in self.links if j < m),
            self.states[: m + 1],
        )


def plan_profile(task, plan, mapping=IDENTITY, mode=LITERAL_ADJACENT):
    """Build a :class:`PlanProfile`; ``plan`` must be executable in ``task``."""
    try:
        trace = execute_prefix(task, plan)
    except StepFailure as exc:
        raise InvalidPlan(str(exc)) from exc
    names = tuple(mapping.to_human(n) for n in task.action_names(plan))
    links = tuple(
        (j, (names[i], task.fluents[p], names[j]))
        for i, p, j in _link_positions(task, plan, mode)
    )
    states = tuple(task.names(s) for s in trace.states)
    return PlanProfile(names, links, states)


def compare_profiles(pr, ph):
    return DistanceVector(
        jaccard_distance(set(pr.names), set(ph.names)),
        jaccard_distance(pr.link_set(), ph.link_set()),
        state_sequence_distance(pr.states, ph.states),
    )


def causal_link_distance(task_r, plan_r, task_h, plan_h, mapping=IDENTITY, mode=LITERAL_ADJACENT):
    pr = plan_profile(task_r, plan_r, mapping, mode)
    ph = plan_profile(task_h, plan_h, IDENTITY, mode)
    return jaccard_distance(pr.link_set(), ph.link_set())


def distance_vector(task_r, plan_r, task_h, plan_h, mapping=IDENTITY, mode=LITERAL_ADJACENT):
    """All three distances between a robot plan and a human-model plan."""
    return compare_profiles(
        plan_profile(task_r, plan_r, mapping, mode),
        plan_profile(task_h, plan_h, IDENTITY, mode),
    )
