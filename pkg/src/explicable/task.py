"""Grounded STRIPS tasks: grounding, state transition, plan validation."""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import (
    GoalUnsatisfied,
    GroundingExplosion,
    InvalidPlan,
    ModelMismatch,
    PreconditionViolation,
    StepFailure,
)
from .pddl import ROOT_TYPE, Atom, parse_domain, parse_problem

DEFAULT_GROUNDING_CAP = 10**6
TASK_FORMAT_VERSION = 1


def complement_name(name):
    return f"(not {name})"


@dataclass(frozen=True)
class GroundAction:
    id: int
    schema: str
    args: tuple[str, ...]
    pre: frozenset
    add: frozenset
    delete: frozenset
    cost: int

    @property
    def name(self):
        """Dashed name, e.g. ``LeftSqueeze-l2-l1``."""
        return "-".join((self.schema, *self.args))

    @property
    def sexpr(self):
        return "(" + " ".join((self.schema, *self.args)) + ")"


@dataclass(frozen=True)
class GroundTask:
    """A grounded task.  Fluent ids index ``fluents``; ids are dense and
    follow the lexicographic order of atom names."""

    name: str
    fluents: tuple[str, ...]
    actions: tuple[GroundAction, ...]
    init: frozenset
    goal: frozenset
    derived: frozenset = frozenset()  # ids of complement fluents "(not p)"

    def __post_init__(self):
        object.__setattr__(self, "_fluent_ids", {f: i for i, f in enumerate(self.fluents)})
        object.__setattr__(self, "_by_name", {a.name: a.id for a in self.actions})
        object.__setattr__(self, "_by_sexpr", {a.sexpr: a.id for a in self.actions})

    def fluent_id(self, name):
        return self._fluent_ids[name]

    def action_id(self, name):
        """Look up an action by dashed name or s-expression."""
        if name in self._by_name:
            return self._by_name[name]
        key = " ".join(name.split())
        if key in self._by_sexpr:
            return self._by_sexpr[key]
        raise KeyError(name)

    def names(self, fluent_ids, include_derived=False):
        """Atom names of a fluent-id set; complement fluents dropped unless asked."""
        if include_derived:
            return frozenset(self.fluents[i] for i in fluent_ids)
        return frozenset(self.fluents[i] for i in fluent_ids if i not in self.derived)

    def applicable(self, state):
        return [a for a in self.actions if a.pre <= state]

    def plan(self, action_ids):
        ids = tuple(action_ids)
        for i in ids:
            if not 0 <= i < len(self.actions):
                raise InvalidPlan(f"action id {i} does not exist in {self.name}")
        return Plan(ids, sum(self.actions[i].cost for i in ids))

    def plan_from_names(self, names):
        ids = []
        for n in names:
            try:
                ids.append(self.action_id(n))
            except KeyError:
                raise InvalidPlan(f"unknown action {n!r} in task {self.name}") from None
        return self.plan(ids)

    def action_names(self, plan):
        return [self.actions[i].name for i in plan.actions]


@dataclass(frozen=True)
class Plan:
    actions: tuple[int, ...]
    cost: int

    def __len__(self):
        return len(self.actions)

    def prefix(self, k, task):
        return task.plan(self.actions[:k])


@dataclass(frozen=True)
class StateTrace:
    states: tuple[frozenset, ...]
    cost: int

    @property
    def final(self):
        return self.states[-1]


# ---------------------------------------------------------------------------
# grounding
# ---------------------------------------------------------------------------

def _objects_by_type(domain, problem):
    objs = list(domain.constants) + list(problem.objects)
    by_type = {}
    all_types = set(domain.types) | set(domain.types.values()) | {ROOT_TYPE}
    for typ in sorted(all_types):
        by_type[typ] = sorted({o for o, t in objs if domain.is_subtype(t, typ)})
    return by_type


def ground(domain, problem, cap=DEFAULT_GROUNDING_CAP, name=None):
    """Instantiate every action schema over the typed objects.

    Actions with a positive precondition that is neither initially true nor
    added by any ground action are dropped, as are actions needing an atom to
    be false that starts true and is never deleted.  Negative preconditions
    are compiled into complement fluents named ``(not p)``.
    """
    by_type = _objects_by_type(domain, problem)
    init_atoms = {str(a) for a in problem.init}
    goal_atoms = {str(a) for a in problem.goal}

    def subst(atom, binding):
        return str(Atom(atom.predicate, tuple(binding.get(x, x) for x in atom.args)))

    raw = []
    for schema in domain.action_schemas:
        domains = [by_type.get(t, []) for _, t in schema.params]
        for combo in itertools.product(*domains):
            binding = dict(zip((v for v, _ in schema.params), combo))
            pos = frozenset(subst(l.atom, binding) for l in schema.precondition if l.positive)
            neg = frozenset(subst(l.atom, binding) for l in schema.precondition if not l.positive)
            if pos & neg:
                continue  # self-contradictory precondition
            add = frozenset(subst(a, binding) for a in schema.add)
            delete = frozenset(subst(a, binding) for a in schema.delete) - add
            raw.append((schema.name, combo, pos, neg, add, delete, schema.cost))
            if len(raw) > cap:
                raise GroundingExplosion(f"more than {cap} ground actions")

    addable = set(init_atoms)
    deletable = set()
    for _, _, _, _, add, delete, _ in raw:
        addable |= add
        deletable |= delete
    kept = [
        r for r in raw
        if r[2] <= addable and all(a not in init_atoms or a in deletable for a in r[3])
    ]

    negated = set()
    for r in kept:
        negated |= r[3]
    universe = set(init_atoms) | goal_atoms | {complement_name(a) for a in negated}
    for _, _, pos, neg, add, delete, _ in kept:
        universe |= pos | add | delete
    fluents = tuple(sorted(universe))
    fid = {f: i for i, f in enumerate(fluents)}

    kept.sort(key=lambda r: ("-".join((r[0], *r[1])), r[1]))
    actions = []
    for i, (schema, combo, pos, neg, add, delete, cost) in enumerate(kept):
        pre = {fid[a] for a in pos} | {fid[complement_name(a)] for a in neg}
        add_ids = {fid[a] for a in add} | {fid[complement_name(a)] for a in delete if a in negated}
        del_ids = {fid[a] for a in delete} | {fid[complement_name(a)] for a in add if a in negated}
        actions.append(GroundAction(i, schema, tuple(combo), frozenset(pre), frozenset(add_ids),
                                    frozenset(del_ids), cost))

    init = {fid[a] for a in init_atoms} | {fid[complement_name(a)] for a in negated if a not in init_atoms}
    return GroundTask(
        name=name or problem.name,
        fluents=fluents,
        actions=tuple(actions),
        init=frozenset(init),
        goal=frozenset(fid[a] for a in goal_atoms),
        derived=frozenset(fid[complement_name(a)] for a in negated),
    )


def load_task(domain_path, problem_path, check_domain_name=True):
    domain = parse_domain(Path(domain_path).read_text(encoding="utf-8"))
    problem = parse_problem(Path(problem_path).read_text(encoding="utf-8"), domain, check_domain_name)
    return ground(domain, problem)


# ---------------------------------------------------------------------------
# execution
# ---------------------------------------------------------------------------

def apply(task, state, action_id):
    """Successor of ``state`` under ``action_id``: ``(state - del) | add``."""
    a = task.actions[action_id]
    if not a.pre <= state:
        raise PreconditionViolation(a.name, sorted(task.fluents[i] for i in a.pre - state))
    return (state - a.delete) | a.add


def validate_plan(task, plan):
    """Execute ``plan`` from the initial state and return its state trace."""
    state = task.init
    states = [state]
    for k, i in enumerate(plan.actions):
        if not 0 <= i < len(task.actions):
            raise InvalidPlan(f"action id {i} does not exist in {task.name}")
        a = task.actions[i]
        missing = a.pre - state
        if missing:
            raise StepFailure(k, a.name, sorted(task.fluents[f] for f in missing))
        state = (state - a.delete) | a.add
        states.append(state)
    missing = task.goal - state
    if missing:
        raise GoalUnsatisfied(sorted(task.fluents[f] for f in missing))
    return StateTrace(tuple(states), sum(task.actions[i].cost for i in plan.actions))


def execute_prefix(task, plan):
    """Like :func:`validate_plan` but without the goal test."""
    state = task.init
    states = [state]
    for k, i in enumerate(plan.actions):
        a = task.actions[i]
        missing = a.pre - state
        if missing:
            raise StepFailure(k, a.name, sorted(task.fluents[f] for f in missing))
        state = (state - a.delete) | a.add
        states.append(state)
    return StateTrace(tuple(states), plan.cost)


# ---------------------------------------------------------------------------
# plan files
# ---------------------------------------------------------------------------

def format_plan(task, plan, score=None, extra_comments=()):
    lines = [f"; {c}" for c in extra_comments]
    lines += [task.actions[i].sexpr for i in plan.actions]
    lines.append(f"; cost = {plan.cost}")
    if score is not None:
        lines.append(f"; score = {score:.6f}")
    return "\n".join(lines) + "\n"


def parse_plan(task, text):
    names = []
    for raw in text.splitlines():
        line = raw.split(";", 1)[0].strip()
        if not line:
            continue
        if not (line.startswith("(") and line.endswith(")")):
            raise InvalidPlan(f"malformed plan line {raw!r}")
        names.append(" ".join(line.split()))
    return task.plan_from_names(names)


def read_plan(task, path):
    return parse_plan(task, Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def task_to_dict(task):
    return {
        "format": "ground-task",
        "version": TASK_FORMAT_VERSION,
        "name": task.name,
        "fluents": [{"id": i, "name": f, "derived": i in task.derived} for i, f in enumerate(task.fluents)],
        "actions": [
            {
                "id": a.id,
                "name": a.name,
                "schema": a.schema,
                "args": list(a.args),
                "pre": sorted(a.pre),
                "add": sorted(a.add),
                "del": sorted(a.delete),
                "cost": a.cost,
            }
            for a in task.actions
        ],
        "init": sorted(task.init),
        "goal": sorted(task.goal),
    }


def dump_task(task):
    return json.dumps(task_to_dict(task), indent=1, sort_keys=True) + "\n"


def load_task_json(text):
    d = json.loads(text)
    if d.get("format") != "ground-task" or d.get("version") != TASK_FORMAT_VERSION:
        raise ValueError("not a version-1 ground-task document")
    actions = tuple(
        GroundAction(a["id"], a["schema"], tuple(a["args"]), frozenset(a["pre"]), frozenset(a["add"]),
                     frozenset(a["del"]), a["cost"])
        for a in d["actions"]
    )
    return GroundTask(
        name=d["name"],
        fluents=tuple(f["name"] for f in d["fluents"]),
        actions=actions,
        init=frozenset(d["init"]),
        goal=frozenset(d["goal"]),
        derived=frozenset(f["id"] for f in d["fluents"] if f["derived"]),
    )


# ---------------------------------------------------------------------------
# explicable planning problem
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExplicablePlanningProblem:
    robot: GroundTask
    human: GroundTask
    mapping: object  # distances.ActionMapping

    def __post_init__(self):
        for what in ("init", "goal"):
            r = self.robot.names(getattr(self.robot, what))
            h = self.human.names(getattr(self.human, what))
            if r != h:
                diff = sorted(r ^ h)
                raise ModelMismatch(f"robot and human {what} differ on {diff}")


def load_epp(robot_domain, human_domain, problem_path, mapping=None):
    from .distances import ActionMapping

    text = Path(problem_path).read_text(encoding="utf-8")
    rd = parse_domain(Path(robot_domain).read_text(encoding="utf-8"))
    hd = parse_domain(Path(human_domain).read_text(encoding="utf-8"))
    robot = ground(rd, parse_problem(text, rd))
    human = ground(hd, parse_problem(text, hd))
    if mapping is None:
        mapping = ActionMapping()
    elif not isinstance(mapping, ActionMapping):
        mapping = ActionMapping.read(mapping)
    return ExplicablePlanningProblem(robot, human, mapping)
