"""Front end for the STRIPS subset of PDDL used by the planning models.

Supported requirements: ``:strips``, ``:typing``, ``:negative-preconditions``
and ``:action-costs``.  Anything else is rejected with
:class:`~explicable.errors.UnsupportedFeature`.  Identifiers are
case-sensitive; keywords are not.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import (
    ArityMismatch,
    PDDLSyntaxError,
    UnknownObject,
    UnknownPredicate,
    UnsupportedFeature,
)

SUPPORTED_REQUIREMENTS = frozenset(
    {":strips", ":typing", ":negative-preconditions", ":action-costs"}
)
ROOT_TYPE = "object"
COST_FUNCTION = "total-cost"


# ---------------------------------------------------------------------------
# s-expressions
# ---------------------------------------------------------------------------

class Token(str):
    """A string that remembers where it came from."""

    line: int
    col: int

    def __new__(cls, text, line, col):
        tok = super().__new__(cls, text)
        tok.line = line
        tok.col = col
        return tok


class SList(list):
    line: int = 0
    col: int = 0


_TOKEN_RE = re.compile(r"\s+|;[^\n]*|\(|\)|[^\s();]+")


def tokenize(text):
    line, line_start = 1, 0
    for m in _TOKEN_RE.finditer(text):
        chunk = m.group()
        col = m.start() - line_start + 1
        if chunk[0].isspace() or chunk[0] == ";":
            newlines = chunk.count("\n")
            if newlines:
                line += newlines
                line_start = m.start() + chunk.rindex("\n") + 1
            continue
        yield Token(chunk, line, col)


def parse_sexpr(text):
    """Parse a single top-level s-expression into nested :class:`SList`."""
    stack = []
    result = None
    for tok in tokenize(text):
        if result is not None:
            raise PDDLSyntaxError(f"unexpected {tok!r} after end of document", tok.line, tok.col)
        if tok == "(":
            node = SList()
            node.line, node.col = tok.line, tok.col
            stack.append(node)
        elif tok == ")":
            if not stack:
                raise PDDLSyntaxError("unbalanced ')'", tok.line, tok.col)
            node = stack.pop()
            if stack:
                stack[-1].append(node)
            else:
                result = node
        else:
            if not stack:
                raise PDDLSyntaxError(f"bare token {tok!r} outside any list", tok.line, tok.col)
            stack[-1].append(tok)
    if stack:
        raise PDDLSyntaxError("unbalanced '(': document ends inside a list", stack[-1].line, stack[-1].col)
    if result is None:
        raise PDDLSyntaxError("empty document", 1, 1)
    return result


def _pos(node):
    return getattr(node, "line", None), getattr(node, "col", None)


def _fail(message, node):
    raise PDDLSyntaxError(message, *_pos(node))


def _expect_list(node, what):
    if not isinstance(node, list):
        _fail(f"expected a list for {what}, got {node!r}", node)
    return node


def _expect_symbol(node, what):
    if isinstance(node, list):
        _fail(f"expected a name for {what}, got a list", node)
    return str(node)


def _kw(node):
    return node.lower() if isinstance(node, str) else None


# ---------------------------------------------------------------------------
# model types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Atom:
    predicate: str
    args: tuple[str, ...] = ()

    def __str__(self):
        return "(" + " ".join((self.predicate, *self.args)) + ")"


@dataclass(frozen=True)
class Literal:
    atom: Atom
    positive: bool = True

    def __str__(self):
        return str(self.atom) if self.positive else f"(not {self.atom})"


@dataclass(frozen=True)
class Predicate:
    name: str
    params: tuple[tuple[str, str], ...] = ()  # (variable, type)

    @property
    def arity(self):
        return len(self.params)


@dataclass(frozen=True)
class ActionSchema:
    name: str
    params: tuple[tuple[str, str], ...]
    precondition: tuple[Literal, ...]
    add: tuple[Atom, ...]
    delete: tuple[Atom, ...]
    cost: int = 1


@dataclass(frozen=True)
class DomainModel:
    name: str
    requirements: tuple[str, ...]
    types: dict = field(default_factory=dict)  # type -> parent type
    constants: tuple[tuple[str, str], ...] = ()
    predicates: tuple[Predicate, ...] = ()
    action_schemas: tuple[ActionSchema, ...] = ()

    def predicate(self, name):
        for p in self.predicates:
            if p.name == name:
                return p
        return None

    def schema(self, name):
        for a in self.action_schemas:
            if a.name == name:
                return a
        return None

    def is_subtype(self, sub, sup):
        seen = set()
        while sub is not None and sub not in seen:
            if sub == sup:
                return True
            seen.add(sub)
            sub = self.types.get(sub)
        return sup == ROOT_TYPE


@dataclass(frozen=True)
class ProblemInstance:
    name: str
    domain_name: str
    objects: tuple[tuple[str, str], ...]
    init: frozenset
    goal: frozenset


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------

def _typed_list(items, node, allow_vars):
    """Parse ``a b - t c - u d`` into ``[(a, t), (b, t), (c, u), (d, object)]``."""
    out, pending = [], []
    i = 0
    while i < len(items):
        item = items[i]
        if isinstance(item, list):
            _fail("unexpected list inside typed list", item)
        if item == "-":
            if i + 1 >= len(items) or isinstance(items[i + 1], list):
                _fail("'-' must be followed by a type name", item)
            typ = str(items[i + 1])
            if typ.lower() == "either":
                raise UnsupportedFeature("'either' types are not supported")
            if not pending:
                _fail("type annotation without names", item)
            out.extend((name, typ) for name in pending)
            pending = []
            i += 2
            continue
        name = str(item)
        if allow_vars != name.startswith("?"):
            kind = "variable" if allow_vars else "object name"
            _fail(f"expected a {kind}, got {name!r}", item)
        pending.append(name)
        i += 1
    out.extend((name, ROOT_TYPE) for name in pending)
    return out


def _atom(node, what):
    node = _expect_list(node, what)
    if not node:
        _fail(f"empty atom in {what}", node)
    head = _expect_symbol(node[0], what)
    args = []
    for a in node[1:]:
        args.append(_expect_symbol(a, what))
    return Atom(head, tuple(args))


def _conjunction(node, what):
    """Flatten ``(and ...)``; a single literal is accepted too."""
    node = _expect_list(node, what)
    if not node:
        return []
    if _kw(node[0]) == "and":
        out = []
        for child in node[1:]:
            out.extend(_conjunction(child, what))
        return out
    return [node]


_UNSUPPORTED_HEADS = {
    "or": "disjunction",
    "imply": "implication",
    "forall": "universal quantification",
    "exists": "existential quantification",
    "when": "conditional effects",
    "=": "equality",
}


def _check_supported(node, what):
    head = _kw(node[0]) if node else None
    if head in _UNSUPPORTED_HEADS:
        raise UnsupportedFeature(f"{_UNSUPPORTED_HEADS[head]} in {what} (line {node.line})")


# ---------------------------------------------------------------------------
# domain
# ---------------------------------------------------------------------------

def parse_domain(text):
    """Parse a domain document into a :class:`DomainModel`."""
    root = parse_sexpr(text)
    if not root or _kw(root[0]) != "define":
        _fail("document must start with (define ...)", root)
    header = _expect_list(root[1] if len(root) > 1 else None, "domain header")
    if len(header) != 2 or _kw(header[0]) != "domain":
        _fail("expected (domain NAME)", header)
    name = _expect_symbol(header[1], "domain name")

    requirements = [":strips"]
    types = {}
    constants = []
    predicates = []
    raw_actions = []
    has_cost_function = False

    for section in root[2:]:
        section = _expect_list(section, "domain section")
        if not section:
            _fail("empty domain section", section)
        key = _kw(section[0])
        if key == ":requirements":
            requirements = []
            for r in section[1:]:
                r = _expect_symbol(r, "requirement").lower()
                if r not in SUPPORTED_REQUIREMENTS:
                    raise UnsupportedFeature(f"requirement {r} is not supported")
                requirements.append(r)
        elif key == ":types":
            for sub, parent in _typed_list(section[1:], section, allow_vars=False):
                types[sub] = parent
        elif key == ":constants":
            constants.extend(_typed_list(section[1:], section, allow_vars=False))
        elif key == ":predicates":
            for p in section[1:]:
                p = _expect_list(p, "predicate declaration")
                pname = _expect_symbol(p[0], "predicate name")
                params = _typed_list(p[1:], p, allow_vars=True)
                predicates.append(Predicate(pname, tuple(params)))
        elif key == ":functions":
            has_cost_function = _parse_functions(section)
        elif key == ":action":
            raw_actions.append(section)
        elif key in (":derived", ":durative-action"):
            raise UnsupportedFeature(f"{key} is not supported")
        else:
            _fail(f"unknown domain section {section[0]!r}", section)

    reqs = set(requirements)
    if types and ":typing" not in reqs:
        raise UnsupportedFeature(":types used without :typing requirement")
    if has_cost_function and ":action-costs" not in reqs:
        raise UnsupportedFeature("(total-cost) declared without :action-costs requirement")

    domain = DomainModel(
        name=name,
        requirements=tuple(requirements),
        types=dict(types),
        constants=tuple(constants),
        predicates=tuple(predicates),
    )
    seen = set()
    for p in predicates:
        if p.name in seen:
            raise PDDLSyntaxError(f"predicate {p.name} declared twice")
        seen.add(p.name)

    actions = []
    for node in raw_actions:
        act = _parse_action(node, domain, reqs)
        if domain.schema(act.name) is not None or any(a.name == act.name for a in actions):
            _fail(f"action {act.name} declared twice", node)
        actions.append(act)
    return DomainModel(
        name=name,
        requirements=tuple(requirements),
        types=dict(types),
        constants=tuple(constants),
        predicates=tuple(predicates),
        action_schemas=tuple(actions),
    )


def _parse_functions(section):
    items = section[1:]
    declared = False
    i = 0
    while i < len(items):
        f = items[i]
        if isinstance(f, list) and len(f) == 1 and _kw(f[0]) == COST_FUNCTION:
            declared = True
            i += 1
            if i + 1 < len(items) and items[i] == "-":
                if _kw(items[i + 1]) != "number":
                    raise UnsupportedFeature("only numeric (total-cost) is supported")
                i += 2
            continue
        raise UnsupportedFeature("numeric fluents other than (total-cost) are not supported")
    return declared


def _parse_action(node, domain, reqs):
    if len(node) < 2:
        _fail("action without a name", node)
    name = _expect_symbol(node[1], "action name")
    fields = {}
    i = 2
    while i < len(node):
        key = _kw(node[i])
        if key not in (":parameters", ":precondition", ":effect"):
            _fail(f"unknown action field {node[i]!r}", node[i] if not isinstance(node[i], list) else node)
        if i + 1 >= len(node):
            _fail(f"{key} without a value", node)
        fields[key] = node[i + 1]
        i += 2

    params = _typed_list(_expect_list(fields.get(":parameters", SList()), "parameters"), node, allow_vars=True)
    variables = {v: t for v, t in params}
    if len(variables) != len(params):
        _fail(f"duplicate parameter in {name}", node)
    constants = {c for c, _ in domain.constants}

    def check_atom(atom, where):
        pred = domain.predicate(atom.predicate)
        if pred is None:
            raise UnknownPredicate(f"{where} of {name}: undeclared predicate {atom.predicate}")
        if pred.arity != len(atom.args):
            raise ArityMismatch(
                f"{where} of {name}: {atom.predicate} expects {pred.arity} arguments, got {len(atom.args)}"
            )
        for arg in atom.args:
            if arg.startswith("?"):
                if arg not in variables:
                    raise PDDLSyntaxError(f"{where} of {name}: unbound variable {arg}")
            elif arg not in constants:
                raise UnknownObject(f"{where} of {name}: undeclared constant {arg}")

    precondition = []
    pre_node = fields.get(":precondition")
    if pre_node is not None:
        for lit in _conjunction(pre_node, "precondition"):
            _check_supported(lit, f"precondition of {name}")
            if _kw(lit[0]) == "not":
                if ":negative-preconditions" not in reqs:
                    raise UnsupportedFeature(
                        f"negative precondition in {name} requires :negative-preconditions"
                    )
                if len(lit) != 2:
                    _fail("(not ...) takes exactly one atom", lit)
                atom = _atom(lit[1], "precondition")
                _check_supported(lit[1], f"precondition of {name}")
                positive = False
            else:
                atom = _atom(lit, "precondition")
                positive = True
            check_atom(atom, "precondition")
            precondition.append(Literal(atom, positive))

    add, delete = [], []
    cost = None
    eff_node = fields.get(":effect")
    if eff_node is not None:
        for lit in _conjunction(eff_node, "effect"):
            _check_supported(lit, f"effect of {name}")
            head = _kw(lit[0])
            if head == "increase":
                cost = _parse_cost(lit, name, reqs, cost)
            elif head in ("decrease", "assign", "scale-up", "scale-down"):
                raise UnsupportedFeature(f"numeric effect {head} in {name}")
            elif head == "not":
                if len(lit) != 2:
                    _fail("(not ...) takes exactly one atom", lit)
                atom = _atom(lit[1], "effect")
                check_atom(atom, "effect")
                delete.append(atom)
            else:
                atom = _atom(lit, "effect")
                check_atom(atom, "effect")
                add.append(atom)
    clash = set(add) & set(delete)
    if clash:
        raise PDDLSyntaxError(f"action {name} adds and deletes {sorted(map(str, clash))}")
    if cost is None:
        # unit costs for plain STRIPS; missing increase counts 0 under action costs
        cost = 0 if ":action-costs" in reqs else 1
    return ActionSchema(name, tuple(params), tuple(precondition), tuple(add), tuple(delete), cost)


def _parse_cost(lit, name, reqs, previous):
    if ":action-costs" not in reqs:
        raise UnsupportedFeature(f"cost effect in {name} requires :action-costs")
    if previous is not None:
        _fail(f"action {name} increases total-cost twice", lit)
    if len(lit) != 3 or not isinstance(lit[1], list) or [_kw(x) for x in lit[1]] != [COST_FUNCTION]:
        raise UnsupportedFeature(f"only (increase (total-cost) N) is supported in {name}")
    value = lit[2]
    if isinstance(value, list):
        raise UnsupportedFeature(f"non-constant action cost in {name}")
    if not re.fullmatch(r"\d+", str(value)):
        raise UnsupportedFeature(f"action cost {value} in {name} is not a non-negative integer")
    return int(value)


# ---------------------------------------------------------------------------
# problem
# ---------------------------------------------------------------------------

def parse_problem(text, domain, check_domain_name=True):
    """Parse a problem document against an already parsed ``domain``."""
    root = parse_sexpr(text)
    if not root or _kw(root[0]) != "define":
        _fail("document must start with (define ...)", root)
    header = _expect_list(root[1] if len(root) > 1 else None, "problem header")
    if len(header) != 2 or _kw(header[0]) != "problem":
        _fail("expected (problem NAME)", header)
    name = _expect_symbol(header[1], "problem name")

    domain_name = None
    objects = list(domain.constants)
    init_nodes, goal_nodes = [], []
    for section in root[2:]:
        section = _expect_list(section, "problem section")
        key = _kw(section[0]) if section else None
        if key == ":domain":
            domain_name = _expect_symbol(section[1], "domain name")
        elif key == ":requirements":
            for r in section[1:]:
                if _expect_symbol(r, "requirement").lower() not in SUPPORTED_REQUIREMENTS:
                    raise UnsupportedFeature(f"requirement {r} is not supported")
        elif key == ":objects":
            objects.extend(_typed_list(section[1:], section, allow_vars=False))
        elif key == ":init":
            init_nodes = section[1:]
        elif key == ":goal":
            if len(section) != 2:
                _fail("(:goal ...) takes one formula", section)
            goal_nodes = _conjunction(section[1], "goal")
        elif key == ":metric":
            continue
        else:
            _fail(f"unknown problem section {section[0] if section else '()'!r}", section)

    if domain_name is None:
        _fail("problem does not name its domain", root)
    if check_domain_name and domain_name != domain.name:
        raise PDDLSyntaxError(f"problem refers to domain {domain_name}, not {domain.name}")

    obj_types = {}
    for obj, typ in objects:
        if typ != ROOT_TYPE and typ not in domain.types:
            raise UnknownObject(f"object {obj} has undeclared type {typ}")
        obj_types[obj] = typ

    def check(atom, where):
        pred = domain.predicate(atom.predicate)
        if pred is None:
            raise UnknownPredicate(f"{where}: undeclared predicate {atom.predicate}")
        if pred.arity != len(atom.args):
            raise ArityMismatch(f"{where}: {atom.predicate} expects {pred.arity} arguments")
        for arg, (_, typ) in zip(atom.args, pred.params):
            if arg not in obj_types:
                raise UnknownObject(f"{where}: undeclared object {arg}")
            if not domain.is_subtype(obj_types[arg], typ):
                raise UnknownObject(f"{where}: object {arg} is not of type {typ}")

    init = set()
    for node in init_nodes:
        node = _expect_list(node, "init atom")
        if node and _kw(node[0]) == "=":
            if len(node) == 3 and isinstance(node[1], list) and [_kw(x) for x in node[1]] == [COST_FUNCTION]:
                continue
            raise UnsupportedFeature("numeric fluents other than (total-cost) are not supported")
        if node and _kw(node[0]) == "not":
            continue  # closed world: explicit negatives are redundant
        atom = _atom(node, "init")
        check(atom, "init")
        init.add(atom)

    goal = set()
    for node in goal_nodes:
        _check_supported(node, "goal")
        if _kw(node[0]) == "not":
            raise UnsupportedFeature("negative goals are not supported")
        atom = _atom(node, "goal")
        check(atom, "goal")
        goal.add(atom)

    return ProblemInstance(name, domain_name, tuple(objects[len(domain.constants):]), frozenset(init), frozenset(goal))


# ---------------------------------------------------------------------------
# printing
# ---------------------------------------------------------------------------

def _typed(pairs):
    return " ".join(f"{n} - {t}" if t != ROOT_TYPE else n for n, t in pairs)


def print_domain(domain):
    """Render a :class:`DomainModel` back to PDDL text."""
    lines = [f"(define (domain {domain.name})"]
    lines.append("  (:requirements " + " ".join(domain.requirements) + ")")
    if domain.types:
        lines.append("  (:types " + " ".join(f"{t} - {p}" for t, p in domain.types.items()) + ")")
    if domain.constants:
        lines.append(f"  (:constants {_typed(domain.constants)})")
    preds = " ".join(f"({' '.join([p.name, _typed(p.params)]).strip()})" for p in domain.predicates)
    lines.append(f"  (:predicates {preds})")
    costs = ":action-costs" in domain.requirements
    if costs:
        lines.append(f"  (:functions ({COST_FUNCTION}) - number)")
    for a in domain.action_schemas:
        lines.append(f"  (:action {a.name}")
        lines.append(f"    :parameters ({_typed(a.params)})")
        lines.append("    :precondition (and " + " ".join(map(str, a.precondition)) + ")")
        effects = [str(x) for x in a.add] + [f"(not {x})" for x in a.delete]
        if costs:
            effects.append(f"(increase ({COST_FUNCTION}) {a.cost})")
        lines.append("    :effect (and " + " ".join(effects) + "))")
    lines.append(")")
    return "\n".join(lines) + "\n"


def print_problem(problem):
    lines = [f"(define (problem {problem.name})", f"  (:domain {problem.domain_name})"]
    lines.append(f"  (:objects {_typed(problem.objects)})")
    lines.append("  (:init " + " ".join(sorted(map(str, problem.init))) + ")")
    lines.append("  (:goal (and " + " ".join(sorted(map(str, problem.goal))) + "))")
    lines.append(")")
    return "\n".join(lines) + "\n"
