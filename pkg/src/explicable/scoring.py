"""Rule-based plan scorer standing in for human raters.

Each action of a plan is labelled explicable (1) or not (0) by declarative
rules; the plan score is the fraction of explicable actions.

Rule file syntax, one rule per line, ``#`` starts a comment, patterns are
shell-style globs over dashed ground-action names::

    allow PATTERN               # explicable unless another rule objects
    forbid PATTERN              # never explicable
    require-before A B          # the first B is inexplicable unless an A came earlier
    forbid-after A B            # every B that follows an A is inexplicable
    forbid-between A B C        # every C after an A and before the next B is inexplicable

Every action in a scored plan must match at least one pattern of the rule
set; otherwise :class:`UncoveredAction` is raised.
"""
from __future__ import annotations

from dataclasses import dataclass
from fnmatch import fnmatchcase
from pathlib import Path

from .errors import ConfigError, UncoveredAction

_ARITY = {"allow": 1, "forbid": 1, "require-before": 2, "forbid-after": 2, "forbid-between": 3}


@dataclass(frozen=True)
class Rule:
    kind: str
    patterns: tuple[str, ...]


class RuleSet:
    def __init__(self, rules):
        self.rules = tuple(rules)

    @classmethod
    def parse(cls, text):
        rules = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            kind, *pats = line.split()
            if kind not in _ARITY:
                raise ConfigError(f"rule line {lineno}: unknown rule {kind!r}")
            if len(pats) != _ARITY[kind]:
                raise ConfigError(f"rule line {lineno}: {kind} takes {_ARITY[kind]} pattern(s)")
            rules.append(Rule(kind, tuple(pats)))
        return cls(rules)

    @classmethod
    def read(cls, path):
        return cls.parse(Path(path).read_text(encoding="utf-8"))

    def covers(self, name):
        return any(fnmatchcase(name, p) for r in self.rules for p in r.patterns)

    def labels(self, names):
        names = list(names)
        for n in names:
            if not self.covers(n):
                raise UncoveredAction(f"no rule covers action {n!r}")
        ok = [1] * len(names)
        for rule in self.rules:
            if rule.kind == "forbid":
                for k, n in enumerate(names):
                    if fnmatchcase(n, rule.patterns[0]):
                        ok[k] = 0
            elif rule.kind == "require-before":
                a, b = rule.patterns
                seen_a = False
                for k, n in enumerate(names):
                    if fnmatchcase(n, b):
                        if not seen_a:
                            ok[k] = 0
                        break
                    if fnmatchcase(n, a):
                        seen_a = True
            elif rule.kind == "forbid-after":
                a, b = rule.patterns
                seen_a = False
                for k, n in enumerate(names):
                    if seen_a and fnmatchcase(n, b):
                        ok[k] = 0
                    if fnmatchcase(n, a):
                        seen_a = True
            elif rule.kind == "forbid-between":
                a, b, c = rule.patterns
                inside = False
                for k, n in enumerate(names):
                    if inside and fnmatchcase(n, c):
                        ok[k] = 0
                    if fnmatchcase(n, a):
                        inside = True
                    elif fnmatchcase(n, b):
                        inside = False
        return ok


def plan_score_synthetic(names, rules):
    """Fraction of actions labelled explicable; the empty plan scores 1."""
    labels = rules.labels(names)
    if not labels:
        return 1.0
    return sum(labels) / len(labels)
