"""Exception hierarchy shared by all modules."""


class ExplicableError(Exception):
    """Base class for every error raised by this package."""


# --- parsing -----------------------------------------------------------------

class PDDLSyntaxError(ExplicableError):
    def __init__(self, message, line=None, col=None):
        self.line = line
        self.col = col
        where = f" at line {line}, column {col}" if line is not None else ""
        super().__init__(f"{message}{where}")


class UnsupportedFeature(ExplicableError):
    pass


class ArityMismatch(ExplicableError):
    pass


class UnknownPredicate(ExplicableError):
    pass


class UnknownObject(ExplicableError):
    pass


# --- grounding / execution ---------------------------------------------------

class GroundingExplosion(ExplicableError):
    pass


class PreconditionViolation(ExplicableError):
    def __init__(self, action, missing):
        self.action = action
        self.missing = tuple(missing)
        super().__init__(f"{action}: missing preconditions {list(self.missing)}")


class StepFailure(ExplicableError):
    def __init__(self, index, action, missing):
        self.index = index
        self.action = action
        self.missing = tuple(missing)
        super().__init__(f"step {index} ({action}): missing preconditions {list(self.missing)}")


class GoalUnsatisfied(ExplicableError):
    def __init__(self, missing):
        self.missing = tuple(missing)
        super().__init__(f"goal not reached, missing {list(self.missing)}")


class InvalidPlan(ExplicableError):
    pass


class ModelMismatch(ExplicableError):
    """Robot and human tasks disagree on the initial state or goal."""


# --- search ------------------------------------------------------------------

class Unsolvable(ExplicableError):
    pass


class ResourceLimit(ExplicableError):
    def __init__(self, message, partial=None):
        self.partial = partial
        super().__init__(message)


class EmptyExpectedSet(ExplicableError):
    pass


class NoSolutionWithinBound(ExplicableError):
    pass


class EnumerationCapExceeded(ExplicableError):
    pass


# --- learning ----------------------------------------------------------------

class DegenerateDesign(ExplicableError):
    pass


class ZeroVariance(ExplicableError):
    pass


class TooFewSamples(ExplicableError):
    pass


class MalformedModel(ExplicableError):
    pass


class AlignmentError(ExplicableError):
    pass


# --- scoring / config --------------------------------------------------------

class UncoveredAction(ExplicableError):
    pass


class ConfigError(ExplicableError):
    pass
