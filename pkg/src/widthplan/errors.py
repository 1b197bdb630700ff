"""Exception types raised across the package."""


class WidthPlanError(Exception):
    """Base class for all package errors."""


class InvalidParams(WidthPlanError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"invalid parameter {field!r}: {message}")


class ParseError(WidthPlanError):
    def __init__(self, message, line=0, column=0):
        self.line = line
        self.column = column
        super().__init__(f"{line}:{column}: {message}")


class SemanticError(WidthPlanError):
    pass


class KindError(WidthPlanError):
    pass


class UnknownFeature(WidthPlanError):
    pass


class UnknownHook(WidthPlanError):
    pass


class ArityMismatch(WidthPlanError):
    pass


class EvaluatorUnbound(WidthPlanError):
    pass


class CapExceeded(WidthPlanError):
    """A state-space or policy-reachable enumeration went over its cap."""

    def __init__(self, cap, what="states"):
        self.cap = cap
        super().__init__(f"more than {cap} {what}")


SpaceCapExceeded = CapExceeded


class TupleBudgetExceeded(WidthPlanError):
    pass


class Unsolvable(WidthPlanError):
    pass


class NotASolution(WidthPlanError):
    pass


class ValuationSetMissing(WidthPlanError):
    pass


class IllFormedSketch(WidthPlanError):
    pass


class EpisodeFailed(WidthPlanError):
    def __init__(self, k_cap, state, plan_so_far=None):
        self.k_cap = k_cap
        self.state = state
        self.plan_so_far = plan_so_far or []
        super().__init__(f"no qualifying state found with k <= {k_cap}")


class NonDecreasing(WidthPlanError):
    pass
