"""Exception types shared across the package."""


class ResolutionError(ValueError):
    """A tree measure is not deep enough for the requested scale."""

    def __init__(self, needed: int, available: int):
        super().__init__(
            f"insufficient resolution: need depth {needed}, tree has {available}"
        )
        self.needed = needed
        self.available = available


class EmptyComponentError(ValueError):
    """Zooming into a cell that carries no mass."""


class BudgetExceededError(RuntimeError):
    """A word enumeration outgrew its configured budget."""

    def __init__(self, budget: int, knob: str = "depth"):
        super().__init__(f"budget exceeded: more than {budget} words (reduce {knob})")
        self.budget = budget
        self.knob = knob


class HypothesisError(ValueError):
    """Checkable hypotheses of a construction fail on the given data."""
