"""Exception types shared across the package.

The CLI maps each class to a distinct exit code, so library code should
raise the most specific type that applies.
"""


class RouteflowError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(RouteflowError):
    """A network or scenario file could not be parsed."""


class ValidationError(RouteflowError):
    """A parsed object violates a structural invariant."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class GridError(RouteflowError):
    """Grid parameters are inconsistent with the network or each other."""


class ScenarioError(RouteflowError):
    """A scenario is malformed or incompatible with its network."""


class SimulationError(RouteflowError):
    """A runtime failure inside the solver (mass balance, CFL, routing)."""


class ValueSolveError(RouteflowError):
    """A value-function solve failed to converge within its iteration cap."""
