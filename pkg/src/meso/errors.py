"""Exception types shared across the package.

Every error message names the model entity (variable, component, prosumer,
file) that caused it, so failures deep in a pipeline stay attributable.
"""


class MesoError(Exception):
    """Base class for all package errors."""


# --- problem construction ---------------------------------------------------

class DuplicateNameError(MesoError):
    pass


class InvalidBoundsError(MesoError):
    pass


class UnknownVariableError(MesoError):
    pass


# --- solving ----------------------------------------------------------------

class NumericalBreakdownError(MesoError):
    """Pivot magnitude fell below the admissible floor; input is ill-conditioned."""


class NodeLimitExceededError(MesoError):
    """Branch-and-bound hit its node limit before finding any integer-feasible point."""


class SolveFailedError(MesoError):
    """A pipeline solve came back infeasible or unbounded."""

    def __init__(self, owner: str, status) -> None:
        self.owner = owner
        self.status = status
        super().__init__(f"{owner}: solve ended with status {status}")


# --- component and topology modelling ----------------------------------------

class MissingCapacityError(MesoError):
    pass


class MissingProfileError(MesoError):
    pass


class HorizonMismatchError(MesoError):
    pass


class ComponentSpecError(MesoError):
    """A component parameter set violates its archetype rules."""


# --- objectives -------------------------------------------------------------

class MissingCostParameterError(MesoError):
    pass


class UnknownQuantityError(MesoError):
    pass


class InfeasibleModelError(MesoError):
    pass


# --- hierarchy --------------------------------------------------------------

class FrozenCapacityMissingError(MesoError):
    pass


# --- temporal aggregation ---------------------------------------------------

class IndivisibleLengthError(MesoError):
    pass


class KTooLargeError(MesoError):
    pass


# --- scenario I/O -----------------------------------------------------------

class ScenarioParseError(MesoError):
    """Malformed scenario document; carries line/column from the JSON parser."""


class ScenarioSchemaError(MesoError):
    """Scenario violates the schema; message lists every violation found."""

    def __init__(self, violations: list[str]) -> None:
        self.violations = violations
        super().__init__("scenario invalid:\n" + "\n".join(f"  - {v}" for v in violations))


class MissingFileError(MesoError):
    pass


class ResultWriteError(MesoError):
    pass
