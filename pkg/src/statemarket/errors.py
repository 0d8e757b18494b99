"""Exception hierarchy shared across the package.

Three bases map onto the CLI exit codes: validation problems (bad input,
unmet preconditions), solver failures, and verification failures.
"""


class StateMarketError(Exception):
    pass


class ValidationError(StateMarketError):
    """Input or precondition violation; CLI exit code 1."""


class SolverFailure(StateMarketError):
    """A solver could not produce a usable result; CLI exit code 2."""


class VerificationFailure(StateMarketError):
    """A produced result failed its checks beyond tolerance; CLI exit code 3."""


# --- scenario ingestion ---

class MissingColumn(ValidationError):
    pass


class NonPositiveWeight(ValidationError):
    pass


class WeightSumMismatch(ValidationError):
    pass


class NonFiniteCoordinate(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class NetworkError(ValidationError):
    pass


class MalformedResponse(ValidationError):
    pass


class MemberCountMismatch(ValidationError):
    pass


class EmptySubset(ValidationError):
    pass


# --- quantizer ---

class EmptyState(ValidationError):
    pass


class InstanceTooLarge(ValidationError):
    pass


class SExceedsSupport(ValidationError):
    pass


class DimensionNotOne(ValidationError):
    pass


class DimensionNotTwo(ValidationError):
    pass


class NonPositiveM(ValidationError):
    pass


# --- market assembly ---

class InconsistentDimensions(ValidationError):
    pass


class EmptyMarket(ValidationError):
    pass


# --- clearing ---

class TooManyBinaries(ValidationError):
    pass


class Infeasible(SolverFailure):
    pass


class NumericalFailure(SolverFailure):
    pass
