"""Exception types shared across the package."""


class PairRankError(Exception):
    """Base class for all package errors."""


class ValidationError(PairRankError):
    """Input violates a documented precondition."""


class ParseError(ValidationError):
    """A dataset file could not be parsed; carries the offending line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class RankDeficiencyError(PairRankError):
    """Information matrix is singular; carries the number of missing directions."""

    def __init__(self, deficiency: int):
        super().__init__(f"information matrix is rank deficient in {deficiency} direction(s)")
        self.deficiency = deficiency


class NoEligiblePairsError(PairRankError):
    """A selector was asked to choose from an empty eligible-pair set."""


class PairExhaustedError(PairRankError):
    """A replay pool has no annotations left for the queried pair."""


class TieError(PairRankError):
    """Two items have exactly equal true comparison probability."""


class AlignmentError(PairRankError):
    """Trajectories being aggregated do not share a common step grid."""


class ConflictError(PairRankError):
    """An answer was submitted for a pair that is not the pending query."""


class UnknownSessionError(PairRankError):
    """No session with the given id exists."""
