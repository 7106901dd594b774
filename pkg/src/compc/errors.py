"""Exception types shared across the package."""


class CompcError(Exception):
    """Base class for all package errors."""


class DivisionByZero(CompcError):
    """Inverse or division requested for the zero element."""


class DimensionMismatch(CompcError):
    """Matrix shapes incompatible for the requested operation."""


class IndivisibleSplit(CompcError):
    """Requested block count does not divide the matrix dimension."""


class DuplicatePoints(CompcError):
    """Interpolation points are not pairwise distinct."""


class ShapeMismatch(CompcError):
    """Polynomial coefficient or value shapes disagree."""


class InsufficientPoints(CompcError):
    """Too few evaluation points for the requested degree or coefficient."""


class InsufficientShares(CompcError):
    """Fewer shares supplied than the label's reconstruction threshold."""


class DecodingFailure(CompcError):
    """Received word is not within the decoder's error budget of any codeword."""


class DegreeMismatch(CompcError):
    """Polynomial degree incompatible with the requested construction."""


class InconsistentShares(CompcError):
    """Share values do not lie on a single polynomial of the declared form."""


class ParameterViolation(CompcError):
    """Protocol precondition on (N, t, m, delta) or related counts not met."""


class TooFewSurvivors(CompcError):
    """Not enough non-eliminated parties remain to finish the computation."""


class SpaceTooLarge(CompcError):
    """Randomness space exceeds the exhaustive-enumeration guard."""


class ProtocolAbort(CompcError):
    """Unrecoverable protocol failure; the reason is surfaced in the transcript."""

    def __init__(self, reason, detail=""):
        self.reason = reason
        self.detail = detail
        super().__init__(f"{reason}: {detail}" if detail else reason)
