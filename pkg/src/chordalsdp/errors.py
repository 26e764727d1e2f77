"""Exception and warning types shared across the package."""


class ChordalSdpError(Exception):
    """Base class for errors raised by this package."""


class NotChordalError(ChordalSdpError):
    """A chordal graph was required but the input has a chordless cycle."""


class EmptyProblemError(ChordalSdpError):
    """Problem data has no constraints or nothing to decompose."""


class EigFailureError(ChordalSdpError):
    """The symmetric eigensolver did not converge on a cone block.

    This signals numerical breakdown of the iteration; the solve aborts
    rather than continuing with an invalid projection.
    """


class FactorizationError(ChordalSdpError):
    """A cached linear-system factorization could not be computed."""


class SdpaParseError(ChordalSdpError):
    """A file in SDPA sparse format could not be parsed.

    Carries the 1-based line number at which parsing failed, when known.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InconsistentBlockError(SdpaParseError):
    """An entry's row or column index falls outside its declared block."""


class RankDeficiencyWarning(UserWarning):
    """The constraint matrix looks numerically rank deficient."""


class CompletionWarning(UserWarning):
    """A clique block missed its PSD tolerance during matrix completion.

    The completion proceeds with a pseudo-inverse; the result may not be
    positive semidefinite.
    """
