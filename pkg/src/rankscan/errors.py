"""Exception hierarchy shared across the package.

The three intermediate classes mirror how failures are reported to the
outside world (the command line maps them to exit codes): problems with
the data itself, problems with the requested configuration, and numerical
degeneracies discovered while computing.
"""


class RankScanError(Exception):
    """Base class for all errors raised by this package."""


class InputError(RankScanError):
    """The supplied data is malformed (exit code 1 on the command line)."""


class ConfigError(RankScanError):
    """The requested configuration is invalid (exit code 2)."""


class NumericalError(RankScanError):
    """A computation degenerated numerically (exit code 3)."""


# ---------------------------------------------------------------------------
# input data problems

class NonFiniteInput(InputError):
    """NaN or infinity found in the input."""


class DimensionMismatch(InputError):
    """Observations do not share a single representation/dimension."""


class AsymmetricInput(InputError):
    """A supplied distance matrix is not symmetric."""


class ParseError(InputError):
    """A file could not be parsed; the message carries line/column."""


class RaggedRows(InputError):
    """Rows of a table have differing lengths."""


class NonPositiveDefinite(InputError):
    """A covariance specification does not yield a positive-definite matrix."""


# ---------------------------------------------------------------------------
# configuration problems

class TooFewObservations(ConfigError):
    """The permutation-null moments need at least four observations."""


class KTooLarge(ConfigError):
    """Graph depth k is out of range for the number of observations."""


class GraphInfeasible(ConfigError):
    """No edge-disjoint spanning tree exists at some level."""


class BandwidthNonPositive(ConfigError):
    """Kernel bandwidth must be positive."""


class IndexOutOfRange(ConfigError):
    """A window endpoint is outside 0..n."""


class WindowEmpty(ConfigError):
    """The scan window contains no candidates."""


class NegativeArgument(ConfigError):
    """An argument that must be nonnegative was negative."""


class ArgumentAtPole(ConfigError):
    """Argument hit a pole of an analytic formula."""


class InvalidSampleCount(ConfigError):
    """A Monte-Carlo sample count must be at least 1."""


class ExhaustiveTooLarge(ConfigError):
    """Exhaustive enumeration requested for n > 9."""


class EnumerationTooLarge(ExhaustiveTooLarge):
    """Alias raised when a skewness table asks for enumeration at n > 9."""


class EmptyDraws(ConfigError):
    """An empirical quantile needs at least one draw."""


# ---------------------------------------------------------------------------
# numerical degeneracies

class DegenerateVariance(NumericalError):
    """A null variance fell below the degeneracy tolerance."""


class SingularCovariance(NumericalError):
    """The 2x2 null covariance is numerically singular."""


class AllCandidatesDegenerate(DegenerateVariance):
    """Every candidate in the scan window was skipped for degenerate variance."""


class QuadratureFailure(NumericalError):
    """Tail quadrature did not converge at the maximum node count."""


class BracketFailure(NumericalError):
    """Root bracketing for a critical value failed."""
