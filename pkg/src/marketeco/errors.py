"""Exception hierarchy shared by all marketeco modules."""


class MarketEcoError(Exception):
    """Base class for all data and numeric errors raised by this package."""


# -- data ingestion -----------------------------------------------------------

class MalformedRow(MarketEcoError):
    """A snapshot row could not be parsed (bad date or number)."""


class DuplicateKey(MarketEcoError):
    """Two rows share the same (date, asset_id) after normalization."""


class NonUniformGrid(MarketEcoError):
    """Snapshot dates cannot be reduced to a uniform 7-day grid."""


class EmptyPanel(MarketEcoError):
    """Operation requires a panel with at least one week of data."""


class BadOrdering(MarketEcoError):
    """Regime dates violate the required ordering."""


class EmptyPeriod(MarketEcoError):
    """The requested period selects no data."""


class EmptySelection(MarketEcoError):
    """An asset selection came back empty."""


# -- numerics -----------------------------------------------------------------

class DomainError(MarketEcoError):
    """Argument outside the mathematical domain of the function."""


class ZeroVariance(MarketEcoError):
    """A sequence with zero variance where variation is required."""


class LengthMismatch(MarketEcoError):
    """Paired sequences have different lengths."""


class TooFewSamples(MarketEcoError):
    """Not enough observations for the requested statistic or fit."""


class TooFewLags(MarketEcoError):
    """Not enough lags for model selection."""


class NonFiniteObjective(MarketEcoError):
    """Objective function is not finite at the starting point."""


class MaxIterations(MarketEcoError):
    """Iterative routine exhausted its iteration budget."""


class NonPositiveSample(MarketEcoError):
    """Sample contains zero or negative values where positives are required."""


class SigmaZero(MarketEcoError):
    """Degenerate sample: log-values have zero spread."""


class FitDiverged(MarketEcoError):
    """A fit ran into a parameter boundary or a degenerate input."""


class DegenerateRange(MarketEcoError):
    """Input points do not span a usable range."""


class SeriesTooShort(MarketEcoError):
    """Time series too short for the requested lag."""


# -- simulation ---------------------------------------------------------------

class AllZeroDenominator(MarketEcoError):
    """Every growth contribution vanished; the community cannot be renormalized."""


class TargetNotReached(MarketEcoError):
    """Simulation ended before the similarity target was reached."""
