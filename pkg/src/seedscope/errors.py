"""Exception hierarchy shared by all seedscope modules.

Validation-type errors signal bad inputs or contract violations and map to
CLI exit code 2; numerical errors map to exit code 3.
"""


class SeedscopeError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(SeedscopeError):
    """Input data violates a documented contract."""


class ParseError(ValidationError):
    """A file is malformed (bad magic, bad JSON, wrong field types)."""


class VersionError(ValidationError):
    """A file declares an unsupported format version."""


class TruncationError(ParseError):
    """A tensor payload is shorter than its header implies."""


class MissingCellError(ValidationError):
    """A (seed, prompt) grid is incomplete."""


class MissingScoreError(ValidationError):
    """An image lacks a required metric score."""


class SeedSetMismatchError(ValidationError):
    """Two rankings or feature sets cover different seed universes."""


class EmptySplitError(ValidationError):
    """A train/test prompt split is empty or overlapping."""


class DegenerateChannelError(ValidationError):
    """A feature-map channel is identically zero under the raise policy."""


class DimensionError(ValidationError):
    """A requested dimensionality is out of range for the data."""


class PerplexityError(ValidationError):
    """Perplexity outside the feasible range for the sample count."""


class SampleSizeError(ValidationError):
    """Too few samples for the requested statistic."""


class CountError(ValidationError):
    """A requested selection count is out of range."""


class NoUsablePromptsError(ValidationError):
    """No prompt has enough usable feature vectors for a similarity score."""


class ShapeMismatchError(ValidationError):
    """Two arrays that must share a shape do not."""


class EmptyMaskError(ValidationError):
    """An inpainting mask contains no pixels."""


class NumericalError(SeedscopeError):
    """A numerical tolerance was exceeded (e.g. matrix not PSD enough)."""


class DimensionMismatchError(NumericalError):
    """Gaussian statistics with different dimensionality."""


class ScheduleError(NumericalError):
    """A diffusion schedule produced an invalid step coefficient."""


class ConvergenceWarning(UserWarning):
    """An iterative optimizer stopped while still making progress."""
