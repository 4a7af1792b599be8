"""Exception hierarchy shared across the package.

Everything raised on purpose derives from AsqpError so callers (and the CLI)
can distinguish validation failures from genuine bugs.
"""


class AsqpError(Exception):
    """Base class for all errors raised by this package."""


class EmptyInput(AsqpError):
    """Tokenization produced no tokens."""


class MisalignedSpan(AsqpError):
    """A character span does not line up with token boundaries (strict mode)."""


class ParseError(AsqpError):
    """A corpus file could not be parsed; carries the offending line number."""

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class DuplicateQuad(ParseError):
    """The same gold quadruple appears twice in one sample."""


class UnknownSentimentCode(ParseError):
    """Legacy sentiment code outside the 0/1/2 mapping."""


class BothImplicit(ParseError):
    """A quadruple with neither an aspect nor an opinion span (unsupported)."""


class ConflictingEncoding(AsqpError):
    """Two gold quadruples demand grid cells the decoder cannot disambiguate."""


class InstanceTooLarge(AsqpError):
    """Input exceeds the size cap of an exhaustive-enumeration routine."""


class ShapeMismatch(AsqpError):
    """Array shapes inconsistent with the declared dimensions."""


class NonFiniteLoss(AsqpError):
    """Loss evaluated to NaN or infinity."""


class NonFiniteGradient(AsqpError):
    """A gradient evaluated to NaN or infinity."""


class DivergedLoss(AsqpError):
    """Training loss became non-finite."""


class VocabMismatch(AsqpError):
    """Checkpoint and corpus disagree on the category vocabulary."""


class CheckpointError(AsqpError):
    """Malformed or incompatible checkpoint / embedding file."""


class MissingEmbedding(AsqpError):
    """The embedding file has no block for the requested sentence."""


class AlignmentError(AsqpError):
    """Embedding block token count disagrees with the sentence."""


class UnsupportedSchema(AsqpError):
    """Operation not defined for the requested tag-schema variant."""


class MisalignmentWarning(UserWarning):
    """Lenient span alignment snapped a character range outward."""
