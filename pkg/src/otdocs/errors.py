"""Exception hierarchy for otdocs.

Every error raised by the library derives from OtdocsError so callers (CLI,
service) can map failures to a machine-readable error object uniformly.
"""


class OtdocsError(Exception):
    """Base class for all otdocs errors."""


class InputError(OtdocsError):
    """Invalid caller-supplied value (negative weight, bad flag, missing cell)."""


class DimensionMismatchError(InputError):
    """Array shapes are inconsistent with each other or with the declared sizes."""


class FormatError(InputError):
    """A file or stream does not conform to its documented format."""


class UnknownTokenError(InputError, KeyError):
    """Lookup of a token that the vocabulary does not contain."""


class EmptyDocumentError(InputError):
    """A document has no usable tokens after vocabulary/embedding filtering."""


class DegenerateVectorError(InputError):
    """An aggregated document vector cancelled to (near) zero and cannot be normalized."""


class ClassificationError(OtdocsError):
    """No usable labeled neighbors remained to vote on a prediction."""


class NumericalError(OtdocsError):
    """A numerical procedure failed (kernel underflow, solver breakdown)."""


class InternalContractError(OtdocsError):
    """An internal precondition was violated; indicates a bug, not bad input."""
