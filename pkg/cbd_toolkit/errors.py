"""Exception types raised by the library.

Every error is a ``ValueError`` so callers that only care about bad input can
catch that; the CLI maps the subclasses onto its exit codes.
"""


class CbdError(ValueError):
    """Base class for all library errors."""


class SystemValidationError(CbdError):
    """A system, design or fixture document is structurally invalid."""


class InvalidProbability(SystemValidationError):
    pass


class NonNormalized(SystemValidationError):
    pass


class NegativeMass(SystemValidationError):
    pass


class DuplicateId(SystemValidationError):
    pass


class InvalidContent(SystemValidationError):
    pass


class DuplicateContentInContext(SystemValidationError):
    pass


class UnknownContentRef(SystemValidationError):
    pass


class UnknownVariable(SystemValidationError):
    pass


class PartitionError(SystemValidationError):
    pass


class MixedOutcomeAlphabetInClass(SystemValidationError):
    pass


class AlphabetViolation(SystemValidationError):
    pass


class UnknownContext(CbdError):
    pass


class EmptyKeepSet(CbdError):
    pass


class EmptyContext(SystemValidationError):
    pass


class UnknownTag(SystemValidationError):
    pass


class MalformedProgram(CbdError):
    pass


class ShapeMismatch(CbdError):
    pass


class AlphabetMismatch(CbdError):
    pass


class NoMultiVariableClass(CbdError):
    pass


class NotABellSystem(CbdError):
    pass


class MarginalsUndefined(CbdError):
    """CH/Fine marginals p_i. and p_.j do not exist under signaling."""
