"""Exception hierarchy.

Every error carries a stable ``code`` (the class name) so the CLI can emit a
one-line, machine-parsable failure message.
"""


class RsmError(Exception):
    """Base class for all errors raised by rsmatch."""

    @property
    def code(self):
        return type(self).__name__


# gallery construction
class EmptyGallery(RsmError, ValueError):
    pass


class MixedPayloadKinds(RsmError, ValueError):
    pass


class DimensionMismatch(RsmError, ValueError):
    pass


class NonFiniteValue(RsmError, ValueError):
    pass


class ZeroVector(RsmError, ValueError):
    pass


class IndexOutOfRange(RsmError, IndexError):
    pass


# kernels
class NotNormalized(RsmError, ValueError):
    pass


class LengthMismatch(RsmError, ValueError):
    pass


class IncompatibleMetric(RsmError, ValueError):
    pass


# rsm
class InsufficientReferences(RsmError, ValueError):
    def __init__(self, available, required):
        self.available = available
        self.required = required
        super().__init__(
            f"only {available} candidate references available, {required} required"
        )


class EmptyReferences(RsmError, ValueError):
    pass


class InvalidPair(RsmError, ValueError):
    """A pair with i == j, which has no defined RSM score."""


# evaluation
class MissingSessionTags(RsmError, ValueError):
    pass


class EmptyScores(RsmError, ValueError):
    pass


class OutOfRangeScore(RsmError, ValueError):
    pass


class PairSequenceMismatch(RsmError, ValueError):
    pass


# synth
class InvalidSpec(RsmError, ValueError):
    pass


class SingleClass(RsmError, ValueError):
    pass


# io
class BadMagic(RsmError, ValueError):
    pass


class UnsupportedVersion(RsmError, ValueError):
    pass


class TruncatedFile(RsmError, ValueError):
    pass


class CountMismatch(RsmError, ValueError):
    pass


class MalformedRecord(RsmError, ValueError):
    """A record in an embedding file has an invalid field."""


class ParseError(RsmError, ValueError):
    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


class InvalidConfig(RsmError, ValueError):
    pass


class UsageError(RsmError, ValueError):
    pass


def with_pair_context(exc, position, pair):
    """Re-create ``exc`` with the offending pair position prepended."""
    new = type(exc).__new__(type(exc))
    new.__dict__.update(exc.__dict__)
    new.args = (f"pair #{position} {tuple(int(v) for v in pair)}: {exc}",)
    new.pair_index = position
    return new
