"""Exception types shared across the package."""


class RationalRecError(Exception):
    """Base class for every error raised by this package."""


class NonMemberElement(RationalRecError):
    """A scalar lies outside the carrier set of the selected semiring."""


class InvalidPath(RationalRecError):
    """A path is empty or its transitions are not pairwise adjacent."""


class OracleTooLarge(RationalRecError):
    """A brute-force enumeration would exceed its safety limits."""


class UnknownSymbol(RationalRecError):
    """An input symbol id is outside the automaton's alphabet."""


class EpsilonCycle(RationalRecError):
    """The epsilon-transition subgraph contains a cycle."""


class IndexOutOfBounds(RationalRecError):
    """A state or symbol index exceeds the declared bounds."""


class ParseError(RationalRecError):
    """Malformed textual input.  Carries the offending line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class TableShape(RationalRecError):
    """A weight table does not match the declared alphabet or dimension."""


class MissingWeight(RationalRecError):
    """A builder requires a weight that was not supplied."""


class ShapeError(RationalRecError):
    """Tensor operands have incompatible shapes."""


class NumericalError(RationalRecError):
    """A non-finite value appeared where a finite one is required."""


class NotRational(RationalRecError):
    """The requested configuration leaves the rational-recurrence class."""


class VocabTooLarge(RationalRecError):
    """The vocabulary cannot be enumerated into per-symbol tables."""


class EmptyCorpus(RationalRecError):
    """No usable tokens or instances were found in the input."""


class ConfigError(RationalRecError):
    """An invalid configuration value or key."""
