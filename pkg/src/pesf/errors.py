"""Exception hierarchy shared by every pesf module."""


class PesfError(Exception):
    """Base class for all errors raised by this package."""


# -- PE parsing -------------------------------------------------------------

class PeFormatError(PesfError, ValueError):
    """The input is not an acceptable 32-bit PE file."""


class NotMz(PeFormatError):
    pass


class NotPe(PeFormatError):
    pass


class Truncated(PeFormatError):
    pass


class UnsupportedPe32Plus(PeFormatError):
    pass


class MalformedSectionTable(PeFormatError):
    pass


class RvaNotMapped(PesfError, LookupError):
    pass


class OffsetNotMapped(PesfError, LookupError):
    pass


# -- carrier ----------------------------------------------------------------

class InsufficientCapacity(PesfError):
    def __init__(self, needed: int, available: int):
        super().__init__(f"need {needed} bytes of slack, only {available} available")
        self.needed = needed
        self.available = available


# -- crypto -----------------------------------------------------------------

class EmptyPassword(PesfError, ValueError):
    pass


class BadKeyLength(PesfError, ValueError):
    pass


class RetractError(PesfError):
    """Extraction failed; the secret could not be recovered."""


class AuthenticationFailed(RetractError):
    """Wrong password or modified payload; the two cases are indistinguishable."""


# -- container --------------------------------------------------------------

class ContainerError(PesfError, ValueError):
    pass


class BadMagic(ContainerError):
    pass


class UnsupportedVersion(ContainerError):
    pass


class TruncatedContainer(ContainerError):
    pass


# -- stego ------------------------------------------------------------------

class NoContainerFound(RetractError):
    pass


class LengthMismatch(RetractError):
    """Cover and stego differ in size, so the stego file was resized."""


# -- corpus -----------------------------------------------------------------

class InvalidSpec(PesfError, ValueError):
    pass
