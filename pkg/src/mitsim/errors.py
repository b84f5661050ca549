"""Exception types shared across the simulator."""


class ValidationError(ValueError):
    """A scenario or network description violates a structural constraint.

    The message always names the offending identifier.
    """


class CodecError(ValueError):
    """A byte stream could not be decoded as a warning message.

    Carries the byte offset at which decoding failed.
    """

    def __init__(self, message: str, position: int):
        super().__init__(f"error at byte {position}: {message}")
        self.position = position


class InfeasibleError(RuntimeError):
    """A requested adaptation cannot be realized on the current network."""
