"""Exception types shared across the package."""


class MufnetError(Exception):
    """Base class for all errors raised by mufnet."""


class ShapeError(MufnetError):
    """Operands have incompatible shapes."""


class ContractError(MufnetError):
    """An operation was called outside its documented contract."""


class ConfigError(MufnetError):
    """A configuration value is out of range or inconsistent."""


class FormatError(MufnetError):
    """A binary or text artifact does not conform to its documented format.

    ``offset`` is the byte (or line) position at which parsing failed,
    when known.
    """

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class MissingIdError(MufnetError):
    """A sample id was not found in the backing provider."""


class DivergenceError(MufnetError):
    """Training produced a non-finite loss or gradient."""
