"""
Base enum shared by every enumeration in the package.

String-valued enums double as CLI choices and JSON values, integer-valued ones
(ErrorCode) as process-facing codes, so both go through `from_value()` when they
are read back from a document.
"""
from enum import Enum


class BaseEnum(Enum):
    """
    The base class for all enums in the package. Used for serialization.

    Provides a `from_value()` method to look up enum members by their value.
    """

    @classmethod
    def from_value(cls, value):
        """
        Gets the enum member using the value of the enum.

        Args:
            value: The value to look up

        Returns:
            The enum member with the matching value

        Raises:
            ValueError: If no enum member has the given value
        """
        for member in cls:
            if member.value == value:
                return member
        raise ValueError(f"{value} is not a valid value for {cls.__name__}")


class StrEnum(str, BaseEnum):
    """String-valued enum usable directly as a typer choice."""

    def __str__(self) -> str:
        return str(self.value)
