from app.utils.logger import logger
from app.utils.errors import (
    SparsityError,
    CapExceededError,
    DomainError,
    NotInRangeError,
    MatrixFormatError,
)

__all__ = [
    "logger",
    "SparsityError",
    "CapExceededError",
    "DomainError",
    "NotInRangeError",
    "MatrixFormatError",
]
