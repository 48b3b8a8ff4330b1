import logging
from functools import wraps
from typing import Type

from pydantic import ValidationError

from utils.exceptions import ConfigError, ParseError, StageError

logger = logging.getLogger(__name__)

STAGE_FAILURES: tuple[Type[Exception], ...] = (
    ConfigError,
    ParseError,
    ValidationError,
    FileNotFoundError,
    KeyError,
    ValueError,
)


def stage(
    name: str,
    exceptions: tuple[Type[Exception], ...] = STAGE_FAILURES,
):
    """
    A decorator that names a harness stage for error reporting.

    :param name: Stage name reported when the stage fails.
    :param exceptions: Exception types that are converted into StageError.
    """

    def decorator(func):
        @wraps(func)
        def wrapper(*args, **kwargs):
            try:
                return func(*args, **kwargs)
            except StageError:
                raise
            except exceptions as e:
                logger.error("Stage %s failed: %s", name, e)
                raise StageError(name, e) from e

        return wrapper

    return decorator
