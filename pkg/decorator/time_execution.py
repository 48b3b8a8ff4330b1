import logging
import time
from functools import wraps

logger = logging.getLogger(__name__)


def time_execution(func):
    """
    A decorator that measures and logs the wall time of a function.

    :param func: The function whose execution time will be measured.
    """
    @wraps(func)
    def wrapper(*args, **kwargs):
        start_time = time.perf_counter()
        result = func(*args, **kwargs)
        execution_time = time.perf_counter() - start_time
        logger.info("Function '%s' executed in %.4f seconds.", func.__name__, execution_time)
        return result
    return wrapper
