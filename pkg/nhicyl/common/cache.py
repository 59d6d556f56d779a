"""
🌀 nhicyl.common.cache

Contains resources that are used within `nhicyl` for memoizing
expensive, pure constructions (saddle spectra, local charts).
"""

import inspect
import hashlib
import logging
from functools import wraps
from cachetools import TTLCache
from typing import (
    Any,
    Callable,
    TypeVar,
)

import numpy as np


logger = logging.getLogger(__name__)

__all__ = [
    "make_hashable",
    "cached",
    "clear_cache",
    "CACHE",
    "CACHE_T",
]


# ------------------------------------------------------------------------------
# VARIABLES
# ------------------------------------------------------------------------------


CACHE_T = TypeVar("CACHE_T")
"""
Type variable for the cache.
"""


CACHE = TTLCache(maxsize=256, ttl=3600)
"""
Singleton cache instance for use within the
`nhicyl` package.
"""


# ------------------------------------------------------------------------------
# HELPERS
# ------------------------------------------------------------------------------


def make_hashable(obj: Any) -> str:
    """
    Converts an object into a stable SHA-256 hex digest.

    Arrays hash by dtype, shape and raw bytes, so two arrays with equal
    entries share a key regardless of identity.
    """
    try:
        if isinstance(obj, np.ndarray):
            arr = np.ascontiguousarray(obj)
            return hashlib.sha256(
                f"{arr.dtype}:{arr.shape}:".encode() + arr.tobytes()
            ).hexdigest()

        if isinstance(obj, (np.floating, np.integer)):
            return make_hashable(obj.item())

        if isinstance(obj, float):
            return hashlib.sha256(repr(obj).encode()).hexdigest()

        if isinstance(obj, (str, int, bool, bytes)) or obj is None:
            return hashlib.sha256(str(obj).encode()).hexdigest()

        if isinstance(obj, (tuple, list)):
            return hashlib.sha256(
                ",".join(make_hashable(x) for x in obj).encode()
            ).hexdigest()

        if isinstance(obj, dict):
            return hashlib.sha256(
                ",".join(
                    f"{k}:{make_hashable(v)}" for k, v in sorted(obj.items())
                ).encode()
            ).hexdigest()

        if hasattr(obj, "model_dump"):
            return make_hashable(obj.model_dump())

        if hasattr(obj, "__dataclass_fields__"):
            return make_hashable(
                {name: getattr(obj, name) for name in obj.__dataclass_fields__}
            )

        if callable(obj):
            return hashlib.sha256(
                f"{obj.__module__}.{obj.__qualname__}".encode()
            ).hexdigest()

        if hasattr(obj, "__dict__"):
            return make_hashable(obj.__dict__)

        return hashlib.sha256(str(obj).encode()).hexdigest()

    except Exception as e:
        logger.debug(f"Error making object hashable: {e}")
        return hashlib.sha256(str(type(obj)).encode()).hexdigest()


def cached(
    key_fn: Callable[..., str],
):
    """
    Caching decorator for pure functions.

    Entries are keyed by the function name and `key_fn(*args, **kwargs)`.
    Exceptions raised by the wrapped function propagate unchanged and are
    never cached; failures of the cache itself fall back to a direct call.
    """

    def decorator(func: Callable[..., CACHE_T]) -> Callable[..., CACHE_T]:
        sig = inspect.signature(func)

        @wraps(func)
        def wrapper(*args: Any, **kwargs: Any) -> CACHE_T:
            try:
                bound = sig.bind(*args, **kwargs)
                bound.apply_defaults()
                cache_key = f"{func.__name__}:{key_fn(*bound.args, **bound.kwargs)}"
            except Exception as e:
                logger.debug(f"Cache key for {func.__name__} failed: {e}")
                return func(*args, **kwargs)

            if cache_key in CACHE:
                logger.debug(f"Cache hit for {func.__name__}")
                return CACHE[cache_key]
            value = func(*args, **kwargs)
            try:
                CACHE[cache_key] = value
            except Exception as e:
                logger.debug(f"Could not cache {func.__name__}: {e}")
            return value

        return wrapper

    return decorator


def clear_cache() -> None:
    """Drops every memoized construction."""
    CACHE.clear()
