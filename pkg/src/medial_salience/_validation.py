"""Input checking shared by the functional API and the estimators."""

import numbers

import numpy as np

from .exceptions import ImageDimensionError, ParameterError

MAX_AOF = 2.0 / np.pi


def check_mask(mask, name="mask"):
    """Return ``mask`` as a C-contiguous 2-D boolean array of at least 3x3."""
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise ImageDimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 3 or arr.shape[1] < 3:
        raise ImageDimensionError(f"{name} must be at least 3x3, got {arr.shape[1]}x{arr.shape[0]}")
    if arr.dtype != np.bool_:
        arr = arr != 0
    return np.ascontiguousarray(arr)


def check_scalar(value, name, *, low=None, high=None, include_low=True,
                 include_high=True, integer=False):
    """Range-check a scalar parameter, raising :class:`ParameterError`."""
    kind = numbers.Integral if integer else numbers.Real
    if isinstance(value, bool) or not isinstance(value, kind):
        raise ParameterError(f"{name} must be {'an integer' if integer else 'a number'}, got {value!r}")
    if low is not None and (value < low or (value == low and not include_low)):
        raise ParameterError(f"{name}={value} is below the admissible range")
    if high is not None and (value > high or (value == high and not include_high)):
        raise ParameterError(f"{name}={value} is above the admissible range")
    return value


def check_tau(tau):
    return check_scalar(tau, "tau", low=0.0, high=MAX_AOF + 1e-12, include_low=False)


def check_unit_interval(values, name="values"):
    arr = np.asarray(values, dtype=np.float64)
    finite = arr[np.isfinite(arr)]
    if finite.size and (finite.min() < 0.0 or finite.max() > 1.0):
        raise ParameterError(f"{name} must lie in [0, 1]")
    return arr
