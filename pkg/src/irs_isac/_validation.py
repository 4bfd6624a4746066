"""Input validation helpers in the spirit of ``sklearn.utils.validation``."""
import numbers

import numpy as np


class ValidationError(ValueError):
    """Invalid user input; message names the offending field."""


def check_positive(value, name, strict=True):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ValidationError(f"{name} must be a finite real number, got {value!r}")
    if value < 0 or (strict and value == 0):
        raise ValidationError(f"{name} must be {'>' if strict else '>='} 0, got {value!r}")
    return float(value)


def check_count(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < minimum:
        raise ValidationError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_complex_array(a, name, shape=None):
    """Return ``a`` as a finite complex ndarray, optionally checking its shape."""
    arr = np.asarray(a, dtype=complex)
    if shape is not None:
        shape = tuple(shape)
        if arr.shape != shape:
            raise ValidationError(f"{name} has shape {arr.shape}, expected {shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} has non-finite entries")
    return arr


def check_receiver_type(rx):
    value = str(rx).upper()
    if value not in ("I", "II"):
        raise ValidationError(f"receiver_type must be 'I' or 'II', got {rx!r}")
    return value


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def dbm_to_watts(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)
