"""
Utility helpers: shared console, array coercion and formatting.
"""

from collections.abc import Sequence
from typing import Any

import numpy as np
from rich.console import Console

from quantcoop.models import DimensionError

console = Console()
err_console = Console(stderr=True)


def as_matrix(values: Any, name: str = "matrix", *, allow_complex: bool = False) -> np.ndarray:
    """Coerce nested sequences into a finite 2-D float (or complex) array.

    Examples
    --------
    >>> as_matrix([[1, 0], [0, 1]]).shape
    (2, 2)
    >>> as_matrix([1.0, 2.0], "B").shape
    (2, 1)
    """
    dtype = complex if allow_complex and np.iscomplexobj(values) else float
    try:
        arr = np.array(values, dtype=dtype)
    except (TypeError, ValueError) as exc:
        raise DimensionError(f"{name}: not a numeric array ({exc})") from exc
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise DimensionError(f"{name}: expected a matrix, got {arr.ndim} dimensions")
    if arr.size and not np.all(np.isfinite(arr)):
        raise DimensionError(f"{name}: entries must be finite")
    return arr


def format_complex(value: complex, digits: int = 6) -> str:
    """Render a complex number compactly, dropping a negligible imaginary part.

    Examples
    --------
    >>> format_complex(1 + 0j)
    '1'
    >>> format_complex(0.5 - 0.25j)
    '0.5-0.25j'
    """
    re, im = float(np.real(value)), float(np.imag(value))
    if abs(im) <= 1e-12 * max(1.0, abs(re)):
        return f"{re:.{digits}g}"
    sign = "+" if im >= 0 else "-"
    return f"{re:.{digits}g}{sign}{abs(im):.{digits}g}j"


def format_vector(values: Sequence[float] | np.ndarray, digits: int = 6) -> str:
    """Render a short real vector as ``(a, b, ...)``."""
    return "(" + ", ".join(f"{float(v):.{digits}g}" for v in np.ravel(values)) + ")"
