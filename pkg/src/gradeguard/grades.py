"""The grade lattice: values in [0, 5] at 0.5-point steps.

Every grade that crosses a module boundary (corpus truth, parsed reply,
predicted grade, human review grade) lives on this lattice; the helpers here
are the single place where clamping, quantization, and validation happen.
"""

from __future__ import annotations

import math

GRADE_MIN = 0.0
GRADE_MAX = 5.0
GRADE_STEP = 0.5

# The 11 admissible values 0.0, 0.5, ..., 5.0.
LATTICE = tuple(i * GRADE_STEP for i in range(int(GRADE_MAX / GRADE_STEP) + 1))


def clamp(value: float, lo: float = GRADE_MIN, hi: float = GRADE_MAX) -> float:
    return min(hi, max(lo, value))


def quantize_half(value: float) -> float:
    """Round to the nearest 0.5, ties rounding up."""
    return math.floor(2.0 * value + 0.5) / 2.0


def is_on_lattice(value: float, tol: float = 1e-9) -> bool:
    """True when value is a 0.5 multiple inside [0, 5]."""
    if not (GRADE_MIN - tol <= value <= GRADE_MAX + tol):
        return False
    return abs(value * 2.0 - round(value * 2.0)) <= tol


def snap(value: float) -> float:
    """Clamp into range then quantize onto the lattice."""
    return quantize_half(clamp(value))
