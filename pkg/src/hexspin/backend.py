"""Value backends for spin-network evaluations.

Two backends share every closed-form formula in this package:

* classical -- arbitrary-precision rationals (`fractions.Fraction`), the
  q = -1 point where the quantum integer [n] degenerates to n.  All
  arithmetic is exact; no rounding ever happens on this path.
* root of unity -- level r >= 3, where [n] = sin(n*pi/r)/sin(pi/r).  Values
  are complex doubles and equality is tolerance based.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

QScalar = Union[Fraction, complex]

DEFAULT_TOLERANCE = 1e-9


@dataclass(frozen=True)
class QParam:
    """Evaluation backend: classical (r is None) or root of unity of level r."""

    r: int | None = None
    tolerance: float = DEFAULT_TOLERANCE

    def __post_init__(self):
        if self.r is not None and self.r < 3:
            raise ValueError(f"root-of-unity level must be >= 3, got {self.r}")

    @property
    def is_classical(self) -> bool:
        return self.r is None

    @property
    def key(self):
        """Hashable backend identity used for memoization (tolerance excluded)."""
        return ("classical",) if self.r is None else ("q", self.r)

    def max_color(self) -> int | None:
        """Largest admissible single color, or None when unbounded."""
        return None if self.r is None else self.r - 2

    def zero(self) -> QScalar:
        return Fraction(0) if self.is_classical else complex(0.0)

    def one(self) -> QScalar:
        return Fraction(1) if self.is_classical else complex(1.0)

    def loop_value(self) -> QScalar:
        """Value of a single unlabeled loop: d = -2 classically, -2cos(pi/r) at level r."""
        if self.is_classical:
            return Fraction(-2)
        return complex(-2.0 * math.cos(math.pi / self.r))

    def describe(self) -> str:
        return "classical" if self.is_classical else f"root-of-unity r={self.r}"


CLASSICAL = QParam()


def root_of_unity(r: int, tolerance: float = DEFAULT_TOLERANCE) -> QParam:
    return QParam(r=r, tolerance=tolerance)


def parse_backend(text: str) -> QParam:
    """Parse CLI-style backend spec: 'classical' or 'q:<r>'."""
    text = text.strip().lower()
    if text in ("classical", "c", "q-1"):
        return CLASSICAL
    if text.startswith("q:"):
        return root_of_unity(int(text[2:]))
    raise ValueError(f"unrecognized backend {text!r} (expected 'classical' or 'q:<r>')")


def is_zero(x: QScalar, p: QParam) -> bool:
    if isinstance(x, Fraction):
        return x == 0
    return abs(x) <= p.tolerance


def scalars_equal(x: QScalar, y: QScalar, p: QParam) -> bool:
    """Exact equality classically, absolute tolerance on the quantum backend."""
    if p.is_classical:
        return x == y
    return abs(complex(x) - complex(y)) <= p.tolerance


def as_complex(x: QScalar) -> complex:
    return complex(x)


def magnitude_sq(x: QScalar):
    """|x|^2; exact rational for classical values, float otherwise."""
    if isinstance(x, Fraction):
        return x * x
    z = complex(x)
    return z.real * z.real + z.imag * z.imag


def conjugate(x: QScalar) -> QScalar:
    if isinstance(x, Fraction):
        return x
    return complex(x).conjugate()


def format_scalar(x: QScalar) -> str:
    """Render a value for reports: 'num/den' exactly, or '[re, im]' for complex."""
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}" if x.denominator != 1 else str(x.numerator)
    z = complex(x)
    return f"[{z.real!r}, {z.imag!r}]"


def parse_scalar(text: str) -> QScalar:
    text = text.strip()
    if text.startswith("["):
        re_s, im_s = text[1:-1].split(",")
        return complex(float(re_s), float(im_s))
    return Fraction(text)


def quantum_sin_ratio(n: int, r: int) -> float:
    """sin(n*pi/r)/sin(pi/r), the root-of-unity quantum integer."""
    return math.sin(n * math.pi / r) / math.sin(math.pi / r)


def phase(n: int) -> int:
    """(-1)**n without float round-trips."""
    return -1 if n & 1 else 1


def _checked_nonnegative(n: int, what: str) -> int:
    if not isinstance(n, int) or isinstance(n, bool) or n < 0:
        raise ValueError(f"{what} must be a nonnegative integer, got {n!r}")
    return n


def check_color(value: int, p: QParam = CLASSICAL) -> int:
    """Validate a spin color (strand count) against the backend level bound."""
    _checked_nonnegative(value, "spin color")
    bound = p.max_color()
    if bound is not None and value > bound:
        raise ValueError(f"spin color {value} exceeds level bound r-2 = {bound}")
    return value
