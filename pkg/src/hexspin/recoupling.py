"""Closed-form Kauffman-Lins recoupling primitives.

Quantum integers, loop values, theta-nets, tetrahedral nets and 6j symbols,
evaluated exactly over rationals (classical backend) or as complex doubles
at a root of unity.  Conventions are the unnormalized ones where a vertex
carries no square-root factor; they are pinned against the independent
Temperley-Lieb loop-counting oracle in the test suite.

Argument layout for the 6j symbol::

    sixj(a, b, e, c, d, f)  ==  {a b e; c d f}

re-expands an internal edge colored e joining vertices (a,b,e) and (c,d,e)
into an edge colored f joining (b,c,f) and (a,d,f).  `tet` uses the same
positional layout and is symmetric under the full tetrahedral group.
"""

from __future__ import annotations

import itertools
import json
import threading
from fractions import Fraction

from .backend import CLASSICAL, QParam, QScalar, phase, quantum_sin_ratio

__all__ = [
    "quantum_int",
    "quantum_factorial",
    "delta",
    "delta_factorial",
    "is_admissible",
    "admissible_range",
    "theta",
    "tet",
    "sixj",
    "cache_stats",
    "clear_caches",
    "save_cache",
    "load_cache",
]

# Insert-only memo tables; idempotent writes make plain dicts safe under the
# GIL for concurrent readers and writers.
_theta_cache: dict = {}
_tet_cache: dict = {}
_cache_lock = threading.Lock()


def quantum_int(n: int, p: QParam = CLASSICAL) -> QScalar:
    """Quantum integer [n]: n classically, sin(n*pi/r)/sin(pi/r) at level r."""
    if n < 0:
        raise ValueError(f"quantum_int expects n >= 0, got {n}")
    if p.is_classical:
        return Fraction(n)
    return complex(quantum_sin_ratio(n, p.r))


def quantum_factorial(n: int, p: QParam = CLASSICAL) -> QScalar:
    """[n]! = [1][2]...[n], with [0]! = 1."""
    if p.is_classical:
        out = Fraction(1)
        for k in range(2, n + 1):
            out *= k
        return out
    out = 1.0
    for k in range(1, n + 1):
        out *= quantum_sin_ratio(k, p.r)
    return complex(out)


def delta(n: int, p: QParam = CLASSICAL) -> QScalar:
    """Loop value of a single strand bundle: Delta_n = (-1)^n [n+1]."""
    if n < 0:
        raise ValueError(f"delta expects n >= 0, got {n}")
    if p.is_classical:
        return Fraction(phase(n) * (n + 1))
    return complex(phase(n) * quantum_sin_ratio(n + 1, p.r))


def delta_factorial(n: int, p: QParam = CLASSICAL) -> QScalar:
    """Delta_1 Delta_2 ... Delta_n (empty product for n <= 0)."""
    if p.is_classical:
        out = Fraction(1)
        for k in range(1, n + 1):
            out *= phase(k) * (k + 1)
        return out
    out = 1.0
    for k in range(1, n + 1):
        out *= phase(k) * quantum_sin_ratio(k + 1, p.r)
    return complex(out)


def is_admissible(a: int, b: int, c: int, p: QParam = CLASSICAL) -> bool:
    """Parity, triangle and (quantum) level gate for a trivalent vertex."""
    if a < 0 or b < 0 or c < 0:
        return False
    if (a + b + c) % 2:
        return False
    if a + b < c or b + c < a or c + a < b:
        return False
    if not p.is_classical and a + b + c > 2 * p.r - 4:
        return False
    return True


def admissible_range(a: int, b: int, p: QParam = CLASSICAL):
    """All c with (a, b, c) admissible, ascending."""
    lo, hi = abs(a - b), a + b
    if not p.is_classical:
        hi = min(hi, 2 * p.r - 4 - a - b)
    return range(lo, hi + 1, 2) if hi >= lo else range(0)


def theta(a: int, b: int, c: int, p: QParam = CLASSICAL) -> QScalar:
    """Theta-net value; zero for non-admissible triples.

    Closed form in terms of Delta-factorials with m = (a+b-c)/2,
    n = (b+c-a)/2, q = (c+a-b)/2.
    """
    if not is_admissible(a, b, c, p):
        return p.zero()
    key = (p.key, *sorted((a, b, c)))
    hit = _theta_cache.get(key)
    if hit is not None:
        return hit
    m = (a + b - c) // 2
    n = (b + c - a) // 2
    q = (c + a - b) // 2
    num = (
        delta_factorial(m + n + q, p)
        * delta_factorial(m - 1, p)
        * delta_factorial(n - 1, p)
        * delta_factorial(q - 1, p)
    )
    den = (
        delta_factorial(m + n - 1, p)
        * delta_factorial(n + q - 1, p)
        * delta_factorial(q + m - 1, p)
    )
    value = num / den
    _theta_cache[key] = value
    return value


# The four vertex triples of tet(a, b, e, c, d, f) expressed as slot indices.
_TET_TRIPLES = ((0, 1, 2), (3, 4, 2), (0, 4, 5), (1, 3, 5))

# Slot -> pair of K4 vertices; the 24 vertex permutations of the tetrahedral
# graph act on the six slots through this incidence.
_SLOT_PAIRS = {0: (0, 2), 1: (0, 3), 2: (0, 1), 3: (1, 3), 4: (1, 2), 5: (2, 3)}
_PAIR_SLOTS = {frozenset(v): k for k, v in _SLOT_PAIRS.items()}


def _tet_symmetry_maps():
    maps = []
    for perm in itertools.permutations(range(4)):
        maps.append(
            tuple(
                _PAIR_SLOTS[frozenset((perm[u], perm[v]))]
                for s, (u, v) in sorted(_SLOT_PAIRS.items())
            )
        )
    return tuple(set(maps))


_TET_MAPS = _tet_symmetry_maps()


def _tet_canonical(args):
    return min(tuple(args[i] for i in m) for m in _TET_MAPS)


def tet(a: int, b: int, c: int, d: int, e: int, f: int, p: QParam = CLASSICAL) -> QScalar:
    """Tetrahedral net with vertex triples (a,b,c), (d,e,c), (a,e,f), (b,d,f).

    Zero unless all four triples are admissible; otherwise the standard
    single-sum closed form over quantum factorials.
    """
    args = (a, b, c, d, e, f)
    for i, j, k in _TET_TRIPLES:
        if not is_admissible(args[i], args[j], args[k], p):
            return p.zero()
    key = (p.key, _tet_canonical(args))
    hit = _tet_cache.get(key)
    if hit is not None:
        return hit

    half = [(args[i] + args[j] + args[k]) // 2 for i, j, k in _TET_TRIPLES]
    total = sum(args)
    quads = [
        (total - args[0] - args[3]) // 2,  # opposite pair (a, d)
        (total - args[1] - args[4]) // 2,  # opposite pair (b, e)
        (total - args[2] - args[5]) // 2,  # opposite pair (c, f)
    ]
    lo, hi = max(half), min(quads)

    interior = p.one()
    for bq in quads:
        for av in half:
            interior *= quantum_factorial(bq - av, p)
    exterior = p.one()
    for x in args:
        exterior *= quantum_factorial(x, p)

    acc = p.zero()
    for s in range(lo, hi + 1):
        num = quantum_factorial(s + 1, p)
        if s % 2:
            num = -num
        den = p.one()
        for av in half:
            den *= quantum_factorial(s - av, p)
        for bq in quads:
            den *= quantum_factorial(bq - s, p)
        acc += num / den
    value = interior / exterior * acc
    _tet_cache[key] = value
    return value


def sixj(a: int, b: int, e: int, c: int, d: int, f: int, p: QParam = CLASSICAL) -> QScalar:
    """Recoupling coefficient {a b e; c d f} in Kauffman-Lins normalization.

    Equals tet(a,b,e,c,d,f) * Delta_f / (theta(a,d,f) * theta(b,c,f)); zero
    whenever any of the four vertex triples fails admissibility.
    """
    if not (is_admissible(a, d, f, p) and is_admissible(b, c, f, p)):
        return p.zero()
    num = tet(a, b, e, c, d, f, p)
    if p.is_classical and num == 0:
        return num
    return num * delta(f, p) / (theta(a, d, f, p) * theta(b, c, f, p))


def cache_stats() -> dict:
    return {"theta": len(_theta_cache), "tet": len(_tet_cache)}


def clear_caches() -> None:
    with _cache_lock:
        _theta_cache.clear()
        _tet_cache.clear()


_CACHE_FORMAT = "hexspin-memo-v1"


def _encode_value(v: QScalar):
    if isinstance(v, Fraction):
        return ["frac", str(v)]
    return ["cplx", complex(v).real, complex(v).imag]


def _decode_value(obj):
    if obj[0] == "frac":
        return Fraction(obj[1])
    return complex(obj[1], obj[2])


def save_cache(path) -> None:
    """Persist the memo tables as versioned JSON (exact rational strings)."""
    payload = {
        "format": _CACHE_FORMAT,
        "theta": [[list(k[0]), list(k[1:]), _encode_value(v)] for k, v in _theta_cache.items()],
        "tet": [[list(k[0]), list(k[1]), _encode_value(v)] for k, v in _tet_cache.items()],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_cache(path) -> int:
    """Reload a persisted cache; stale formats are ignored. Returns entry count."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != _CACHE_FORMAT:
        return 0
    n = 0
    for bk, rest, val in payload["theta"]:
        _theta_cache[(tuple(bk), *rest)] = _decode_value(val)
        n += 1
    for bk, args, val in payload["tet"]:
        _tet_cache[(tuple(bk), tuple(args))] = _decode_value(val)
        n += 1
    return n
