"""
Graded orderings on multi-indices and the associated indexing functions.

Two families are supported:

* ``polynomial``: exponent vectors k in Z^n_+, graded by |k| = sum(k);
* ``trigonometric``: wave vectors k in Z^n, graded by |k| = sum(|k_j|).

Inside a grade the polynomial order puts larger first components first
and then recurses on the tail ``(k_2, ..., k_n)``.  The trigonometric
order first prefers larger ``|k_1|``, then the positive sign, then
recurses.  For n = 1 the trigonometric order is 0, 1, -1, 2, -2, ...

The index of k is the number of vectors preceding it.  It is computed from
the J-table (number of vectors of norm exactly s) and the N-table (number
of vectors of norm at most s), which are built once by :func:`build_tables`
and passed explicitly to every operation.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import CapacityError, DimensionError, RangeError

__all__ = [
    "ExponentVector",
    "WaveVector",
    "OrderTables",
    "POLYNOMIAL",
    "TRIGONOMETRIC",
    "compare_poly",
    "compare_trig",
    "build_tables",
    "index_poly",
    "unindex_poly",
    "index_trig",
    "unindex_trig",
    "next_poly",
    "next_trig",
    "block_bounds",
    "iter_block",
]

POLYNOMIAL = "polynomial"
TRIGONOMETRIC = "trigonometric"
_KIND_ALIASES = {
    "poly": POLYNOMIAL,
    "polynomial": POLYNOMIAL,
    "trig": TRIGONOMETRIC,
    "trigonometric": TRIGONOMETRIC,
}
INT64_MAX = 2**63 - 1


def _kind(kind: str) -> str:
    try:
        return _KIND_ALIASES[kind]
    except KeyError:
        raise ValueError(f"unknown ordering kind {kind!r}") from None


class ExponentVector(tuple):
    """Exponents of a monomial: a tuple of non-negative integers."""

    def __new__(cls, components: Sequence[int]):
        comps = tuple(int(c) for c in components)
        if not comps:
            raise DimensionError("exponent vector must have at least one component")
        if any(c < 0 for c in comps):
            raise ValueError(f"negative exponent in {comps}")
        return super().__new__(cls, comps)

    @property
    def norm(self) -> int:
        return sum(self)

    @property
    def tail(self) -> "ExponentVector":
        if len(self) < 2:
            raise DimensionError("tail is defined only for n > 1")
        return ExponentVector(self[1:])


class WaveVector(tuple):
    """Integer wave vector labelling a Fourier basis function."""

    def __new__(cls, components: Sequence[int]):
        comps = tuple(int(c) for c in components)
        if not comps:
            raise DimensionError("wave vector must have at least one component")
        return super().__new__(cls, comps)

    @property
    def norm(self) -> int:
        return sum(abs(c) for c in self)

    @property
    def tail(self) -> "WaveVector":
        if len(self) < 2:
            raise DimensionError("tail is defined only for n > 1")
        return WaveVector(self[1:])

    @property
    def is_even(self) -> bool:
        """True when the first nonzero component is positive, or k = 0."""
        for c in self:
            if c:
                return c > 0
        return True

    @property
    def parity(self) -> str:
        return "even" if self.is_even else "odd"

    def __neg__(self) -> "WaveVector":
        return WaveVector(-c for c in self)


# --------------------------------------------------------------------------
# orderings


def _check_lengths(k, k2):
    if len(k) != len(k2):
        raise DimensionError(f"length mismatch: {len(k)} vs {len(k2)}")


def _sign(a: int) -> int:
    return (a > 0) - (a < 0)


def compare_poly(k: Sequence[int], k2: Sequence[int]) -> int:
    """Compare two exponent vectors.

    Returns -1 if ``k`` precedes ``k2``, 0 if equal and 1 if it follows.
    Usable with :func:`functools.cmp_to_key`.
    """
    _check_lengths(k, k2)
    k, k2 = tuple(k), tuple(k2)
    while True:
        s, s2 = sum(k), sum(k2)
        if s != s2:
            return _sign(s - s2)
        if len(k) == 1:
            return 0
        if k[0] != k2[0]:
            # larger first component precedes
            return _sign(k2[0] - k[0])
        k, k2 = k[1:], k2[1:]


def compare_trig(k: Sequence[int], k2: Sequence[int]) -> int:
    """Compare two wave vectors; same return convention as :func:`compare_poly`."""
    _check_lengths(k, k2)
    k, k2 = tuple(k), tuple(k2)
    while True:
        s = sum(abs(c) for c in k)
        s2 = sum(abs(c) for c in k2)
        if s != s2:
            return _sign(s - s2)
        if len(k) > 1 and abs(k[0]) != abs(k2[0]):
            return _sign(abs(k2[0]) - abs(k[0]))
        if k[0] != k2[0]:
            # same modulus, the positive one precedes
            return _sign(k2[0] - k[0])
        if len(k) == 1:
            return 0
        k, k2 = k[1:], k2[1:]


# --------------------------------------------------------------------------
# tables


@dataclass(frozen=True)
class OrderTables:
    """J- and N-tables for one ordering kind.

    ``J[n][s]`` and ``N[n][s]`` are exact Python integers for
    ``1 <= n <= n_max`` and ``0 <= s <= s_max`` (row 0 is unused).
    """

    kind: str
    n_max: int
    s_max: int
    J: tuple
    N: tuple

    def j(self, n: int, s: int) -> int:
        if s < 0:
            return 0
        self._check(n, s)
        return self.J[n][s]

    def n(self, n: int, s: int) -> int:
        """N(n, s) with the convention N(n, -1) = 0."""
        if s < 0:
            return 0
        self._check(n, s)
        return self.N[n][s]

    def _check(self, n, s):
        if not 1 <= n <= self.n_max:
            raise RangeError(f"dimension {n} outside tables (n_max={self.n_max})")
        if s > self.s_max:
            raise RangeError(f"norm {s} outside tables (s_max={self.s_max})")

    def size(self, n: int) -> int:
        """Number of vectors of dimension ``n`` with norm <= s_max."""
        return self.n(n, self.s_max)

    def padded_n_array(self) -> np.ndarray:
        """int64 array ``A`` with ``A[n, s + 1] = N(n, s)`` and ``A[n, 0] = 0``.

        Row 0 holds N(0, s) = 1 for s >= 0, which makes the trigonometric
        index formula uniform down to the last component.
        """
        out = np.zeros((self.n_max + 1, self.s_max + 2), dtype=np.int64)
        out[0, 1:] = 1
        for n in range(1, self.n_max + 1):
            out[n, 1:] = self.N[n]
        return out


def build_tables(kind: str, n_max: int, s_max: int) -> OrderTables:
    """Fill the J- and N-tables by their recursions.

    Raises :class:`CapacityError` naming the first (n, s) entry that does
    not fit in a signed 64-bit integer.
    """
    kind = _kind(kind)
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if s_max < 0:
        raise ValueError("s_max must be >= 0")

    J = [[0] * (s_max + 1) for _ in range(n_max + 1)]
    N = [[0] * (s_max + 1) for _ in range(n_max + 1)]
    for s in range(s_max + 1):
        if kind == POLYNOMIAL:
            J[1][s] = 1
        else:
            J[1][s] = 1 if s == 0 else 2
    for n in range(2, n_max + 1):
        prev = J[n - 1]
        for s in range(s_max + 1):
            if kind == POLYNOMIAL:
                total = sum(prev[: s + 1])
            else:
                total = prev[s] + 2 * sum(prev[s - j] for j in range(1, s + 1))
            J[n][s] = total
    for n in range(1, n_max + 1):
        acc = 0
        for s in range(s_max + 1):
            acc += J[n][s]
            if J[n][s] > INT64_MAX or acc > INT64_MAX:
                raise CapacityError(
                    f"{kind} table entry (n={n}, s={s}) overflows 64-bit integers"
                )
            N[n][s] = acc
    return OrderTables(
        kind=kind,
        n_max=n_max,
        s_max=s_max,
        J=tuple(tuple(row) for row in J),
        N=tuple(tuple(row) for row in N),
    )


def _require(t: OrderTables, kind: str):
    if t.kind != kind:
        raise ValueError(f"expected {kind} tables, got {t.kind}")


def _check_vector(k, t: OrderTables, norm: int):
    if not 1 <= len(k) <= t.n_max:
        raise RangeError(f"dimension {len(k)} outside tables (n_max={t.n_max})")
    if norm > t.s_max:
        raise RangeError(f"norm {norm} of {tuple(k)} exceeds s_max={t.s_max}")


# --------------------------------------------------------------------------
# polynomial indexing


def index_poly(k: Sequence[int], t: OrderTables) -> int:
    """Position of ``k`` in the polynomial order.

    Iterative form of I(k) = N(n, |k| - 1) + I(t(k)), where the tail term
    vanishes when k_1 = |k|.
    """
    _require(t, POLYNOMIAL)
    k = ExponentVector(k)
    _check_vector(k, t, k.norm)
    n = len(k)
    rest = k.norm
    idx = 0
    for i in range(n):
        if rest == 0:
            break
        idx += t.n(n - i, rest - 1)
        rest -= k[i]
    return idx


def _locate_norm(t: OrderTables, n: int, l: int) -> int:
    """Smallest s with l < N(n, s)."""
    return bisect_right(t.N[n], l)


def unindex_poly(l: int, n: int, t: OrderTables) -> ExponentVector:
    """Inverse of :func:`index_poly` for vectors of dimension ``n``."""
    _require(t, POLYNOMIAL)
    if not 1 <= n <= t.n_max:
        raise RangeError(f"dimension {n} outside tables (n_max={t.n_max})")
    if not 0 <= l < t.size(n):
        raise RangeError(f"index {l} outside [0, {t.size(n)}) for n={n}")
    out = []
    m = n
    s = _locate_norm(t, m, l)
    while m > 1:
        # l is the index of the current (sub)vector of norm s
        if l == 0:
            out.extend([0] * m)
            return ExponentVector(out)
        tail_index = l - t.n(m, s - 1)
        tail_norm = _locate_norm(t, m - 1, tail_index)
        out.append(s - tail_norm)
        l, s, m = tail_index, tail_norm, m - 1
    out.append(l)
    return ExponentVector(out)


# --------------------------------------------------------------------------
# trigonometric indexing


def index_trig(k: Sequence[int], t: OrderTables) -> int:
    """Position of ``k`` in the trigonometric order (four-branch recursion)."""
    _require(t, TRIGONOMETRIC)
    k = WaveVector(k)
    _check_vector(k, t, k.norm)
    idx = 0
    n = len(k)
    for i in range(n):
        m = n - i
        norm = sum(abs(c) for c in k[i:])
        if norm == 0:
            break
        k1 = k[i]
        base = t.n(m, norm - 1)
        if abs(k1) == norm:
            idx += base + (1 if k1 < 0 else 0)
            break
        rest = norm - abs(k1)
        if k1 >= 0:
            idx += base + t.n(m - 1, rest - 1)
        else:
            idx += base + t.n(m - 1, rest)
    return idx


def unindex_trig(l: int, n: int, t: OrderTables) -> WaveVector:
    """Inverse of :func:`index_trig`.

    Branch-and-recurse procedure: locate the norm, then for every leading
    component decide between the four index branches, decreasing the
    candidate tail norm ``s1`` until one branch is consistent.
    """
    _require(t, TRIGONOMETRIC)
    if not 1 <= n <= t.n_max:
        raise RangeError(f"dimension {n} outside tables (n_max={t.n_max})")
    if not 0 <= l < t.size(n):
        raise RangeError(f"index {l} outside [0, {t.size(n)}) for n={n}")
    if l == 0:
        return WaveVector([0] * n)
    if n == 1:
        return WaveVector([(l + 1) // 2 if l % 2 else -(l // 2)])

    out: list[int] = []
    m = n
    s = _locate_norm(t, m, l)
    while True:
        l1 = l - t.n(m, s - 1)
        if l1 == 0:
            out.append(s)
            out.extend([0] * (m - 1))
            break
        if l1 == 1:
            out.append(-s)
            out.extend([0] * (m - 1))
            break
        # m > 1 here: in one dimension l1 is always 0 or 1
        s1 = min(_locate_norm(t, m - 1, l1), s)
        while True:
            if l1 >= 2 * t.n(m - 1, s1 - 1):
                out.append(s - s1)
                l, s = l1 - t.n(m - 1, s1 - 1), s1
                break
            if l1 >= t.n(m - 1, s1 - 1) + t.n(m - 1, s1 - 2):
                out.append(-s + s1 - 1)
                l, s = l1 - t.n(m - 1, s1 - 1), s1 - 1
                break
            s1 -= 1
        m -= 1
    return WaveVector(out)


# --------------------------------------------------------------------------
# successors and blocks


def next_poly(k: Sequence[int], s_max: int | None = None) -> ExponentVector:
    """Immediate successor of ``k`` in the polynomial order."""
    k = list(ExponentVector(k))
    n = len(k)
    for i in range(n - 2, -1, -1):
        if k[i] > 0:
            rest = sum(k[i + 1 :])
            k[i] -= 1
            k[i + 1 :] = [rest + 1] + [0] * (n - i - 2)
            return ExponentVector(k)
    s = k[-1] + 1
    if s_max is not None and s > s_max:
        raise RangeError(f"successor of {tuple(k)} has norm {s} > s_max={s_max}")
    return ExponentVector([s] + [0] * (n - 1))


def _next_trig_same_norm(k: tuple) -> tuple | None:
    k1 = k[0]
    if len(k) == 1:
        return (-k1,) if k1 > 0 else None
    tail = _next_trig_same_norm(k[1:])
    if tail is not None:
        return (k1,) + tail
    rest = sum(abs(c) for c in k[1:])
    if k1 > 0:
        return (-k1, rest) + (0,) * (len(k) - 2)
    if k1 < 0:
        a = -k1 - 1
        return (a, rest + 1) + (0,) * (len(k) - 2)
    return None


def next_trig(k: Sequence[int], s_max: int | None = None) -> WaveVector:
    """Immediate successor of ``k`` in the trigonometric order."""
    k = WaveVector(k)
    nxt = _next_trig_same_norm(tuple(k))
    if nxt is not None:
        return WaveVector(nxt)
    s = k.norm + 1
    if s_max is not None and s > s_max:
        raise RangeError(f"successor of {tuple(k)} has norm {s} > s_max={s_max}")
    return WaveVector((s,) + (0,) * (len(k) - 1))


def block_bounds(n: int, s: int, t: OrderTables) -> tuple[int, int]:
    """First and last index of the vectors of norm exactly ``s``."""
    if s < 0:
        raise RangeError("norm must be non-negative")
    return t.n(n, s - 1), t.n(n, s) - 1


def iter_block(kind: str, n: int, s: int) -> Iterator[tuple]:
    """Vectors of norm exactly ``s`` in increasing index order.

    Generated by successor steps; no tables are needed.
    """
    kind = _kind(kind)
    step = _next_trig_same_norm if kind == TRIGONOMETRIC else None
    k: tuple | None = (s,) + (0,) * (n - 1)
    if kind == POLYNOMIAL:
        while True:
            yield k
            if k[-1] == s:
                return
            k = tuple(next_poly(k))
    else:
        while k is not None:
            yield k
            k = step(k)
