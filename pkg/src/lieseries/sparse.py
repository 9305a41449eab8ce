"""
Sparse coefficient store: a binary tree walked along the bits of the index.

Bits are consumed least significant first.  Cells are pairs of link slots
in a flat integer table (the cell with label ``2j`` owns slots ``2j`` and
``2j + 1``, for bit 0 and bit 1); unused slots hold -1.  Links at the last
level point into a flat coefficient table instead of another cell.
"""

from __future__ import annotations

from typing import Iterable

from .errors import CapacityError, RangeError

__all__ = ["SparseCoefficientTree", "create"]

UNUSED = -1


class SparseCoefficientTree:
    """Bit-path tree of ``index_length`` levels with fixed-capacity tables.

    Parameters
    ----------
    index_length : int
        Number of bits of the largest index; every path has this length.
    cell_capacity : int
        Number of link slots (two per cell).  Cell 0 is the root.
    coef_capacity : int
        Number of coefficient slots.

    Tables never grow implicitly; on :class:`CapacityError` call
    :meth:`grow_cells` or :meth:`grow_coefficients` and retry.
    """

    def __init__(self, index_length: int, cell_capacity: int, coef_capacity: int):
        if index_length < 1:
            raise ValueError("index_length must be >= 1")
        if cell_capacity < 2 or coef_capacity < 1:
            raise ValueError("capacities must be positive (cells need at least the root)")
        self.index_length = index_length
        self.cells = [UNUSED] * (cell_capacity + cell_capacity % 2)
        self.coefficients = [0.0] * coef_capacity
        self.fp = 2
        self.fc = 0

    # inspection -------------------------------------------------------------

    def cell(self, label: int, bit: int) -> int:
        """Link stored in cell ``label`` for bit ``bit``."""
        if label % 2:
            raise ValueError("cell labels are even")
        return self.cells[label + bit]

    def coef(self, j: int):
        return self.coefficients[j]

    @property
    def n_cells(self) -> int:
        return self.fp // 2

    def __len__(self) -> int:
        return self.fc

    def _check_index(self, index: int):
        if not 0 <= index < (1 << self.index_length):
            raise RangeError(f"index {index} needs more than {self.index_length} bits")

    def _walk(self, index: int) -> tuple[int, int, int]:
        """Follow the path of ``index``.

        Returns ``(depth, cell, link)``: ``depth`` is the level where the walk
        stopped (``index_length`` when the leaf exists), ``cell`` the last
        cell visited, ``link`` the coefficient slot or -1.
        """
        cc = 0
        last = self.index_length - 1
        for cb in range(self.index_length):
            nxt = self.cells[cc + ((index >> cb) & 1)]
            if nxt == UNUSED:
                return cb, cc, UNUSED
            if cb == last:
                return self.index_length, cc, nxt
            cc = nxt
        raise AssertionError("unreachable")

    # operations -------------------------------------------------------------

    def retrieve(self, index: int):
        """Stored coefficient, or 0 when the path is incomplete."""
        self._check_index(index)
        depth, _, link = self._walk(index)
        if depth < self.index_length:
            return 0.0
        return self.coefficients[link]

    def contains(self, index: int) -> bool:
        self._check_index(index)
        return self._walk(index)[0] == self.index_length

    def store(self, index: int, value) -> None:
        """Write ``value`` at ``index``, creating the missing part of the path."""
        self._check_index(index)
        depth, cc, link = self._walk(index)
        if depth == self.index_length:
            self.coefficients[link] = value
            return
        new_cells = self.index_length - 1 - depth
        if self.fp + 2 * new_cells > len(self.cells):
            raise CapacityError(
                f"cell table full: need {new_cells} more cells, fp={self.fp}, "
                f"capacity={len(self.cells)}"
            )
        if self.fc >= len(self.coefficients):
            raise CapacityError(f"coefficient table full (capacity={len(self.coefficients)})")
        for cb in range(depth, self.index_length - 1):
            self.cells[cc + ((index >> cb) & 1)] = self.fp
            cc = self.fp
            self.fp += 2
        self.cells[cc + ((index >> (self.index_length - 1)) & 1)] = self.fc
        self.coefficients[self.fc] = value
        self.fc += 1

    def add_to(self, index: int, delta) -> None:
        """Add ``delta`` to the coefficient; a missing one is stored as ``delta``."""
        self._check_index(index)
        depth, _, link = self._walk(index)
        if depth == self.index_length:
            self.coefficients[link] += delta
        else:
            self.store(index, delta)

    def scale_at(self, index: int, factor) -> None:
        """Multiply an existing coefficient; no-op when absent."""
        self._check_index(index)
        depth, _, link = self._walk(index)
        if depth == self.index_length:
            self.coefficients[link] *= factor

    def to_pairs(self) -> list[tuple[int, float]]:
        """All defined leaves as (index, coefficient), ascending by index."""
        out = []
        stack = [(0, 0, 0)]  # (cell, depth, partial index)
        last = self.index_length - 1
        while stack:
            cc, depth, partial = stack.pop()
            for bit in (0, 1):
                link = self.cells[cc + bit]
                if link == UNUSED:
                    continue
                idx = partial | (bit << depth)
                if depth == last:
                    out.append((idx, self.coefficients[link]))
                else:
                    stack.append((link, depth + 1, idx))
        out.sort()
        return out

    # capacity ---------------------------------------------------------------

    def grow_cells(self) -> None:
        self.cells.extend([UNUSED] * len(self.cells))

    def grow_coefficients(self) -> None:
        self.coefficients.extend([0.0] * len(self.coefficients))

    # construction / serialization -------------------------------------------

    @classmethod
    def from_pairs(cls, index_length: int, pairs: Iterable[tuple[int, float]]):
        pairs = list(pairs)
        n = max(len(pairs), 1)
        tree = cls(index_length, 2 + 2 * index_length * n, n)
        for idx, value in pairs:
            tree.store(idx, value)
        return tree

    def dumps(self) -> str:
        """Header ``sparse <index_length> <count>`` then ``index coefficient`` lines."""
        pairs = self.to_pairs()
        lines = [f"sparse {self.index_length} {len(pairs)}"]
        for idx, c in pairs:
            if isinstance(c, complex):
                lines.append(f"{idx} {format(c.real, '.17g')} {format(c.imag, '.17g')}")
            else:
                lines.append(f"{idx} {format(float(c), '.17g')}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "SparseCoefficientTree":
        rows = [ln.split() for ln in text.splitlines() if ln.strip()]
        kind, length, count = rows[0][0], int(rows[0][1]), int(rows[0][2])
        if kind != "sparse":
            raise ValueError(f"not a sparse pair list: header {rows[0]}")
        body = rows[1:]
        if len(body) != count:
            raise ValueError(f"header announces {count} pairs, found {len(body)}")
        pairs = []
        for r in body:
            value = complex(float(r[1]), float(r[2])) if len(r) == 3 else float(r[1])
            pairs.append((int(r[0]), value))
        return cls.from_pairs(length, pairs)

    def __repr__(self):
        return (
            f"SparseCoefficientTree(index_length={self.index_length}, "
            f"fp={self.fp}, fc={self.fc})"
        )


def create(index_length: int, cell_capacity: int, coef_capacity: int) -> SparseCoefficientTree:
    return SparseCoefficientTree(index_length, cell_capacity, coef_capacity)
