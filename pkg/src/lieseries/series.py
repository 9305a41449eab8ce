"""
Dense algebra of homogeneous polynomials and Fourier blocks.

A homogeneous polynomial of degree ``s`` in ``n`` variables is a flat array
of ``J(n, s)`` coefficients; the coefficient of ``x**k`` sits at offset
``index_poly(k) - N(n, s - 1)``.  A truncated Fourier expansion is a flat
array of ``N(n, K)`` coefficients addressed by ``index_trig``, on the basis
``cos<k, phi>`` (k even) / ``sin<k, phi>`` (k odd).

Products are scatter-adds into a dense target: the target offset of every
pair of source terms comes from a cached index map, and accumulation is a
single ``numpy.bincount``.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import DimensionError
from .indexing import (
    POLYNOMIAL,
    TRIGONOMETRIC,
    OrderTables,
    build_tables,
    iter_block,
)

__all__ = [
    "HomogeneousBlock",
    "PolynomialSeries",
    "TrigBlock",
    "add_blocks",
    "scale_block",
    "multiply_poly",
    "differentiate_poly",
    "bracket_blocks",
    "poisson_bracket",
    "multiply_trig",
    "differentiate_trig",
    "evaluate_poly",
    "evaluate_trig",
    "norm_l1",
    "dumps",
    "loads",
]

# fraction of zero source terms above which product loops skip zeros
SPARSE_THRESHOLD = 0.6
# cached index maps larger than this are rebuilt on demand instead
_MAX_CACHED_MAP = 4_000_000


# --------------------------------------------------------------------------
# layouts


@lru_cache(maxsize=None)
def tables(kind: str, n: int, s_max: int) -> OrderTables:
    return build_tables(kind, n, s_max)


@lru_cache(maxsize=None)
def _npad(kind: str, n: int, s_max: int) -> np.ndarray:
    return tables(kind, n, s_max).padded_n_array()


@lru_cache(maxsize=None)
def poly_exponents(n: int, s: int) -> np.ndarray:
    """Exponent vectors of degree ``s`` as a read-only (J, n) array, in order."""
    out = np.array(list(iter_block(POLYNOMIAL, n, s)), dtype=np.int64).reshape(-1, n)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _poly_suffix(n: int, s: int) -> np.ndarray:
    """Suffix sums S_i = k_i + ... + k_n for i = 2..n, shape (J, n - 1)."""
    e = poly_exponents(n, s)
    suf = np.cumsum(e[:, ::-1], axis=1)[:, ::-1]
    return np.ascontiguousarray(suf[:, 1:])


def _poly_offsets_from_suffix(n: int, s: int, suffix: np.ndarray) -> np.ndarray:
    # offset inside the degree-s block: sum_{i>=2} N(n - i + 1, S_i - 1)
    npad = _npad(POLYNOMIAL, n, max(s, 0))
    out = np.zeros(suffix.shape[:-1], dtype=np.int64)
    for i in range(n - 1):
        out += npad[n - 1 - i, suffix[..., i]]
    return out


def poly_offsets(n: int, exponents: np.ndarray) -> np.ndarray:
    """Block offsets of an (m, n) array of exponent vectors sharing one degree."""
    exponents = np.asarray(exponents, dtype=np.int64)
    if exponents.shape[-1] != n:
        raise DimensionError("exponent array has wrong width")
    s = int(exponents[0].sum()) if len(exponents) else 0
    suf = np.cumsum(exponents[:, ::-1], axis=1)[:, ::-1][:, 1:]
    return _poly_offsets_from_suffix(n, s, suf)


def block_size(n: int, s: int) -> int:
    if s < 0:
        return 0
    return math.comb(n + s - 1, n - 1)


def _product_map_uncached(n: int, r: int, s: int) -> np.ndarray:
    sf = _poly_suffix(n, r)
    sg = _poly_suffix(n, s)
    npad = _npad(POLYNOMIAL, n, r + s)
    out = np.zeros((len(sf), len(sg)), dtype=np.int64)
    for i in range(n - 1):
        out += npad[n - 1 - i, sf[:, i][:, None] + sg[:, i][None, :]]
    return out


@lru_cache(maxsize=1024)
def _product_map_cached(n: int, r: int, s: int) -> np.ndarray:
    out = _product_map_uncached(n, r, s)
    out.setflags(write=False)
    return out


def product_map(n: int, r: int, s: int) -> np.ndarray:
    """Target offsets in the degree r+s block for every pair of source terms."""
    if block_size(n, r) * block_size(n, s) <= _MAX_CACHED_MAP:
        return _product_map_cached(n, r, s)
    return _product_map_uncached(n, r, s)


@lru_cache(maxsize=None)
def _derivative_map(n: int, s: int, j: int):
    e = poly_exponents(n, s)
    rows = np.nonzero(e[:, j] > 0)[0]
    if s == 0 or len(rows) == 0:
        return rows, rows, np.zeros(0)
    shifted = e[rows].copy()
    shifted[:, j] -= 1
    return rows, poly_offsets(n, shifted), e[rows, j].astype(float)


def _scatter(idx: np.ndarray, w: np.ndarray, size: int) -> np.ndarray:
    idx = idx.ravel()
    w = w.ravel()
    if np.iscomplexobj(w):
        return np.bincount(idx, w.real, size) + 1j * np.bincount(idx, w.imag, size)
    return np.bincount(idx, w, size)


def _support(c: np.ndarray) -> np.ndarray | None:
    """Indices of nonzero entries when the array is sparse enough to skip zeros."""
    nz = np.flatnonzero(c)
    if len(c) and (len(c) - len(nz)) / len(c) > SPARSE_THRESHOLD:
        return nz
    return None


# --------------------------------------------------------------------------
# homogeneous polynomials


class HomogeneousBlock:
    """Homogeneous polynomial of one degree, stored as a dense coefficient array."""

    __slots__ = ("n_vars", "degree", "coeffs", "_grad")

    def __init__(self, n_vars: int, degree: int, coeffs, dtype=None):
        if n_vars < 1:
            raise DimensionError("n_vars must be >= 1")
        if degree < 0:
            raise DimensionError("degree must be >= 0")
        arr = np.array(coeffs, dtype=dtype)
        if arr.dtype.kind not in "fc":
            arr = arr.astype(float)
        if arr.shape != (block_size(n_vars, degree),):
            raise DimensionError(
                f"degree-{degree} block in {n_vars} variables needs "
                f"{block_size(n_vars, degree)} coefficients, got {arr.shape}"
            )
        arr.setflags(write=False)
        self.n_vars = n_vars
        self.degree = degree
        self.coeffs = arr
        self._grad = None

    # construction ---------------------------------------------------------

    @classmethod
    def zeros(cls, n_vars: int, degree: int, dtype=float) -> "HomogeneousBlock":
        return cls(n_vars, degree, np.zeros(block_size(n_vars, degree), dtype=dtype))

    @classmethod
    def from_terms(
        cls, n_vars: int, degree: int, terms: Mapping[Sequence[int], complex], dtype=None
    ) -> "HomogeneousBlock":
        if dtype is None:
            dtype = complex if any(isinstance(c, complex) for c in terms.values()) else float
        c = np.zeros(block_size(n_vars, degree), dtype=dtype)
        if terms:
            keys = np.array([tuple(k) for k in terms], dtype=np.int64).reshape(-1, n_vars)
            if np.any(keys.sum(axis=1) != degree) or np.any(keys < 0):
                raise DimensionError(f"terms do not all have degree {degree}")
            np.add.at(c, poly_offsets(n_vars, keys), np.array(list(terms.values()), dtype=dtype))
        return cls(n_vars, degree, c)

    @classmethod
    def monomial(cls, exponents: Sequence[int], coeff=1.0) -> "HomogeneousBlock":
        exponents = tuple(exponents)
        return cls.from_terms(len(exponents), sum(exponents), {exponents: coeff})

    # inspection -----------------------------------------------------------

    @property
    def exponents(self) -> np.ndarray:
        return poly_exponents(self.n_vars, self.degree)

    @property
    def dtype(self):
        return self.coeffs.dtype

    def offset(self, k: Sequence[int]) -> int:
        k = np.asarray(k, dtype=np.int64).reshape(1, -1)
        if k.shape[1] != self.n_vars or int(k.sum()) != self.degree or (k < 0).any():
            raise DimensionError(f"{tuple(k[0])} is not a degree-{self.degree} exponent")
        return int(poly_offsets(self.n_vars, k)[0])

    def coefficient(self, k: Sequence[int]):
        return self.coeffs[self.offset(k)]

    def terms(self) -> Iterator[tuple[tuple, complex]]:
        """Nonzero (exponents, coefficient) pairs in index order."""
        e = self.exponents
        for i in np.flatnonzero(self.coeffs):
            yield tuple(int(v) for v in e[i]), self.coeffs[i].item()

    def is_zero(self) -> bool:
        return not self.coeffs.any()

    def norm_l1(self) -> float:
        return float(np.abs(self.coeffs).sum())

    @property
    def real(self) -> "HomogeneousBlock":
        return HomogeneousBlock(self.n_vars, self.degree, self.coeffs.real)

    @property
    def imag(self) -> "HomogeneousBlock":
        return HomogeneousBlock(self.n_vars, self.degree, self.coeffs.imag)

    def astype(self, dtype) -> "HomogeneousBlock":
        return HomogeneousBlock(self.n_vars, self.degree, self.coeffs.astype(dtype))

    def __repr__(self):
        nz = np.count_nonzero(self.coeffs)
        return f"HomogeneousBlock(n_vars={self.n_vars}, degree={self.degree}, nonzero={nz})"

    # algebra --------------------------------------------------------------

    def _same_shape(self, other: "HomogeneousBlock"):
        if not isinstance(other, HomogeneousBlock):
            raise TypeError("expected a HomogeneousBlock")
        if (self.n_vars, self.degree) != (other.n_vars, other.degree):
            raise DimensionError(
                f"shape mismatch: (n={self.n_vars}, s={self.degree}) vs "
                f"(n={other.n_vars}, s={other.degree})"
            )

    def __add__(self, other):
        return add_blocks(self, other)

    def __sub__(self, other):
        self._same_shape(other)
        return HomogeneousBlock(self.n_vars, self.degree, self.coeffs - other.coeffs)

    def __neg__(self):
        return HomogeneousBlock(self.n_vars, self.degree, -self.coeffs)

    def __mul__(self, other):
        if isinstance(other, HomogeneousBlock):
            return multiply_poly(self, other)
        return scale_block(self, other)

    def __rmul__(self, other):
        return scale_block(self, other)

    def derivative(self, j: int) -> "HomogeneousBlock":
        return differentiate_poly(self, j)

    def gradient_matrix(self) -> np.ndarray:
        """(n_vars, J(n, s - 1)) array; row j holds the coefficients of df/dx_j."""
        if self._grad is None:
            n, s = self.n_vars, self.degree
            g = np.zeros((n, block_size(n, s - 1)), dtype=self.dtype)
            if s > 0:
                for j in range(n):
                    rows, targets, mult = _derivative_map(n, s, j)
                    g[j, targets] = mult * self.coeffs[rows]
            g.setflags(write=False)
            self._grad = g
        return self._grad

    def evaluate(self, point):
        return evaluate_poly(self, point)


def add_blocks(f: HomogeneousBlock, g: HomogeneousBlock) -> HomogeneousBlock:
    f._same_shape(g)
    return HomogeneousBlock(f.n_vars, f.degree, f.coeffs + g.coeffs)


def scale_block(f: HomogeneousBlock, alpha) -> HomogeneousBlock:
    return HomogeneousBlock(f.n_vars, f.degree, f.coeffs * alpha)


def multiply_poly(f: HomogeneousBlock, g: HomogeneousBlock) -> HomogeneousBlock:
    """Product of homogeneous blocks of degrees r and s (degree r + s)."""
    if f.n_vars != g.n_vars:
        raise DimensionError(f"n_vars mismatch: {f.n_vars} vs {g.n_vars}")
    n, r, s = f.n_vars, f.degree, g.degree
    size = block_size(n, r + s)
    idx = product_map(n, r, s)
    a, b = f.coeffs, g.coeffs
    pa, pb = _support(a), _support(b)
    if pa is not None or pb is not None:
        pa = np.arange(len(a)) if pa is None else pa
        pb = np.arange(len(b)) if pb is None else pb
        idx = idx[np.ix_(pa, pb)]
        a, b = a[pa], b[pb]
    out = _scatter(idx, np.multiply.outer(a, b), size)
    return HomogeneousBlock(n, r + s, out)


def differentiate_poly(f: HomogeneousBlock, j: int) -> HomogeneousBlock:
    """Partial derivative with respect to variable ``j`` (0-based)."""
    if not 0 <= j < f.n_vars:
        raise DimensionError(f"variable {j} out of range for {f.n_vars} variables")
    if f.degree == 0:
        return HomogeneousBlock.zeros(f.n_vars, 0, f.dtype)
    return HomogeneousBlock(f.n_vars, f.degree - 1, f.gradient_matrix()[j])


def _symplectic_rows(grad: np.ndarray, n_dof: int) -> np.ndarray:
    # rows (dg/dy, -dg/dx) so that sum_j F[j] * G'[j] gives the bracket
    return np.concatenate([grad[n_dof:], -grad[:n_dof]])


def bracket_blocks(f: HomogeneousBlock, g: HomogeneousBlock, n_dof: int | None = None):
    """Poisson bracket of two homogeneous blocks.

    Variables are ordered (x_1..x_n, y_1..y_n) and
    {f, g} = sum_j (df/dx_j dg/dy_j - df/dy_j dg/dx_j).
    """
    if f.n_vars != g.n_vars:
        raise DimensionError(f"n_vars mismatch: {f.n_vars} vs {g.n_vars}")
    n = f.n_vars
    if n % 2:
        raise DimensionError("Poisson bracket needs an even number of variables")
    if n_dof is not None and 2 * n_dof != n:
        raise DimensionError(f"n_vars={n} does not match n_dof={n_dof}")
    n_dof = n // 2
    r, s = f.degree, g.degree
    deg = r + s - 2
    dtype = np.result_type(f.dtype, g.dtype)
    if r == 0 or s == 0 or deg < 0:
        return HomogeneousBlock.zeros(n, max(deg, 0), dtype)
    fg = f.gradient_matrix()
    gg = _symplectic_rows(g.gradient_matrix(), n_dof)
    pa = _support(np.abs(fg).sum(axis=0))
    pb = _support(np.abs(gg).sum(axis=0))
    idx = product_map(n, r - 1, s - 1)
    if pa is not None or pb is not None:
        pa = np.arange(fg.shape[1]) if pa is None else pa
        pb = np.arange(gg.shape[1]) if pb is None else pb
        idx = idx[np.ix_(pa, pb)]
        fg, gg = fg[:, pa], gg[:, pb]
    w = fg.T @ gg
    return HomogeneousBlock(n, deg, _scatter(idx, w, block_size(n, deg)))


def evaluate_poly(f, point):
    """Value of a block or series at one point."""
    point = np.asarray(point)
    if point.shape != (f.n_vars,):
        raise DimensionError(f"point must have length {f.n_vars}")
    if isinstance(f, PolynomialSeries):
        vals = [evaluate_poly(b, point) for b in f.blocks()]
        return _fsum(vals)
    terms = f.coeffs * np.prod(point[None, :] ** f.exponents, axis=1)
    return _fsum(terms)


def _fsum(values):
    values = np.asarray(values)
    if np.iscomplexobj(values):
        return complex(math.fsum(values.real), math.fsum(values.imag))
    return math.fsum(values)


def _monomial_values(points: np.ndarray, exps: np.ndarray) -> np.ndarray:
    s = int(exps.max()) if exps.size else 0
    out = None
    for v in range(points.shape[1]):
        pw = points[:, v : v + 1] ** np.arange(s + 1)
        col = pw[:, exps[:, v]]
        out = col if out is None else out * col
    return out


def evaluate_many(f, points, chunk: int = 2_000_000) -> np.ndarray:
    """Vectorized evaluation at an (m, n) array of points."""
    points = np.asarray(points)
    if points.ndim != 2 or points.shape[1] != f.n_vars:
        raise DimensionError(f"points must have shape (m, {f.n_vars})")
    blocks = f.blocks() if isinstance(f, PolynomialSeries) else [f]
    dtype = np.result_type(points.dtype, *[b.dtype for b in blocks]) if blocks else float
    out = np.zeros(len(points), dtype=dtype)
    for b in blocks:
        nz = np.flatnonzero(b.coeffs)
        if not len(nz):
            continue
        exps, c = b.exponents[nz], b.coeffs[nz]
        step = max(1, chunk // len(nz))
        for start in range(0, len(points), step):
            p = points[start : start + step]
            out[start : start + step] += _monomial_values(p, exps) @ c
    return out


def norm_l1(f) -> float:
    """Sum of absolute values of the coefficients."""
    if isinstance(f, PolynomialSeries):
        return sum(b.norm_l1() for b in f.blocks())
    return float(np.abs(f.coeffs).sum())


# --------------------------------------------------------------------------
# power series


class PolynomialSeries:
    """Truncated power series: a map degree -> HomogeneousBlock.

    Degrees that are not stored are identically zero.
    """

    def __init__(self, n_vars: int, blocks: Iterable[HomogeneousBlock] | Mapping = ()):
        self.n_vars = n_vars
        if isinstance(blocks, Mapping):
            blocks = blocks.values()
        self._blocks: dict[int, HomogeneousBlock] = {}
        for b in blocks:
            if b.n_vars != n_vars:
                raise DimensionError(f"block has {b.n_vars} variables, series has {n_vars}")
            if b.degree in self._blocks:
                self._blocks[b.degree] = self._blocks[b.degree] + b
            else:
                self._blocks[b.degree] = b

    @classmethod
    def from_terms(cls, n_vars: int, terms: Mapping[Sequence[int], complex], dtype=None):
        by_degree: dict[int, dict] = {}
        for k, c in terms.items():
            by_degree.setdefault(sum(k), {})[tuple(k)] = c
        return cls(
            n_vars,
            [HomogeneousBlock.from_terms(n_vars, s, t, dtype) for s, t in by_degree.items()],
        )

    @property
    def degrees(self) -> list[int]:
        return sorted(self._blocks)

    @property
    def s_min(self) -> int:
        return min(self._blocks) if self._blocks else 0

    @property
    def s_max(self) -> int:
        return max(self._blocks) if self._blocks else -1

    @property
    def dtype(self):
        if not self._blocks:
            return np.dtype(float)
        return np.result_type(*[b.dtype for b in self._blocks.values()])

    def blocks(self) -> list[HomogeneousBlock]:
        return [self._blocks[s] for s in self.degrees]

    def block(self, s: int) -> HomogeneousBlock:
        b = self._blocks.get(s)
        return b if b is not None else HomogeneousBlock.zeros(self.n_vars, s, self.dtype)

    def has_degree(self, s: int) -> bool:
        return s in self._blocks

    def __getitem__(self, s: int) -> HomogeneousBlock:
        return self.block(s)

    def __iter__(self):
        return iter(self.blocks())

    def __len__(self):
        return len(self._blocks)

    def __repr__(self):
        return f"PolynomialSeries(n_vars={self.n_vars}, degrees={self.degrees})"

    def terms(self):
        for b in self.blocks():
            yield from b.terms()

    def is_zero(self) -> bool:
        return all(b.is_zero() for b in self._blocks.values())

    def truncate(self, max_degree: int) -> "PolynomialSeries":
        return PolynomialSeries(self.n_vars, [b for b in self.blocks() if b.degree <= max_degree])

    def norms(self) -> dict[int, float]:
        return {s: b.norm_l1() for s, b in sorted(self._blocks.items())}

    def norm_l1(self) -> float:
        return norm_l1(self)

    @property
    def real(self) -> "PolynomialSeries":
        return PolynomialSeries(self.n_vars, [b.real for b in self.blocks()])

    @property
    def imag(self) -> "PolynomialSeries":
        return PolynomialSeries(self.n_vars, [b.imag for b in self.blocks()])

    def astype(self, dtype) -> "PolynomialSeries":
        return PolynomialSeries(self.n_vars, [b.astype(dtype) for b in self.blocks()])

    def _check(self, other):
        if not isinstance(other, PolynomialSeries):
            raise TypeError("expected a PolynomialSeries")
        if other.n_vars != self.n_vars:
            raise DimensionError(f"n_vars mismatch: {self.n_vars} vs {other.n_vars}")

    def __add__(self, other):
        self._check(other)
        return PolynomialSeries(self.n_vars, self.blocks() + other.blocks())

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return PolynomialSeries(self.n_vars, [-b for b in self.blocks()])

    def scale(self, alpha) -> "PolynomialSeries":
        return PolynomialSeries(self.n_vars, [scale_block(b, alpha) for b in self.blocks()])

    def __mul__(self, other):
        if isinstance(other, PolynomialSeries):
            return self.multiply(other)
        return self.scale(other)

    def __rmul__(self, other):
        return self.scale(other)

    def multiply(self, other: "PolynomialSeries", max_degree: int | None = None):
        self._check(other)
        out = []
        for a in self.blocks():
            for b in other.blocks():
                if max_degree is None or a.degree + b.degree <= max_degree:
                    out.append(multiply_poly(a, b))
        return PolynomialSeries(self.n_vars, out)

    def derivative(self, j: int) -> "PolynomialSeries":
        return PolynomialSeries(
            self.n_vars, [differentiate_poly(b, j) for b in self.blocks() if b.degree > 0]
        )

    def evaluate(self, point):
        return evaluate_poly(self, point)

    def evaluate_many(self, points) -> np.ndarray:
        return evaluate_many(self, points)

    def max_abs_coeff(self) -> float:
        return max((float(np.abs(b.coeffs).max(initial=0.0)) for b in self.blocks()), default=0.0)


def poisson_bracket(
    f: PolynomialSeries, g: PolynomialSeries, n_dof: int | None = None, max_degree: int | None = None
) -> PolynomialSeries:
    """{f, g} for series in (x_1..x_n, y_1..y_n); optionally truncated by degree."""
    if isinstance(f, HomogeneousBlock):
        f = PolynomialSeries(f.n_vars, [f])
    if isinstance(g, HomogeneousBlock):
        g = PolynomialSeries(g.n_vars, [g])
    if f.n_vars != g.n_vars:
        raise DimensionError(f"n_vars mismatch: {f.n_vars} vs {g.n_vars}")
    if f.n_vars % 2 or (n_dof is not None and 2 * n_dof != f.n_vars):
        raise DimensionError("Poisson bracket needs n_vars = 2 * n_dof")
    out = []
    for a in f.blocks():
        for b in g.blocks():
            deg = a.degree + b.degree - 2
            if a.degree == 0 or b.degree == 0 or deg < 0:
                continue
            if max_degree is None or deg <= max_degree:
                out.append(bracket_blocks(a, b))
    return PolynomialSeries(f.n_vars, out)


# --------------------------------------------------------------------------
# Fourier blocks


@lru_cache(maxsize=None)
def trig_labels(n: int, K: int) -> np.ndarray:
    """Wave vectors with norm <= K as an (N(n, K), n) array, in index order."""
    rows = [k for s in range(K + 1) for k in iter_block(TRIGONOMETRIC, n, s)]
    out = np.array(rows, dtype=np.int64).reshape(-1, n)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _trig_even(n: int, K: int) -> np.ndarray:
    out = is_even(trig_labels(n, K))
    out.setflags(write=False)
    return out


def trig_size(n: int, K: int) -> int:
    return tables(TRIGONOMETRIC, n, K).size(n)


def is_even(labels: np.ndarray) -> np.ndarray:
    """Parity of an (..., n) array of wave vectors (zero counts as even)."""
    labels = np.asarray(labels)
    nonzero = labels != 0
    first = np.argmax(nonzero, axis=-1)
    lead = np.take_along_axis(labels, first[..., None], axis=-1)[..., 0]
    return lead >= 0


def trig_index(labels: np.ndarray, K: int) -> np.ndarray:
    """Vectorized ``index_trig`` for an (..., n) array of wave vectors."""
    labels = np.asarray(labels, dtype=np.int64)
    n = labels.shape[-1]
    npad = _npad(TRIGONOMETRIC, n, K)
    a = np.abs(labels)
    suf = np.cumsum(a[..., ::-1], axis=-1)[..., ::-1]
    out = np.zeros(labels.shape[:-1], dtype=np.int64)
    for i in range(n):
        m = n - i
        rest = suf[..., i + 1] if i + 1 < n else np.zeros_like(out)
        out += npad[m, suf[..., i]]
        out += npad[m - 1, rest + (labels[..., i] < 0)]
    return out


class TrigBlock:
    """Truncated Fourier expansion sum_k f_k u_k(phi) over |k| <= K."""

    __slots__ = ("n_angles", "K", "coeffs")

    def __init__(self, n_angles: int, K: int, coeffs, dtype=None):
        if n_angles < 1 or K < 0:
            raise DimensionError("need n_angles >= 1 and K >= 0")
        arr = np.array(coeffs, dtype=dtype)
        if arr.dtype.kind not in "fc":
            arr = arr.astype(float)
        size = trig_size(n_angles, K)
        if arr.shape != (size,):
            raise DimensionError(f"truncation K={K} in {n_angles} angles needs {size} coefficients")
        arr.setflags(write=False)
        self.n_angles = n_angles
        self.K = K
        self.coeffs = arr

    @classmethod
    def zeros(cls, n_angles: int, K: int, dtype=float) -> "TrigBlock":
        return cls(n_angles, K, np.zeros(trig_size(n_angles, K), dtype=dtype))

    @classmethod
    def from_terms(cls, n_angles: int, K: int, terms: Mapping[Sequence[int], complex], dtype=None):
        if dtype is None:
            dtype = complex if any(isinstance(c, complex) for c in terms.values()) else float
        c = np.zeros(trig_size(n_angles, K), dtype=dtype)
        if terms:
            keys = np.array([tuple(k) for k in terms], dtype=np.int64).reshape(-1, n_angles)
            if np.abs(keys).sum(axis=1).max() > K:
                raise DimensionError(f"wave vector beyond truncation K={K}")
            np.add.at(c, trig_index(keys, K), np.array(list(terms.values()), dtype=dtype))
        return cls(n_angles, K, c)

    @property
    def labels(self) -> np.ndarray:
        return trig_labels(self.n_angles, self.K)

    @property
    def dtype(self):
        return self.coeffs.dtype

    def coefficient(self, k: Sequence[int]):
        return self.coeffs[int(trig_index(np.asarray([k]), self.K)[0])]

    def terms(self):
        lab = self.labels
        for i in np.flatnonzero(self.coeffs):
            yield tuple(int(v) for v in lab[i]), self.coeffs[i].item()

    def norm_l1(self) -> float:
        return float(np.abs(self.coeffs).sum())

    def __add__(self, other: "TrigBlock"):
        if (self.n_angles, self.K) != (other.n_angles, other.K):
            raise DimensionError("TrigBlock shape mismatch")
        return TrigBlock(self.n_angles, self.K, self.coeffs + other.coeffs)

    def __mul__(self, other):
        if isinstance(other, TrigBlock):
            return multiply_trig(self, other)
        return TrigBlock(self.n_angles, self.K, self.coeffs * other)

    __rmul__ = __mul__

    def derivative(self, j: int) -> "TrigBlock":
        return differentiate_trig(self, j)

    def evaluate(self, angles):
        return evaluate_trig(self, angles)

    def __repr__(self):
        return f"TrigBlock(n_angles={self.n_angles}, K={self.K}, nonzero={np.count_nonzero(self.coeffs)})"


def _fold(vectors: np.ndarray, weights: np.ndarray, is_sin: bool):
    """Map cos<v>/sin<v> terms onto the u_k basis: (labels, signed weights)."""
    even = is_even(vectors)
    if not is_sin:
        # cos<v> = u_{even(v)}
        labels = np.where(even[..., None], vectors, -vectors)
        return labels, weights
    # sin<v> = u_v for odd v, -u_{-v} for even v, and 0 for v = 0
    zero = ~vectors.any(axis=-1)
    labels = np.where(even[..., None], -vectors, vectors)
    sign = np.where(even, -1.0, 1.0)
    sign[zero] = 0.0
    return labels, weights * sign


def multiply_trig(f: TrigBlock, g: TrigBlock, K: int | None = None) -> TrigBlock:
    """Product of two Fourier blocks, truncated at ``K`` (default K_f + K_g)."""
    if f.n_angles != g.n_angles:
        raise DimensionError(f"n_angles mismatch: {f.n_angles} vs {g.n_angles}")
    n = f.n_angles
    K_out = f.K + g.K if K is None else K
    pa, pb = np.flatnonzero(f.coeffs), np.flatnonzero(g.coeffs)
    dtype = np.result_type(f.dtype, g.dtype)
    out = np.zeros(trig_size(n, K_out), dtype=dtype)
    if not len(pa) or not len(pb):
        return TrigBlock(n, K_out, out)
    ka, kb = f.labels[pa], g.labels[pb]
    ea, eb = _trig_even(n, f.K)[pa], _trig_even(n, g.K)[pb]
    half = 0.5 * np.multiply.outer(f.coeffs[pa], g.coeffs[pb])
    plus = ka[:, None, :] + kb[None, :, :]
    minus = ka[:, None, :] - kb[None, :, :]
    ee = ea[:, None] & eb[None, :]
    eo = ea[:, None] & ~eb[None, :]
    oe = ~ea[:, None] & eb[None, :]
    oo = ~ea[:, None] & ~eb[None, :]
    pieces = [
        (plus[ee], half[ee], False), (minus[ee], half[ee], False),
        (plus[eo], half[eo], True), (minus[eo], -half[eo], True),
        (plus[oe], half[oe], True), (minus[oe], half[oe], True),
        (plus[oo], -half[oo], False), (minus[oo], half[oo], False),
    ]
    for vec, w, is_sin in pieces:
        if not len(w):
            continue
        lab, w = _fold(vec, w, is_sin)
        keep = np.abs(lab).sum(axis=-1) <= K_out
        out += _scatter(trig_index(lab[keep], K_out), w[keep], len(out))
    return TrigBlock(n, K_out, out)


def differentiate_trig(f: TrigBlock, j: int) -> TrigBlock:
    """d/dphi_j: every (k, f_k) maps to (-k, k_j f_k) in both parities."""
    if not 0 <= j < f.n_angles:
        raise DimensionError(f"angle {j} out of range for {f.n_angles} angles")
    lab = f.labels
    w = lab[:, j] * f.coeffs
    out = np.zeros_like(w)
    np.add.at(out, trig_index(-lab, f.K), w)
    return TrigBlock(f.n_angles, f.K, out)


def evaluate_trig(f: TrigBlock, angles):
    angles = np.asarray(angles, dtype=float)
    if angles.shape != (f.n_angles,):
        raise DimensionError(f"angles must have length {f.n_angles}")
    nz = np.flatnonzero(f.coeffs)
    lab = f.labels[nz]
    arg = lab @ angles
    basis = np.where(_trig_even(f.n_angles, f.K)[nz], np.cos(arg), np.sin(arg))
    return _fsum(f.coeffs[nz] * basis)


# --------------------------------------------------------------------------
# text serialization


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def dumps(obj) -> str:
    """Serialize a PolynomialSeries, HomogeneousBlock or TrigBlock.

    Header ``kind n s_min s_max`` then one line per nonzero coefficient:
    the n integer components, the real part and, for complex data, the
    imaginary part, each with 17 significant digits.
    """
    if isinstance(obj, HomogeneousBlock):
        obj = PolynomialSeries(obj.n_vars, [obj])
    if isinstance(obj, TrigBlock):
        header = f"trig {obj.n_angles} 0 {obj.K}"
        items = obj.terms()
        cplx = np.iscomplexobj(obj.coeffs)
    elif isinstance(obj, PolynomialSeries):
        header = f"poly {obj.n_vars} {obj.s_min} {obj.s_max}"
        items = obj.terms()
        cplx = np.iscomplexobj(np.empty(0, dtype=obj.dtype))
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")
    lines = [header]
    for k, c in items:
        parts = [str(v) for v in k]
        if cplx:
            parts += [_fmt(c.real), _fmt(c.imag)]
        else:
            parts.append(_fmt(c))
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def loads(text: str):
    """Inverse of :func:`dumps`.  Lines starting with ``#`` are ignored."""
    lines = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ValueError("empty series text")
    kind, n, s_min, s_max = lines[0][0], int(lines[0][1]), int(lines[0][2]), int(lines[0][3])
    body = lines[1:]
    cplx = any(len(ln) == n + 2 for ln in body)
    for ln in body:
        if len(ln) not in (n + 1, n + 2):
            raise ValueError(f"malformed coefficient line: {' '.join(ln)}")
    terms = {}
    for ln in body:
        k = tuple(int(v) for v in ln[:n])
        c = complex(float(ln[n]), float(ln[n + 1]) if len(ln) == n + 2 else 0.0) if cplx else float(ln[n])
        terms[k] = c
    dtype = complex if cplx else float
    if kind == "trig":
        return TrigBlock.from_terms(n, s_max, terms, dtype=dtype)
    if kind == "poly":
        by_degree: dict[int, dict] = {s: {} for s in range(s_min, s_max + 1)}
        for k, c in terms.items():
            s = sum(k)
            if s not in by_degree:
                raise ValueError(f"term {k} outside degree range [{s_min}, {s_max}]")
            by_degree[s][k] = c
        return PolynomialSeries(
            n, [HomogeneousBlock.from_terms(n, s, t, dtype=dtype) for s, t in by_degree.items()]
        )
    raise ValueError(f"unknown series kind {kind!r}")
