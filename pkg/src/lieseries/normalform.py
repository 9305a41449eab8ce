"""
Birkhoff normal form by Lie transform.

Hamiltonians are expanded as H = H_0 + H_1 + ... with H_s homogeneous of
degree s + 2 in the 2n canonical variables (x_1..x_n, y_1..y_n) and
H_0 = sum_j omega_j/2 (x_j^2 + y_j^2).  All normalization work happens in
the complex variables

    x_j = (xi_j + i eta_j) / sqrt(2),   y_j = i (xi_j - i eta_j) / sqrt(2),

where H_0 = i sum_j omega_j xi_j eta_j and the Lie derivative along H_0 is
diagonal on monomials.  Real-variable series are produced only at the
boundary (:func:`to_complex` / :func:`from_complex`).

The Lie transform T_chi = sum_s E_s uses E_0 = 1 and
E_s = sum_{j=1}^{s} (j/s) L_{chi_j} E_{s-j}, with L_chi f = {chi, f}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from numbers import Rational
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import AccuracyError, DimensionError, SequencingError
from .series import (
    HomogeneousBlock,
    PolynomialSeries,
    block_size,
    bracket_blocks,
    dumps,
    loads,
    poisson_bracket,
    poly_exponents,
    poly_offsets,
)

__all__ = [
    "HamiltonianExpansion",
    "GeneratingSequence",
    "NormalFormResult",
    "LieTransform",
    "ResidualReport",
    "to_complex",
    "from_complex",
    "lie_derivative_H0",
    "solve_homological",
    "compute_Q",
    "lie_transform_apply",
    "normalize",
    "first_integral",
    "bracket_residual",
    "load_model",
    "dump_model",
]

# (xi, eta) in terms of (x, y) and back, up to the factor 1/sqrt(2) per
# variable; rows are the old variables
_TO_COMPLEX = ((1, 1j), (1j, 1))
_FROM_COMPLEX = ((1, -1j), (-1j, 1))

# --------------------------------------------------------------------------
# data types


@dataclass(frozen=True)
class HamiltonianExpansion:
    """H = sum_s H_s with ``parts[s]`` homogeneous of degree s + 2."""

    n_dof: int
    omega: tuple
    parts: tuple
    basis: str = "real"
    name: str = ""

    def __post_init__(self):
        if len(self.omega) != self.n_dof:
            raise DimensionError(f"need {self.n_dof} frequencies, got {len(self.omega)}")
        if any(w == 0 for w in self.omega):
            raise ValueError("all frequencies must be nonzero")
        for s, p in enumerate(self.parts):
            if p.n_vars != 2 * self.n_dof or p.degree != s + 2:
                raise DimensionError(
                    f"part {s} must have degree {s + 2} in {2 * self.n_dof} variables"
                )

    @property
    def order(self) -> int:
        return len(self.parts) - 1

    @property
    def n_vars(self) -> int:
        return 2 * self.n_dof

    def part(self, s: int) -> HomogeneousBlock:
        if s < len(self.parts):
            return self.parts[s]
        dtype = complex if self.basis == "complex" else float
        return HomogeneousBlock.zeros(self.n_vars, s + 2, dtype)

    @property
    def series(self) -> PolynomialSeries:
        return PolynomialSeries(self.n_vars, list(self.parts))

    @classmethod
    def from_series(cls, series: PolynomialSeries, omega=None, basis="real", name=""):
        n = series.n_vars
        if n % 2:
            raise DimensionError("a Hamiltonian needs an even number of variables")
        n_dof = n // 2
        if series.s_min < 2:
            if any(not series.block(s).is_zero() for s in range(series.s_min, 2)):
                raise ValueError("expansion must start at degree 2")
        if omega is None:
            omega = _infer_omega(series.block(2), n_dof, basis)
        parts = tuple(series.block(s + 2) for s in range(max(series.s_max - 1, 1)))
        return cls(n_dof, tuple(omega), parts, basis, name)

    def with_parts(self, parts, basis=None) -> "HamiltonianExpansion":
        return HamiltonianExpansion(
            self.n_dof, self.omega, tuple(parts), basis or self.basis, self.name
        )


def _infer_omega(quad: HomogeneousBlock, n_dof: int, basis: str) -> tuple:
    n = 2 * n_dof
    expected = {}
    omega = []
    for j in range(n_dof):
        if basis == "real":
            ex = tuple(2 if v == j else 0 for v in range(n))
            w = 2 * quad.coefficient(ex).real
            expected[ex] = w / 2
            ey = tuple(2 if v == j + n_dof else 0 for v in range(n))
            expected[ey] = w / 2
        else:
            e = tuple(1 if v in (j, j + n_dof) else 0 for v in range(n))
            w = (quad.coefficient(e) / 1j).real
            expected[e] = 1j * w
        omega.append(w)
    ref = HomogeneousBlock.from_terms(n, 2, expected, dtype=quad.dtype)
    if not np.allclose(ref.coeffs, quad.coeffs, atol=1e-14, rtol=0):
        raise ValueError("quadratic part is not a sum of harmonic oscillators")
    return tuple(omega)


@dataclass
class GeneratingSequence:
    """chi_1, chi_2, ...; ``chi[s]`` has degree s + 2 (index 0 unused)."""

    n_dof: int
    chi: list = field(default_factory=lambda: [None])

    def __getitem__(self, s: int) -> HomogeneousBlock:
        if s < 1 or s >= len(self.chi):
            raise SequencingError(f"chi_{s} is not available")
        return self.chi[s]

    def __len__(self):
        return len(self.chi) - 1

    def append(self, block: HomogeneousBlock):
        s = len(self.chi)
        if block.degree != s + 2 or block.n_vars != 2 * self.n_dof:
            raise DimensionError(f"chi_{s} must have degree {s + 2}")
        self.chi.append(block)

    @property
    def series(self) -> PolynomialSeries:
        return PolynomialSeries(2 * self.n_dof, self.chi[1:])


@dataclass
class NormalFormResult:
    Z: HamiltonianExpansion
    chi: GeneratingSequence
    H: HamiltonianExpansion
    transform: "LieTransform"
    order: int
    resonance_tol: float | None
    basis: str = "complex"

    def Z_real(self) -> PolynomialSeries:
        return _real_part(from_complex(self.Z.series), "Z")

    def chi_real(self) -> PolynomialSeries:
        return _real_part(from_complex(self.chi.series), "chi")


# --------------------------------------------------------------------------
# complex variables


def _pair_table(d: int, a: int, subst) -> np.ndarray:
    """Coefficients of (al u + be v)^a (ga u + de v)^(d-a) on v^c, c = 0..d.

    With unit substitution entries these are Gaussian integers, so the
    composed matrix is exact and the 2^(-d/2) scale is applied once.
    """
    (al, be), (ga, de) = subst
    p = np.array([math.comb(a, c) * al ** (a - c) * be**c for c in range(a + 1)], dtype=complex)
    b = d - a
    q = np.array([math.comb(b, c) * ga ** (b - c) * de**c for c in range(b + 1)], dtype=complex)
    return np.convolve(p, q)


@lru_cache(maxsize=None)
def _substitution_matrix(n_dof: int, s: int, direction: str) -> sp.csr_matrix:
    subst = _TO_COMPLEX if direction == "to" else _FROM_COMPLEX
    n = 2 * n_dof
    e = poly_exponents(n, s)
    size = len(e)
    total = sp.identity(size, dtype=complex, format="csr")
    for j in range(n_dof):
        rows, cols, vals = [], [], []
        for p in range(size):
            a, b = int(e[p, j]), int(e[p, j + n_dof])
            d = a + b
            tab = _pair_table(d, a, subst)
            new = np.repeat(e[p][None, :], d + 1, axis=0)
            new[:, j] = d - np.arange(d + 1)
            new[:, j + n_dof] = np.arange(d + 1)
            rows.append(poly_offsets(n, new))
            cols.append(np.full(d + 1, p))
            vals.append(tab)
        a_j = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(size, size),
        )
        total = a_j @ total
    return (total * 2.0 ** (-s / 2)).tocsr()


def _substitute(f, direction: str):
    if isinstance(f, HomogeneousBlock):
        if f.n_vars % 2:
            raise DimensionError("complex variables need an even number of variables")
        m = _substitution_matrix(f.n_vars // 2, f.degree, direction)
        return HomogeneousBlock(f.n_vars, f.degree, m @ f.coeffs.astype(complex))
    if isinstance(f, PolynomialSeries):
        return PolynomialSeries(f.n_vars, [_substitute(b, direction) for b in f.blocks()])
    if isinstance(f, HamiltonianExpansion):
        basis = "complex" if direction == "to" else "real"
        return f.with_parts([_substitute(p, direction) for p in f.parts], basis)
    raise TypeError(f"cannot substitute variables in {type(f).__name__}")


def to_complex(f):
    """Rewrite a block/series/expansion in (x, y) as one in (xi, eta)."""
    return _substitute(f, "to")


def from_complex(f):
    """Inverse of :func:`to_complex` (the result keeps a complex dtype)."""
    return _substitute(f, "from")


def _real_part(f: PolynomialSeries, what: str, rtol: float = 1e-10) -> PolynomialSeries:
    for b in f.blocks():
        re, im = np.abs(b.coeffs.real).sum(), np.abs(b.coeffs.imag).sum()
        if im > rtol * max(re, 1.0):
            raise AccuracyError(
                f"{what} has imaginary part {im:.3g} at degree {b.degree} (real part {re:.3g})"
            )
    return f.real


# --------------------------------------------------------------------------
# homological equation


def _omega_key(omega) -> tuple:
    """Hashable frequency description; rationals stay exact."""
    out = []
    for w in omega:
        if isinstance(w, (bool, np.bool_)):
            raise TypeError("frequencies must be numbers")
        if isinstance(w, (int, np.integer, Rational)):
            out.append(Fraction(w))
        else:
            out.append(float(w))
    return tuple(out)


@lru_cache(maxsize=None)
def _divisors(n_dof: int, s: int, omega_key: tuple):
    """(<k - j, omega> as floats, exact-resonance mask or None) for degree s."""
    e = poly_exponents(2 * n_dof, s)
    diff = e[:, n_dof:] - e[:, :n_dof]
    values = diff @ np.array([float(w) for w in omega_key])
    values.setflags(write=False)
    exact = None
    if all(isinstance(w, Fraction) for w in omega_key):
        den = math.lcm(*[w.denominator for w in omega_key])
        ints = np.array([int(w * den) for w in omega_key], dtype=object)
        exact = np.array([sum(int(a) * b for a, b in zip(row, ints)) == 0 for row in diff])
        exact.setflags(write=False)
    return values, exact


def default_resonance_tol(omega) -> float:
    return 1e-12 * float(np.linalg.norm([float(w) for w in omega]))


def _resonant(n_dof: int, s: int, omega, resonance_tol):
    key = _omega_key(omega)
    values, exact = _divisors(n_dof, s, key)
    if resonance_tol is None and exact is not None:
        return values, exact
    tol = default_resonance_tol(omega) if resonance_tol is None else resonance_tol
    return values, np.abs(values) <= tol


def lie_derivative_H0(f: HomogeneousBlock, omega) -> HomogeneousBlock:
    """{H_0, f} in complex variables: xi^j eta^k -> i <k - j, omega> xi^j eta^k."""
    n_dof = f.n_vars // 2
    if 2 * n_dof != f.n_vars or len(omega) != n_dof:
        raise DimensionError("block and frequencies do not match")
    values, _ = _divisors(n_dof, f.degree, _omega_key(omega))
    return HomogeneousBlock(f.n_vars, f.degree, 1j * values * f.coeffs)


def solve_homological(rhs: HomogeneousBlock, omega, resonance_tol=None):
    """Split ``rhs`` into (Z_s, chi_s) with Z_s - L_{H_0} chi_s = rhs.

    Resonant monomials (|<k - j, omega>| <= tol, or exactly zero for
    rational frequencies when ``resonance_tol`` is None) stay in Z_s; every
    other monomial c xi^j eta^k is removed by -c / (i <k - j, omega>) in chi_s.
    """
    n_dof = rhs.n_vars // 2
    if 2 * n_dof != rhs.n_vars or len(omega) != n_dof:
        raise DimensionError("block and frequencies do not match")
    values, resonant = _resonant(n_dof, rhs.degree, omega, resonance_tol)
    c = rhs.coeffs.astype(complex)
    z = np.where(resonant, c, 0.0)
    safe = np.where(resonant, 1.0, values)
    chi = np.where(resonant, 0.0, 1j * c / safe)
    return (
        HomogeneousBlock(rhs.n_vars, rhs.degree, z),
        HomogeneousBlock(rhs.n_vars, rhs.degree, chi),
    )


# --------------------------------------------------------------------------
# Lie transform


class _Orbit:
    """Cached E_0 f, E_1 f, ... for one homogeneous f."""

    __slots__ = ("terms", "zero")

    def __init__(self, f: HomogeneousBlock):
        self.terms = [f]
        self.zero = f.is_zero()


class LieTransform:
    """T_chi for a (growing) generating sequence, with memoized E_s f."""

    def __init__(self, n_dof: int, chi: Sequence[HomogeneousBlock] | GeneratingSequence = ()):
        self.n_dof = n_dof
        if isinstance(chi, GeneratingSequence):
            chi = chi.chi[1:]
        self.chi: list = [None]
        self._zero: list = [True]
        for c in chi:
            self.append(c)

    def append(self, chi_s: HomogeneousBlock):
        s = len(self.chi)
        if chi_s.degree != s + 2 or chi_s.n_vars != 2 * self.n_dof:
            raise DimensionError(f"chi_{s} must have degree {s + 2} in {2 * self.n_dof} variables")
        self.chi.append(chi_s)
        self._zero.append(chi_s.is_zero())

    @property
    def length(self) -> int:
        return len(self.chi) - 1

    def orbit(self, f: HomogeneousBlock) -> _Orbit:
        return _Orbit(f)

    def _partial(self, orb: _Orbit, s: int, upto: int) -> HomogeneousBlock:
        """sum_{j=1}^{upto} (j/s) {chi_j, E_{s-j} f}."""
        f0 = orb.terms[0]
        deg = f0.degree + s
        acc = np.zeros(block_size(f0.n_vars, deg), dtype=complex)
        if not orb.zero:
            for j in range(1, upto + 1):
                if self._zero[j]:
                    continue
                g = self.E(orb, s - j)
                if g.is_zero():
                    continue
                acc += (j / s) * bracket_blocks(self.chi[j], g).coeffs
        return HomogeneousBlock(f0.n_vars, deg, acc)

    def E(self, orb: _Orbit, s: int) -> HomogeneousBlock:
        if s > self.length:
            raise SequencingError(f"E_{s} needs chi_1..chi_{s}; only {self.length} available")
        while len(orb.terms) <= s:
            t = len(orb.terms)
            orb.terms.append(self._partial(orb, t, t))
        return orb.terms[s]

    def apply(self, f, order: int, max_degree: int | None = None) -> PolynomialSeries:
        """sum_{s <= order} E_s f, dropping every term above ``max_degree``."""
        if isinstance(f, HomogeneousBlock):
            f = PolynomialSeries(f.n_vars, [f])
        out = []
        for b in f.blocks():
            orb = self.orbit(b)
            top = order if max_degree is None else min(order, max_degree - b.degree)
            out.extend(self.E(orb, s) for s in range(top + 1))
        return PolynomialSeries(f.n_vars, out)


def lie_transform_apply(chi, f, order: int, max_degree: int | None = None) -> PolynomialSeries:
    """T_chi f through ``order`` (sum of E_0 f .. E_order f)."""
    if order < 0:
        raise ValueError("order must be >= 0")
    n_vars = f.n_vars
    lt = chi if isinstance(chi, LieTransform) else LieTransform(n_vars // 2, chi)
    return lt.apply(f, order, max_degree)


def compute_Q(s: int, chi, Z, H0: HomogeneousBlock) -> HomogeneousBlock:
    """Known part of the order-s homological equation.

    Q_1 = 0 and Q_s = -sum_{j=1}^{s-1} (E_j Z_{s-j} + (j/s) {chi_j, E_{s-j} H_0}).
    ``chi`` is a GeneratingSequence or LieTransform (indexed by order) or a
    plain sequence [chi_1, chi_2, ...].  ``Z`` is a HamiltonianExpansion or
    a sequence indexed by order, so ``Z[0]`` is H_0.
    """
    n = H0.n_vars
    if s < 1:
        raise ValueError("s must be >= 1")
    if s == 1:
        return HomogeneousBlock.zeros(n, 3, complex)
    if isinstance(chi, LieTransform):
        lt = chi
    else:
        chis = chi.chi[1:] if isinstance(chi, GeneratingSequence) else list(chi)
        lt = LieTransform(n // 2, chis[: s - 1])
    if lt.length < s - 1:
        raise SequencingError(f"Q_{s} needs chi_1..chi_{s - 1}")
    if isinstance(Z, HamiltonianExpansion):
        Z = Z.parts
    if len(Z) < s:
        raise SequencingError(f"Q_{s} needs Z_1..Z_{s - 1}")
    zs = [Z[m] for m in range(1, s)]
    acc = np.zeros(block_size(n, s + 2), dtype=complex)
    for j in range(1, s):
        acc -= lt.E(lt.orbit(zs[s - j - 1]), j).coeffs
    acc -= lt._partial(lt.orbit(H0), s, s - 1).coeffs
    return HomogeneousBlock(n, s + 2, acc)


def normalize(H: HamiltonianExpansion, order: int, resonance_tol=None) -> NormalFormResult:
    """Lie-transform normalization through ``order``.

    For s = 1..order solves Z_s - L_{H_0} chi_s = H_s + Q_s.  Frequencies
    given as integers or fractions use exact resonance detection unless an
    explicit ``resonance_tol`` is passed.
    """
    if order < 0:
        raise ValueError("order must be >= 0")
    Hc = H if H.basis == "complex" else to_complex(H)
    n_dof, n = Hc.n_dof, Hc.n_vars
    omega = Hc.omega
    H0 = Hc.part(0).astype(complex)
    expected = lie_derivative_H0(H0, omega)
    if expected.norm_l1() > 1e-12 * max(H0.norm_l1(), 1.0):
        raise ValueError("H_0 is not diagonal in the complex variables")

    lt = LieTransform(n_dof)
    gen = GeneratingSequence(n_dof)
    z_parts = [H0]
    z_orbits: list = [None]
    h0_orbit = lt.orbit(H0)
    for s in range(1, order + 1):
        acc = Hc.part(s).coeffs.astype(complex).copy()
        for j in range(1, s):
            orb = z_orbits[s - j]
            if not orb.zero:
                acc -= lt.E(orb, j).coeffs
        partial = lt._partial(h0_orbit, s, s - 1)
        acc -= partial.coeffs
        z_s, chi_s = solve_homological(HomogeneousBlock(n, s + 2, acc), omega, resonance_tol)
        lt.append(chi_s)
        gen.append(chi_s)
        z_parts.append(z_s)
        z_orbits.append(lt.orbit(z_s))
        # E_s H_0 = partial + {chi_s, H_0} = partial - L_{H_0} chi_s
        h0_orbit.terms.append(partial - lie_derivative_H0(chi_s, omega))
    Z = HamiltonianExpansion(n_dof, tuple(omega), tuple(z_parts), "complex", Hc.name)
    result = NormalFormResult(Z, gen, Hc, lt, order, resonance_tol)
    result._h0_orbit = h0_orbit
    return result


def first_integral(result: NormalFormResult, order: int | None = None, real: bool = True):
    """Phi = T_chi H_0 truncated at degree order + 2 (default: the full order).

    Returned in real variables; with ``real=False`` the complex-basis
    series is returned instead.
    """
    if order is None:
        order = result.order
    if order > result.order:
        raise SequencingError(f"normalization reached order {result.order}, asked {order}")
    orb = getattr(result, "_h0_orbit", None)
    lt = result.transform
    if orb is None:
        orb = lt.orbit(result.Z.part(0))
    phi_c = PolynomialSeries(result.Z.n_vars, [lt.E(orb, s) for s in range(order + 1)])
    if not real:
        return phi_c
    return _real_part(from_complex(phi_c), "Phi")


@dataclass
class ResidualReport:
    """Per-degree l1 norms of {H, Phi}; degrees <= band_max must vanish."""

    norms: dict
    max_abs: dict
    band_max: int
    scale: float

    def band(self) -> dict:
        return {r: v for r, v in self.norms.items() if r <= self.band_max}

    def band_clean(self, rtol: float = 1e-9) -> bool:
        limit = rtol * max(self.scale, 1e-300)
        return all(self.max_abs[r] <= limit for r in self.norms if r <= self.band_max)

    def first_nonzero(self, rtol: float = 1e-9) -> int | None:
        limit = rtol * max(self.scale, 1e-300)
        for r in sorted(self.norms):
            if self.max_abs[r] > limit:
                return r
        return None


def bracket_residual(H, Phi: PolynomialSeries, order: int) -> ResidualReport:
    """Norms of the homogeneous parts of {H, Phi}.

    ``scale`` is the l1 norm of Phi, the reference for relative tolerances.
    """
    if isinstance(H, HamiltonianExpansion):
        H = H.series
    if H.n_vars != Phi.n_vars:
        raise DimensionError("H and Phi live in different spaces")
    res = poisson_bracket(H, Phi)
    norms = {r: 0.0 for r in range(2, res.s_max + 1)}
    max_abs = dict(norms)
    for b in res.blocks():
        norms[b.degree] = b.norm_l1()
        max_abs[b.degree] = float(np.abs(b.coeffs).max(initial=0.0))
    return ResidualReport(norms, max_abs, order + 1, Phi.norm_l1())


# --------------------------------------------------------------------------
# model files


def dump_model(H: HamiltonianExpansion) -> str:
    """Series text of H with a ``# omega:`` line keeping exact frequencies."""
    omega = " ".join(str(w) for w in H.omega)
    head = [f"# model: {H.name or 'unnamed'}", f"# omega: {omega}", f"# basis: {H.basis}"]
    return "\n".join(head) + "\n" + dumps(H.series)


def _parse_frequency(tok: str):
    try:
        return int(tok)
    except ValueError:
        pass
    if "/" in tok:
        return Fraction(tok)
    return float(tok)


def load_model(text: str, name: str = "") -> HamiltonianExpansion:
    """Read a Hamiltonian written by :func:`dump_model` (or a bare series text).

    Without an ``# omega:`` line the frequencies are read off the
    quadratic part (as floats).
    """
    omega = None
    basis = "real"
    for ln in text.splitlines():
        ln = ln.strip()
        if ln.startswith("# omega:"):
            omega = tuple(_parse_frequency(t) for t in ln.split(":", 1)[1].split())
        elif ln.startswith("# basis:"):
            basis = ln.split(":", 1)[1].strip()
        elif ln.startswith("# model:") and not name:
            name = ln.split(":", 1)[1].strip()
    series = loads(text)
    H = HamiltonianExpansion.from_series(series, None, basis, name)
    if omega is not None:
        inferred = np.array([float(w) for w in H.omega])
        if not np.allclose(inferred, [float(w) for w in omega], rtol=1e-12, atol=0):
            raise ValueError(f"# omega line {omega} disagrees with the quadratic part {tuple(inferred)}")
        H = HamiltonianExpansion(H.n_dof, omega, H.parts, basis, name)
    return H
