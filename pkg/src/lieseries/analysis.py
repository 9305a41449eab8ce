"""
Diagnostics for the third integral of galactic-type Hamiltonians.

Model Hamiltonians, norm sequences and convergence criteria, optimal
truncation, stability-time estimates, level maps of a truncated first
integral on the energy surface, and Poincare sections from direct
integration.  Variables follow the series ordering (x1, x2, y1, y2).
Results are plain data; the CSV writers at the bottom serialize them.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numba
import numpy as np

from .errors import AccuracyError, DimensionError
from .normalform import HamiltonianExpansion
from .series import HomogeneousBlock, PolynomialSeries, bracket_blocks

__all__ = [
    "ModelSpec",
    "henon_heiles",
    "contopoulos",
    "parse_model",
    "NormDiagnostics",
    "norm_sequence",
    "optimal_truncation",
    "StabilityEstimate",
    "stability_time",
    "GridMap",
    "level_map",
    "relative_rms",
    "Trajectory",
    "SectionPoints",
    "integrate_orbit",
    "poincare_section",
    "random_initial_states",
    "phi_variation",
    "write_norms_csv",
    "write_grid_csv",
    "write_sections_csv",
    "write_stability_csv",
]


# --------------------------------------------------------------------------
# models


@dataclass(frozen=True)
class ModelSpec:
    """Two-dof model H = sum omega_j/2 (x_j^2 + y_j^2) + higher terms.

    ``terms`` maps exponent vectors in (x1, x2, y1, y2) to coefficients of
    the cubic and higher parts.
    """

    name: str
    n_dof: int
    omega: tuple
    terms: Mapping = field(default_factory=dict)

    def expansion(self) -> HamiltonianExpansion:
        n = 2 * self.n_dof
        quad = {}
        for j, w in enumerate(self.omega):
            for v in (j, j + self.n_dof):
                quad[tuple(2 if i == v else 0 for i in range(n))] = float(w) / 2
        by_degree: dict[int, dict] = {}
        for k, c in self.terms.items():
            if len(k) != n:
                raise DimensionError(f"term {k} does not have {n} exponents")
            if sum(k) < 3:
                raise ValueError("higher terms must have degree >= 3")
            by_degree.setdefault(sum(k), {})[tuple(k)] = c
        top = max(by_degree, default=2)
        parts = [HomogeneousBlock.from_terms(n, 2, quad)]
        for d in range(3, top + 1):
            parts.append(HomogeneousBlock.from_terms(n, d, by_degree.get(d, {})))
        return HamiltonianExpansion(self.n_dof, tuple(self.omega), tuple(parts), "real", self.name)


def henon_heiles() -> HamiltonianExpansion:
    """omega = (1, 1), H_1 = x1^2 x2 - x2^3 / 3 (exact frequencies)."""
    terms = {(2, 1, 0, 0): 1.0, (0, 3, 0, 0): -1.0 / 3.0}
    return ModelSpec("henon-heiles", 2, (1, 1), terms).expansion()


def contopoulos(omega1, omega2) -> HamiltonianExpansion:
    """H_1 = x1^2 x2 with frequencies (omega1, omega2)."""
    if omega1 == 0 or omega2 == 0:
        raise ValueError("frequencies must be nonzero")
    name = f"contopoulos:{omega1},{omega2}"
    return ModelSpec(name, 2, (omega1, omega2), {(2, 1, 0, 0): 1.0}).expansion()


def _frequency(tok: str):
    tok = tok.strip()
    if "/" in tok:
        return Fraction(tok)
    try:
        return int(tok)
    except ValueError:
        return float(tok)


def parse_model(text: str) -> HamiltonianExpansion:
    """``henon-heiles`` or ``contopoulos:w1,w2`` (integers mean exact frequencies)."""
    name, _, args = text.partition(":")
    name = name.strip().lower()
    if name in ("henon-heiles", "henon_heiles", "hh"):
        if args:
            raise ValueError("henon-heiles takes no parameters")
        return henon_heiles()
    if name == "contopoulos":
        vals = [_frequency(t) for t in args.split(",")] if args else [1, 1]
        if len(vals) != 2:
            raise ValueError("contopoulos needs two frequencies: contopoulos:w1,w2")
        return contopoulos(*vals)
    raise ValueError(f"unknown model {text!r}")


def _real_series(H) -> PolynomialSeries:
    if isinstance(H, HamiltonianExpansion):
        if H.basis != "real":
            raise ValueError("expected a Hamiltonian in real variables")
        H = H.series
    return H


# --------------------------------------------------------------------------
# norms and criteria


@dataclass(frozen=True)
class NormDiagnostics:
    """||Phi_s|| and the root, ratio and two-step criteria, keyed by degree."""

    norms: dict
    root: dict
    ratio: dict
    twostep: dict

    @property
    def degrees(self) -> list[int]:
        return sorted(self.norms)

    def rows(self):
        for s in self.degrees:
            yield s, self.norms[s], self.root.get(s), self.ratio.get(s), self.twostep.get(s)


def norm_sequence(phi) -> NormDiagnostics:
    """Per-degree l1 norms and the three growth criteria.

    Criteria are defined above the lowest degree (root, ratio) and from two
    degrees above it (two-step); a zero denominator gives ``inf``.
    """
    norms = dict(phi.norms()) if isinstance(phi, PolynomialSeries) else dict(phi)
    if not norms:
        return NormDiagnostics({}, {}, {}, {})
    s0 = min(norms)
    root, ratio, twostep = {}, {}, {}

    def quotient(a, b):
        return a / b if b else math.inf

    for s in sorted(norms):
        if s == s0:
            continue
        root[s] = norms[s] ** (1.0 / s)
        if s - 1 in norms:
            ratio[s] = quotient(norms[s], norms[s - 1])
        if s - 2 in norms and s - 2 >= s0:
            twostep[s] = math.sqrt(quotient(norms[s], norms[s - 2]))
    return NormDiagnostics(norms, root, ratio, twostep)


def optimal_truncation(diag, rho: float) -> tuple[int, float]:
    """argmin_s ||Psi_s|| rho^s and the minimal value (ties: smallest s)."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    seq = diag.norms if isinstance(diag, NormDiagnostics) else dict(diag)
    if not seq:
        raise ValueError("no norms to minimize over")
    best_s, best_log = None, math.inf
    for s in sorted(seq):
        v = seq[s]
        val = -math.inf if v == 0 else math.log(v) + s * math.log(rho)
        if val < best_log:
            best_s, best_log = s, val
    return best_s, (0.0 if best_log == -math.inf else math.exp(best_log))


@dataclass(frozen=True)
class StabilityEstimate:
    """T(s) = rho0^2 / R(s) with R(s) = sum_r ||{H, Phi^(<=s)}_r|| (2 rho0)^r."""

    rho0: float
    s_opt: int
    T_est: float
    unbounded: bool
    per_degree: dict
    convention: str = "T = rho0^2 / sum_r ||{H,Phi<=s}_r||_1 (2 rho0)^r; l1 norm, real variables"


def _residual_table(H: PolynomialSeries, phi: PolynomialSeries, degrees: Sequence[int], rtol: float):
    """For each s in ``degrees``: {r: ||{H, Phi^(<=s)}_r||} over non-negligible r.

    A degree is negligible when its norm is below ``rtol * ||Phi^(<=s)||``.
    """
    scale = 0.0
    acc: dict[int, np.ndarray] = {}
    out = {}
    n = H.n_vars
    for d in range(min(phi.degrees, default=0), max(degrees) + 1):
        if phi.has_degree(d):
            scale += phi.block(d).norm_l1()
            for h in H.blocks():
                b = bracket_blocks(h, phi.block(d), n // 2)
                if b.degree in acc:
                    acc[b.degree] = acc[b.degree] + b.coeffs
                else:
                    acc[b.degree] = b.coeffs.copy()
        if d in degrees:
            norms = {}
            for r, c in acc.items():
                v = float(np.abs(c).sum())
                if v > rtol * scale:
                    norms[r] = v
            out[d] = norms
    return out


def stability_time(H, phi: PolynomialSeries, rho0: float, order_range, rtol: float = 1e-9):
    """Best stability-time estimate over truncation degrees ``order_range``.

    Residual degrees whose norm is below ``rtol * ||Phi^(<=s)||`` are treated as
    vanishing.  Truncations with no surviving residual are skipped; when that
    holds for every s the estimate is flagged unbounded (``T_est = inf``).
    """
    if rho0 <= 0:
        raise ValueError("rho0 must be positive")
    H = _real_series(H)
    degrees = sorted(set(order_range))
    if not degrees:
        raise ValueError("empty order range")
    if max(degrees) > phi.s_max:
        raise ValueError(f"Phi is known through degree {phi.s_max}, asked {max(degrees)}")
    table = _residual_table(H, phi, degrees, rtol)
    per = {}
    for s in degrees:
        R = sum(v * (2 * rho0) ** r for r, v in table[s].items())
        per[s] = math.inf if R == 0 else rho0**2 / R
    finite = [s for s in degrees if not math.isinf(per[s])]
    if not finite:
        return StabilityEstimate(rho0, max(degrees), math.inf, True, per)
    # an exactly conserved truncation (e.g. H itself) carries no information
    s_opt = max(finite, key=lambda s: (per[s], -s))
    return StabilityEstimate(rho0, s_opt, per[s_opt], False, per)


# --------------------------------------------------------------------------
# level maps


@dataclass
class GridMap:
    """Truncated Phi on the surface x1 = 0, y1 >= 0 of energy E over (x2, y2)."""

    energy: float
    order: int
    x2: np.ndarray
    y2: np.ndarray
    y1: np.ndarray
    admissible: np.ndarray
    phi: np.ndarray

    @property
    def dynamic_range(self) -> float:
        v = self.phi[self.admissible]
        return float(v.max() - v.min()) if v.size else 0.0


def relative_rms(reference: GridMap, other: GridMap) -> float:
    """RMS of (other - reference) over common admissible nodes / range of reference."""
    if reference.phi.shape != other.phi.shape:
        raise DimensionError("grid maps have different shapes")
    mask = reference.admissible & other.admissible
    diff = other.phi[mask] - reference.phi[mask]
    return float(np.sqrt(np.mean(diff**2)) / reference.dynamic_range)


def _rest_potential(H: PolynomialSeries):
    """omega1 and H at x1 = y1 = 0 as a function of (x2, y2); checks y1 enters only as omega1/2 y1^2."""
    if H.n_vars != 4:
        raise DimensionError("level maps need a two-dof Hamiltonian")
    w1 = None
    rest = {}
    for k, c in H.terms():
        if k[0] or k[2]:
            if k == (0, 0, 2, 0):
                w1 = 2 * float(np.real(c))
            elif k == (2, 0, 0, 0):
                continue
            elif k[2]:
                raise ValueError("level maps need H to depend on y1 only through omega1/2 y1^2")
            continue
        rest[k] = c
    if not w1:
        raise ValueError("missing omega1/2 y1^2 term")
    return w1, PolynomialSeries.from_terms(4, rest)


def _well_box(V: PolynomialSeries, E: float, w2: float, margin: float = 0.02):
    """Bounding box of the energy well around the origin on the (x2, y2) plane."""

    def v(x):
        return float(np.real(V.evaluate((0.0, x, 0.0, 0.0))))

    def edge(sign):
        step, x = 1e-3 * math.sqrt(E), 0.0
        while v(x + sign * step) < E:
            x += sign * step
            step *= 1.2
            if abs(x) > 1e3:
                return x
        lo, hi = x, x + sign * step
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if v(mid) < E else (lo, mid)
        return hi

    xl, xr = edge(-1.0), edge(1.0)
    xs = np.linspace(xl, xr, 401)
    vmin = min(v(x) for x in xs)
    ymax = math.sqrt(2 * max(E - vmin, 0.0) / w2)
    pad = margin * (xr - xl)
    return (xl - pad, xr + pad), (-ymax * (1 + margin) - pad, ymax * (1 + margin) + pad)


def level_map(phi: PolynomialSeries, E: float, grid=201, order: int | None = None, H=None, box=None):
    """Evaluate Phi truncated at degree ``order`` on the energy surface.

    For each node (x2, y2), y1 >= 0 solves omega1/2 y1^2 = E - H(0, x2, 0, y2);
    nodes with a negative right-hand side are inadmissible (phi = nan).
    ``grid`` is a node count per axis or a pair of 1-d coordinate arrays;
    without ``box`` the grid covers the potential well around the origin.
    """
    if E <= 0:
        raise ValueError("energy must be positive")
    H =_real_series(henon_heiles() if H is None else H)
    w1, V = _rest_potential(H)
    w2 = 2 * float(np.real(H.block(2).coefficient((0, 0, 0, 2))))
    if isinstance(grid, (int, np.integer)):
        if grid < 2:
            raise ValueError("grid needs at least 2 nodes per axis")
        (xl, xr), (yl, yr) = box if box is not None else _well_box(V, E, w2)
        x2 = np.linspace(xl, xr, int(grid))
        y2 = np.linspace(yl, yr, int(grid))
    else:
        x2, y2 = (np.asarray(a, dtype=float) for a in grid)
    X, Y = np.meshgrid(x2, y2, indexing="ij")
    flat = np.zeros((X.size, 4))
    flat[:, 1], flat[:, 3] = X.ravel(), Y.ravel()
    disc = 2.0 * (E - np.real(V.evaluate_many(flat))) / w1
    ok = disc >= 0
    y1 = np.where(ok, np.sqrt(np.where(ok, disc, 0.0)), np.nan)
    flat[:, 2] = np.nan_to_num(y1)
    f = phi if order is None else phi.truncate(order)
    vals = np.full(X.size, np.nan)
    if ok.any():
        vals[ok] = np.real(f.evaluate_many(flat[ok]))
    shape = X.shape
    return GridMap(
        E,
        f.s_max if order is None else order,
        x2,
        y2,
        y1.reshape(shape),
        ok.reshape(shape),
        vals.reshape(shape),
    )


# --------------------------------------------------------------------------
# orbits


def _model_arrays(H) -> tuple[np.ndarray, np.ndarray]:
    H = _real_series(H)
    exps, coefs = [], []
    for k, c in H.terms():
        if c != 0:
            exps.append(k)
            coefs.append(float(np.real(c)))
    return np.array(exps, dtype=np.int64).reshape(-1, H.n_vars), np.array(coefs)


@numba.njit(cache=True, nogil=True)
def _energy(z, exps, coefs):
    h = 0.0
    for m in range(exps.shape[0]):
        t = coefs[m]
        for v in range(z.shape[0]):
            for _ in range(exps[m, v]):
                t *= z[v]
        h += t
    return h


@numba.njit(cache=True, nogil=True)
def _field(z, exps, coefs, out):
    n = z.shape[0] // 2
    grad = np.zeros(z.shape[0])
    for m in range(exps.shape[0]):
        for d in range(z.shape[0]):
            e = exps[m, d]
            if e == 0:
                continue
            t = coefs[m] * e
            for v in range(z.shape[0]):
                p = exps[m, v] - (1 if v == d else 0)
                for _ in range(p):
                    t *= z[v]
            grad[d] += t
    for j in range(n):
        out[j] = grad[j + n]
        out[j + n] = -grad[j]


@numba.njit(cache=True, nogil=True)
def _rk4(z, h, exps, coefs):
    k1 = np.empty_like(z)
    k2 = np.empty_like(z)
    k3 = np.empty_like(z)
    k4 = np.empty_like(z)
    _field(z, exps, coefs, k1)
    _field(z + 0.5 * h * k1, exps, coefs, k2)
    _field(z + 0.5 * h * k2, exps, coefs, k3)
    _field(z + h * k3, exps, coefs, k4)
    return z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@numba.njit(cache=True, nogil=True)
def _run(z0, dt, n_steps, sample_every, exps, coefs, section_tol, max_sections):
    """Fixed-step RK4; samples every ``sample_every`` steps, sections at x1 = 0 upward."""
    n_samples = n_steps // sample_every + 1
    samples = np.empty((n_samples, z0.shape[0]))
    energies = np.empty(n_samples)
    sections = np.empty((max_sections, z0.shape[0]))
    times = np.empty(max_sections)
    n_sec = 0
    z = z0.copy()
    samples[0] = z
    energies[0] = _energy(z, exps, coefs)
    k = 1
    for step in range(1, n_steps + 1):
        znew = _rk4(z, dt, exps, coefs)
        if z[0] < 0.0 and znew[0] >= 0.0 and n_sec < max_sections:
            lo, hi = 0.0, dt
            zc = znew
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                zc = _rk4(z, mid, exps, coefs)
                if abs(zc[0]) <= section_tol:
                    break
                if zc[0] < 0.0:
                    lo = mid
                else:
                    hi = mid
            sections[n_sec] = zc
            times[n_sec] = (step - 1) * dt + mid
            n_sec += 1
        z = znew
        if step % sample_every == 0:
            samples[k] = z
            energies[k] = _energy(z, exps, coefs)
            k += 1
    return samples[:k], energies[:k], sections[:n_sec], times[:n_sec]


@dataclass
class Trajectory:
    """Sampled orbit plus its section crossings (x1 = 0, dx1/dt > 0)."""

    t: np.ndarray
    states: np.ndarray
    energies: np.ndarray
    sections: np.ndarray
    section_times: np.ndarray
    dt: float

    @property
    def energy_drift(self) -> float:
        e0 = self.energies[0]
        return float(np.max(np.abs(self.energies - e0)) / max(abs(e0), 1e-300))


def integrate_orbit(
    H,
    state0,
    dt: float = 1e-3,
    t_max: float = 1e3,
    sample_every: int = 1000,
    drift_tol: float = 1e-8,
    section_tol: float = 1e-10,
) -> Trajectory:
    """Classical RK4 with fixed step ``dt`` for Hamilton's equations of H.

    ``state0`` is (x1, x2, y1, y2).  Raises AccuracyError when the relative
    energy drift over the sampled states exceeds ``drift_tol``.
    """
    if dt <= 0 or t_max <= 0:
        raise ValueError("dt and t_max must be positive")
    exps, coefs = _model_arrays(H)
    z0 = np.asarray(state0, dtype=float)
    if z0.shape != (exps.shape[1],):
        raise DimensionError(f"state must have {exps.shape[1]} components")
    n_steps = int(round(t_max / dt))
    sample_every = max(1, min(int(sample_every), n_steps))
    max_sections = int(t_max / (2 * math.pi) * 4) + 16
    samples, energies, secs, times = _run(
        z0, dt, n_steps, sample_every, exps, coefs, section_tol, max_sections
    )
    traj = Trajectory(
        np.arange(len(samples)) * sample_every * dt, samples, energies, secs, times, dt
    )
    if traj.energy_drift > drift_tol:
        raise AccuracyError(
            f"relative energy drift {traj.energy_drift:.3g} exceeds {drift_tol:g}; use a smaller dt"
        )
    return traj


def random_initial_states(H, E: float, n: int, seed: int = 0) -> np.ndarray:
    """States (0, x2, y1, y2) on the energy surface with (x2, y2) uniform in the well."""
    Hs = _real_series(H)
    w1, V = _rest_potential(Hs)
    w2 = 2 * float(np.real(Hs.block(2).coefficient((0, 0, 0, 2))))
    (xl, xr), (yl, yr) = _well_box(V, E, w2, margin=0.0)
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        x2, y2 = rng.uniform(xl, xr), rng.uniform(yl, yr)
        rest = float(np.real(V.evaluate((0.0, x2, 0.0, y2))))
        disc = 2.0 * (E - rest) / w1
        # keep clear of the boundary so y1 (hence dx1/dt) is not tiny
        if disc > 1e-3 * E:
            out.append((0.0, x2, math.sqrt(disc), y2))
    return np.array(out)


@dataclass
class SectionPoints:
    """(x2, y2) crossings of x1 = 0 with dx1/dt > 0, one array per orbit."""

    energy: float
    dt: float
    t_max: float
    points: list
    initial: np.ndarray

    def rows(self):
        for i, p in enumerate(self.points):
            for x2, y2 in p:
                yield i, float(x2), float(y2)


def poincare_section(
    H,
    E: float,
    n_orbits: int = 10,
    t_max: float = 1e3,
    dt: float = 1e-3,
    seed: int = 0,
    threads: int | None = None,
    initial=None,
) -> SectionPoints:
    """Integrate ``n_orbits`` orbits of energy E and collect their section points."""
    if initial is None:
        initial = random_initial_states(H, E, n_orbits, seed)
    initial = np.asarray(initial, dtype=float)

    def job(z0):
        return integrate_orbit(H, z0, dt, t_max, sample_every=max(1, int(1.0 / dt)))

    with ThreadPoolExecutor(max_workers=threads or os.cpu_count() or 1) as pool:
        trajs = list(pool.map(job, initial))
    pts = [tr.sections[:, [1, 3]] for tr in trajs]
    return SectionPoints(E, dt, t_max, pts, initial)


def phi_variation(phi: PolynomialSeries, traj: Trajectory) -> float:
    """(max - min) / |mean| of Phi over the sampled states of an orbit."""
    v = np.real(phi.evaluate_many(traj.states))
    return float((v.max() - v.min()) / abs(v.mean()))


# --------------------------------------------------------------------------
# CSV output


def _write(path, header: Mapping, columns: Sequence[str], rows):
    with open(path, "w", newline="") as fh:
        for k, v in header.items():
            fh.write(f"# {k}: {v}\n")
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow(["" if x is None else (repr(x) if isinstance(x, float) else x) for x in r])


def write_norms_csv(path, diag: NormDiagnostics, meta: Mapping = ()):
    head = dict(meta)
    head.setdefault("norm", "l1 of real-variable coefficients per degree")
    _write(path, head, ["s", "norm", "root", "ratio", "twostep"], diag.rows())


def write_grid_csv(path, gm: GridMap, meta: Mapping = ()):
    head = {"energy": gm.energy, "order": gm.order, **dict(meta)}
    head.setdefault("surface", "x1=0, y1>=0 from the energy equation")

    def rows():
        for i, x in enumerate(gm.x2):
            for j, y in enumerate(gm.y2):
                ok = bool(gm.admissible[i, j])
                yield float(x), float(y), int(ok), float(gm.phi[i, j]) if ok else None

    _write(path, head, ["x2", "y2", "admissible", "phi"], rows())


def write_sections_csv(path, sec: SectionPoints, meta: Mapping = ()):
    head = {"energy": sec.energy, "dt": sec.dt, "tmax": sec.t_max, **dict(meta)}
    head.setdefault("section", "x1=0, dx1/dt>0, coordinates (x2, y2)")
    _write(path, head, ["orbit_id", "x2", "y2"], sec.rows())


def write_stability_csv(path, estimates: Sequence[StabilityEstimate], meta: Mapping = ()):
    head = dict(meta)
    if estimates:
        head.setdefault("convention", estimates[0].convention)
    _write(path, head, ["rho0", "s_opt", "T_est"], ((e.rho0, e.s_opt, e.T_est) for e in estimates))
