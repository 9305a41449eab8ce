import csv
import math

import numpy as np
import pytest

from lieseries.analysis import (
    ModelSpec,
    NormDiagnostics,
    contopoulos,
    henon_heiles,
    integrate_orbit,
    level_map,
    norm_sequence,
    optimal_truncation,
    parse_model,
    phi_variation,
    poincare_section,
    random_initial_states,
    relative_rms,
    stability_time,
    write_grid_csv,
    write_norms_csv,
    write_sections_csv,
    write_stability_csv,
)
from lieseries.errors import AccuracyError
from lieseries.normalform import first_integral, normalize
from lieseries.series import HomogeneousBlock, PolynomialSeries


def energy(H, z):
    return float(np.real(H.series.evaluate(z)))


# --------------------------------------------------------------------------
# models


def test_henon_heiles():
    H = henon_heiles()
    assert H.omega == (1, 1)
    assert energy(H, (0, 0, 0, 0)) == 0
    assert abs(energy(H, (0.0, 0.0, 0.1414214, 0.0)) - 0.01) <= 1e-7
    assert H.part(1).coefficient((0, 3, 0, 0)) == -1 / 3
    assert H.part(1).coefficient((2, 1, 0, 0)) == 1
    assert H.order == 1


def test_contopoulos():
    H = contopoulos(1, 1)
    diff = henon_heiles().part(1) - H.part(1)
    assert {k: c for k, c in diff.terms() if c} == {(0, 3, 0, 0): -1 / 3}
    assert H.part(1).coefficient((2, 1, 0, 0)) == 1
    H = contopoulos(1.0, 1.4142136)
    q = H.part(0)
    assert (2 * q.coefficient((2, 0, 0, 0)), 2 * q.coefficient((0, 0, 0, 2))) == (1.0, 1.4142136)
    with pytest.raises(ValueError):
        contopoulos(0, 1)


def test_parse_model():
    assert parse_model("henon-heiles").name == "henon-heiles"
    H = parse_model("contopoulos:1,2")
    assert H.omega == (1, 2) and isinstance(H.omega[0], int)
    assert parse_model("contopoulos:1.0,1.4142136").omega == (1.0, 1.4142136)
    with pytest.raises(ValueError):
        parse_model("kepler")
    with pytest.raises(ValueError):
        parse_model("contopoulos:1")


# --------------------------------------------------------------------------
# norms and criteria


def test_norm_sequence_trivial(hh):
    d = norm_sequence(PolynomialSeries(4, [hh.part(0)]))
    assert d.degrees == [2] and not d.root and not d.ratio and not d.twostep


def test_norm_sequence_factorial():
    d = norm_sequence({s: math.factorial(s) for s in range(1, 15)})
    for s in range(2, 15):
        assert d.ratio[s] == pytest.approx(s, rel=1e-12)
        assert d.root[s] == pytest.approx(math.factorial(s) ** (1 / s))
    assert min(d.twostep) == 3
    assert d.twostep[6] == pytest.approx(math.sqrt(30))


def test_norm_sequence_hh(hh_phi):
    d = norm_sequence(hh_phi)
    assert d.degrees == list(range(2, 29))
    assert min(d.twostep) == 4
    assert all(v >= 0 for v in d.norms.values())
    roots = [d.root[s] for s in range(10, 29)]
    assert all(b > a for a, b in zip(roots, roots[1:]))


@pytest.mark.parametrize("rho", [0.05, 0.1])
def test_optimal_truncation_factorial(rho):
    seq = {s: math.factorial(s) for s in range(1, 60)}
    s_opt, bound = optimal_truncation(seq, rho)
    assert abs(s_opt - math.floor(1 / rho)) <= 2
    assert bound == pytest.approx(min(v * rho**s for s, v in seq.items()))


def test_optimal_truncation_monotone():
    seq = {s: math.factorial(s) for s in range(3, 30)}
    assert optimal_truncation(seq, 2.0)[0] == 3
    grid = np.geomspace(0.01, 3.0, 200)
    opts = [optimal_truncation(seq, r)[0] for r in grid]
    assert all(b <= a for a, b in zip(opts, opts[1:]))
    d = NormDiagnostics(seq, {}, {}, {})
    assert optimal_truncation(d, 0.1) == optimal_truncation(seq, 0.1)
    with pytest.raises(ValueError):
        optimal_truncation({}, 0.1)
    with pytest.raises(ValueError):
        optimal_truncation(seq, 0.0)


# --------------------------------------------------------------------------
# stability time


def test_stability_unbounded_when_conserved(hh):
    est = stability_time(hh, hh.series, 0.1, [3])
    assert est.unbounded and est.T_est == math.inf
    # the quadratic truncation alone does not commute with H
    est = stability_time(hh, hh.series, 0.1, [2, 3])
    assert not est.unbounded and est.s_opt == 2 and est.per_degree[3] == math.inf


def test_stability_scaling_law():
    # one residual degree r = 3: {H0, x^3} for a single oscillator
    H = PolynomialSeries.from_terms(2, {(2, 0): 0.5, (0, 2): 0.5})
    phi = PolynomialSeries.from_terms(2, {(2, 0): 0.5, (0, 2): 0.5, (3, 0): 1.0})
    a = stability_time(H, phi, 0.1, [3])
    b = stability_time(H, phi, 0.05, [3])
    # T = rho^2 / (c (2 rho)^3): halving rho scales the degree-3 term by 2^-3
    r_a = a.rho0**2 / a.T_est
    r_b = b.rho0**2 / b.T_est
    assert r_b / r_a == pytest.approx(2.0**-3, rel=1e-12)
    assert not a.unbounded and a.s_opt == 3


def test_stability_grows_super_polynomially(hh, hh_phi):
    rhos = [0.2, 0.1, 0.05, 0.025]
    T = [stability_time(hh, hh_phi, r, range(2, 29)).T_est for r in rhos]
    assert all(b > a for a, b in zip(T, T[1:]))
    slopes = [math.log(T[i + 1] / T[i]) / math.log(2) for i in range(len(T) - 1)]
    assert all(b > a for a, b in zip(slopes, slopes[1:]))


def test_stability_rejects_bad_input(hh, hh_phi):
    with pytest.raises(ValueError):
        stability_time(hh, hh_phi, -1.0, [4])
    with pytest.raises(ValueError):
        stability_time(hh, hh_phi, 0.1, [40])


# --------------------------------------------------------------------------
# level maps


def test_level_map_origin_node(hh_phi):
    gm = level_map(hh_phi, 0.01, (np.array([0.0, 0.5]), np.array([0.0])), 8)
    assert abs(gm.y1[0, 0] - 0.1414214) <= 1e-7
    assert math.isfinite(gm.phi[0, 0])
    assert not gm.admissible[1, 0] and math.isnan(gm.phi[1, 0])


def test_level_map_energy_constraint(hh, hh_phi):
    gm = level_map(hh_phi, 1 / 12, 41, 10)
    assert 0.3 < gm.admissible.mean() < 1.0
    for i, j in zip(*np.nonzero(gm.admissible)):
        z = (0.0, gm.x2[i], gm.y1[i, j], gm.y2[j])
        assert abs(energy(hh, z) - 1 / 12) <= 1e-12


def test_level_map_low_energy_agreement(hh_phi):
    a = level_map(hh_phi, 0.01, 101, 8)
    b = level_map(hh_phi, 0.01, 101, 20)
    assert relative_rms(a, b) <= 1e-3


# --------------------------------------------------------------------------
# orbits and sections


def test_harmonic_sections_lie_on_circles():
    H = ModelSpec("harmonic", 2, (1.0, 1.4142136)).expansion()
    z0 = random_initial_states(H, 0.02, 1, seed=3)[0]
    tr = integrate_orbit(H, z0, 1e-3, 200.0)
    r2 = tr.sections[:, 1] ** 2 + tr.sections[:, 3] ** 2
    assert len(r2) > 20
    assert np.ptp(r2) <= 1e-6
    assert np.all(np.abs(tr.sections[:, 0]) <= 1e-10)
    assert np.all(tr.sections[:, 2] > 0)  # dx1/dt = y1 > 0


def test_section_points_on_energy_surface(hh):
    sec = poincare_section(hh, 0.01, n_orbits=3, t_max=300.0, seed=5)
    assert len(sec.points) == 3
    z0 = random_initial_states(hh, 0.01, 3, seed=5)
    assert np.array_equal(sec.initial, z0)
    for z in z0:
        tr = integrate_orbit(hh, z, 1e-3, 300.0)
        for s in tr.sections:
            assert abs(energy(hh, s) - 0.01) <= 1e-8


def test_drift_guard(hh):
    z0 = random_initial_states(hh, 0.1, 1, seed=1)[0]
    with pytest.raises(AccuracyError, match="smaller dt"):
        integrate_orbit(hh, z0, 0.5, 200.0)


def test_phi_nearly_conserved_along_orbit(hh, hh_phi):
    z0 = random_initial_states(hh, 0.01, 1, seed=11)[0]
    tr = integrate_orbit(hh, z0, 1e-3, 1e4)
    v8 = phi_variation(hh_phi.truncate(8), tr)
    v4 = phi_variation(hh_phi.truncate(4), tr)
    assert v8 <= 1e-4 and v8 < v4


# --------------------------------------------------------------------------
# CSV output


def read_csv(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    head = [ln for ln in lines if ln.startswith("#")]
    rows = list(csv.reader(ln for ln in lines if not ln.startswith("#")))
    return head, rows


def test_csv_writers(tmp_path, hh, hh_phi):
    write_norms_csv(tmp_path / "n.csv", norm_sequence(hh_phi.truncate(8)), {"model": "henon-heiles"})
    head, rows = read_csv(tmp_path / "n.csv")
    assert rows[0] == ["s", "norm", "root", "ratio", "twostep"]
    assert rows[1][0] == "2" and rows[1][2] == ""
    assert any("model: henon-heiles" in h for h in head)

    gm = level_map(hh_phi, 0.01, 5, 8)
    write_grid_csv(tmp_path / "g.csv", gm)
    head, rows = read_csv(tmp_path / "g.csv")
    assert rows[0] == ["x2", "y2", "admissible", "phi"] and len(rows) == 26
    assert any("energy" in h for h in head)

    sec = poincare_section(hh, 0.01, 2, 50.0, seed=1)
    write_sections_csv(tmp_path / "s.csv", sec)
    head, rows = read_csv(tmp_path / "s.csv")
    assert rows[0] == ["orbit_id", "x2", "y2"]
    assert any("dt" in h for h in head) and any("x1=0" in h for h in head)

    est = [stability_time(hh, hh_phi, r, range(4, 20)) for r in (0.05, 0.1)]
    write_stability_csv(tmp_path / "t.csv", est)
    head, rows = read_csv(tmp_path / "t.csv")
    assert rows[0] == ["rho0", "s_opt", "T_est"] and len(rows) == 3
    assert any("rho0^2" in h for h in head)


def test_model_spec_rejects_low_degree_terms():
    with pytest.raises(ValueError):
        ModelSpec("bad", 2, (1, 1), {(1, 1, 0, 0): 1.0}).expansion()
    H = ModelSpec("quartic", 2, (1, 1), {(4, 0, 0, 0): 0.25}).expansion()
    assert H.order == 2 and H.part(1).is_zero()
    assert isinstance(H.part(2), HomogeneousBlock)
    normalize(H, 4)
    assert first_integral(normalize(H, 4)).s_max == 6
