import numpy as np
import pytest

from sbcstab import planar
from sbcstab.errors import BracketInvalid, DegenerateTangent, ResidualExceeded
from sbcstab.orbits import solve_collinear
from sbcstab.stability import (DEFAULT_BOUNDS, analyze, build_Y0_collinear, build_Y0_planar,
                               critical_mass, crossings, mass_scan, symmetry_residuals,
                               verify_factorization)
from sbcstab.symplectic4 import (J, LAMBDA, Q_PLANAR, S_COLLINEAR, k_block_stable,
                                 symplectic_defect)


def test_Y0_collinear_exact():
    Y0 = build_Y0_collinear()
    assert np.array_equal(Y0.T @ J @ Y0, J)
    assert np.array_equal(Y0.T @ Y0, np.eye(4))
    assert np.array_equal(Y0.T @ S_COLLINEAR @ Y0, LAMBDA)
    assert np.array_equal(Y0[:, 2], [0, 1, 0, 0])


def test_Y0_collinear_third_column_is_tangent(orbit_m1):
    f = orbit_m1.field(0.0, orbit_m1.initial_state)
    assert np.allclose(build_Y0_collinear()[:, 2], f / np.linalg.norm(f), atol=1e-12)


def test_Y0_planar(planar8):
    seed, E = planar8.seed, planar8.E
    Y0 = build_Y0_planar(seed, E)
    assert np.max(np.abs(Y0.T @ Y0 - np.eye(4))) < 1e-14
    assert symplectic_defect(Y0) < 1e-14
    assert np.max(np.abs(np.linalg.inv(Y0) @ Q_PLANAR @ Y0 - LAMBDA)) < 1e-13
    f = planar.field(seed.state, E)
    assert np.allclose(Y0[:, 2], f / np.linalg.norm(f), atol=1e-13)
    assert np.allclose(Y0[:, 0], J @ Y0[:, 2], atol=1e-15)


def test_Y0_planar_degenerate():
    with pytest.raises(DegenerateTangent):
        build_Y0_planar(planar.PlanarSeed(1.0, 0.0), 0.0)


def test_analyze_collinear_m1(orbit_m1):
    rep = analyze(orbit_m1, strict=True)
    assert rep.kappa == pytest.approx(0.598490, abs=1e-4)
    assert rep.stable and not rep.marginal and rep.ok
    assert rep.K[0, 0] == pytest.approx(-1.0, abs=1e-6)
    assert rep.stable == k_block_stable(rep.K)
    assert abs(rep.kappa_direct - rep.kappa_from_W) < 1e-6


def test_analyze_planar(planar8):
    rep = analyze(planar8, strict=True)
    assert rep.kappa == pytest.approx(-0.68024151010592, abs=1e-6)
    assert rep.stable
    assert rep.K[0, 0] == pytest.approx(1.0, abs=1e-6)


def test_analyze_collinear_m10_unstable():
    rep = analyze(solve_collinear(10.0))
    assert abs(rep.kappa) > 1 and not rep.stable and rep.ok


def test_strict_raises_with_report(orbit_m1):
    with pytest.raises(ResidualExceeded) as info:
        analyze(orbit_m1, bounds={"block": 0.0}, strict=True)
    assert info.value.report.kappa == pytest.approx(0.5985, abs=1e-4)
    with pytest.raises(ValueError):
        analyze(orbit_m1, bounds={"bogus": 1.0})


@pytest.mark.parametrize("which", ["collinear", "planar"])
def test_verify_factorization(which, orbit_m1, planar8):
    orbit = orbit_m1 if which == "collinear" else planar8
    rep = verify_factorization(orbit)
    assert rep.ok, rep.failures
    assert rep.factorization_residual < 1e-6
    assert rep.residuals["reversal"] < 1e-6
    assert set(DEFAULT_BOUNDS) == set(rep.residuals)


def test_symmetry_relations_hold(orbit_m1, planar8):
    assert max(symmetry_residuals(orbit_m1)) < 1e-8
    assert max(symmetry_residuals(planar8)) < 1e-8


@pytest.mark.parametrize("eps", [0.5, 1.62047369909693, 3.0])
def test_scaling_invariance(planar8, eps):
    assert analyze(planar8.scaled(eps)).kappa == pytest.approx(analyze(planar8).kappa, abs=1e-6)


@pytest.mark.parametrize("m,expected", [(0.5, True), (1.0, True), (2.0, True), (40.0, True),
                                        (50.0, True), (5.0, False), (10.0, False),
                                        (20.0, False), (30.0, False)])
def test_verdicts(m, expected):
    assert analyze(solve_collinear(m)).stable is expected


def test_mass_scan_matches_analyze(orbit_m1):
    (row,) = mass_scan([1.0])
    assert row.kappa == analyze(orbit_m1).kappa
    assert row.converged and row.stable


def test_mass_scan_crossing_and_determinism():
    grid = np.round(np.arange(2.70, 3.0001, 0.01), 10)
    a = mass_scan(grid, jobs=1, block_size=7)
    b = mass_scan(grid, jobs=4, block_size=7)
    assert a == b
    assert all(r.converged for r in a)
    (c,) = crossings(a)
    assert 2.82 < c < 2.84


def test_mass_scan_failures_flagged():
    from sbcstab.orbits import ShootingConfig
    rows = mass_scan([1.0, 1.1], shooting=ShootingConfig(newton_tol=1e-30, max_newton_iters=1))
    assert not any(r.converged for r in rows)
    assert all(np.isnan(r.kappa) for r in rows)


def test_critical_mass_first():
    assert critical_mass((2.5, 3.2)) == pytest.approx(2.83, abs=0.01)


def test_critical_mass_second():
    assert critical_mass((34.0, 37.0)) == pytest.approx(35.4, abs=0.1)


def test_critical_mass_bad_bracket():
    with pytest.raises(BracketInvalid):
        critical_mass((1.0, 2.0))
    with pytest.raises(BracketInvalid):
        critical_mass((3.0, 2.0))


def test_crossings_interpolation():
    from sbcstab.stability import ScanRow
    rows = [ScanRow(1.0, 0, 0, 0.9, True, True), ScanRow(2.0, 0, 0, 1.1, False, True),
            ScanRow(3.0, 0, 0, 1.2, False, False)]
    assert crossings(rows) == [pytest.approx(1.5)]


@pytest.fixture(scope="module")
def full_scan():
    from sbcstab.cli import mass_grid
    return mass_scan(mass_grid(0.01, 50.0, 0.01), jobs=2)


@pytest.mark.slow
def test_full_scan_converges(full_scan):
    assert len(full_scan) == 5000
    assert all(r.converged for r in full_scan)


@pytest.mark.slow
def test_full_scan_crossing_windows(full_scan):
    found = crossings(full_scan)
    assert len(found) == 2
    assert 2.82 < found[0] < 2.84
    assert 35.3 < found[1] < 35.5
