import numpy as np
import pytest

from sbcstab import collinear
from sbcstab.errors import NewtonDiverged
from sbcstab.integrate import IntegratorConfig, propagate
from sbcstab.orbits import (ShootingConfig, continue_family, ladder_guess,
                            planar_orbit_with_zeta, solve_collinear, solve_planar)

R1 = 2.295592258717
T4 = 0.817348080989685
XI = 1.62047369909693
ETA = 2.57486992651942
TIGHT = IntegratorConfig().with_tol(1e-13)


def test_collinear_m1_initial_radius(orbit_m1):
    assert abs(orbit_m1.R - R1) < 1e-9
    assert round(orbit_m1.R, 5) == 2.29559
    assert orbit_m1.residual < 1e-10
    assert abs(orbit_m1.gamma()) < 1e-10


def test_collinear_m1_quarter_period(orbit_m1):
    assert abs(orbit_m1.fundamental_time - T4) < 1e-9


@pytest.mark.parametrize("m", [1.0, 10.0])
def test_collinear_half_period_collision(m):
    orbit = solve_collinear(m)
    run = propagate(orbit.field, orbit.initial_state, 2 * orbit.fundamental_time, TIGHT)
    assert run.state[0] == pytest.approx(-orbit.R, abs=1e-7)
    assert run.state[3] == pytest.approx(-collinear.initial_momentum(m), abs=1e-7 * max(1, m**1.5))
    full = propagate(orbit.field, orbit.initial_state, orbit.period, TIGHT)
    assert np.max(np.abs(full.state - orbit.initial_state)) < 1e-7


def test_collinear_fd_jacobian_agrees(orbit_m1):
    fd = solve_collinear(1.0, guess_R=2.2, cfg=ShootingConfig(fd_jacobian=True))
    assert abs(fd.R - orbit_m1.R) < 1e-9


def test_collinear_newton_quadratic_tail():
    orbit = solve_collinear(1.0, guess_R=2.2, cfg=ShootingConfig(newton_tol=1e-13))
    hist = orbit.residual_history
    assert len(hist) >= 3
    for a, b in zip(hist, hist[1:]):
        if 1e-11 < a < 1e-4:
            assert b < a ** 1.5


def test_collinear_errors():
    with pytest.raises(ValueError):
        solve_collinear(0.0)
    with pytest.raises(NewtonDiverged):
        solve_collinear(1.0, guess_R=2.0, cfg=ShootingConfig(max_newton_iters=1))
    with pytest.raises(ValueError):
        ShootingConfig(newton_tol=0.0)


def test_ladder_guess_close():
    for m in (0.05, 0.7, 3.3, 42.0):
        assert abs(ladder_guess(m) - solve_collinear(m).R) < 0.05 * max(1.0, m)


def test_planar_period_8(planar8):
    xi, eta = planar8.seed.zeta, planar8.seed.eta
    assert abs(xi - XI) < 1e-9
    assert abs(eta - ETA) < 1e-9
    assert planar8.E == pytest.approx(-1.142329388, abs=1e-6)
    assert planar8.residual < 1e-10
    assert planar8.fundamental_time == 1.0
    assert abs(planar8.gamma()) < 1e-10


def test_planar_scaled_to_unit(planar8):
    unit = planar8.scaled(1 / planar8.seed.zeta)
    assert unit.seed.zeta == pytest.approx(1.0)
    assert unit.fundamental_time == pytest.approx(XI, abs=1e-9)
    assert unit.E == pytest.approx(-2.999682732, abs=1e-6)
    same = planar_orbit_with_zeta(1.0)
    assert np.allclose(same.initial_state, unit.initial_state, atol=1e-14)


def test_planar_symmetry_states(planar8):
    z, v0 = planar8.seed.zeta, planar8.seed.v0
    q = propagate(planar8.field, planar8.initial_state, planar8.period / 4, TIGHT).state
    assert np.max(np.abs(q - [-z, z, -4 * v0, -4 * v0])) < 1e-7
    full = propagate(planar8.field, planar8.initial_state, planar8.period, TIGHT).state
    assert np.max(np.abs(full - planar8.initial_state)) < 1e-7


def test_planar_other_period_and_fd(planar8):
    p6 = solve_planar(6.0)
    # the scaling symmetry maps the period-8 orbit onto the period-6 one
    assert p6.seed.zeta == pytest.approx(planar8.seed.zeta * 8 / 6, rel=1e-9)
    assert p6.seed.eta == pytest.approx(planar8.seed.eta, rel=1e-9)
    fd = solve_planar(8.0, cfg=ShootingConfig(fd_jacobian=True))
    assert np.allclose(fd.initial_state, planar8.initial_state, atol=1e-9)


def test_planar_errors():
    with pytest.raises(ValueError):
        solve_planar(0.0)
    with pytest.raises(NewtonDiverged):
        solve_planar(8.0, guess=(1.0, 2.0), cfg=ShootingConfig(max_newton_iters=1))


def test_continue_family_single(orbit_m1):
    (o,) = continue_family([1.0])
    assert o.R == pytest.approx(orbit_m1.R, abs=1e-12)


def test_continue_family_continuity():
    fam = continue_family([0.99, 1.0, 1.01])
    cold = [solve_collinear(m, guess_R=R1) for m in (0.99, 1.0, 1.01)]
    for a, b in zip(fam, cold):
        assert a.R == pytest.approx(b.R, abs=1e-9)
    assert abs(fam[1].R - fam[0].R) < 0.02 and abs(fam[2].R - fam[1].R) < 0.02


def test_continue_family_jobs_independent():
    grid = np.round(np.arange(0.8, 1.6, 0.05), 10)
    a = continue_family(grid, jobs=1, block_size=4)
    b = continue_family(grid, jobs=3, block_size=4)
    assert [o.R for o in a] == [o.R for o in b]


def test_continue_family_validation():
    with pytest.raises(ValueError):
        continue_family([1.0, 0.5])
    with pytest.raises(ValueError):
        continue_family([-1.0, 0.5])
    with pytest.raises(NewtonDiverged):
        continue_family([1.3, 1.4], cfg=ShootingConfig(newton_tol=1e-30, max_newton_iters=2))
