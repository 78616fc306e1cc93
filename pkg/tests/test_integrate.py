import math
from fractions import Fraction as F

import numpy as np
import pytest

from sbcstab import _pycore
from sbcstab.collinear import CollinearSystem
from sbcstab.errors import MaxStepsExceeded, NoEventFound, StepUnderflow
from sbcstab.integrate import (IntegratorConfig, integrate, integrate_to_event,
                               integrate_with_variational, propagate)
from sbcstab.planar import PlanarSeed, PlanarSystem, energy_from_seed
from sbcstab.stability import build_Y0_collinear, build_Y0_planar
from sbcstab.symplectic4 import J, S_COLLINEAR, S_G

T4_PAPER = 0.817348080989685
R1_PAPER = 2.295592258717
XI_PAPER = 1.62047369909693
ETA_PAPER = 2.57486992651942


def harmonic(s, y):
    return np.array([y[1], -y[0]])


# Fehlberg coefficients written out as exact fractions, independent of the
# floating-point constants in the kernel.
C = [F(0), F(1, 4), F(3, 8), F(12, 13), F(1), F(1, 2)]
A = [[],
     [F(1, 4)],
     [F(3, 32), F(9, 32)],
     [F(1932, 2197), F(-7200, 2197), F(7296, 2197)],
     [F(439, 216), F(-8), F(3680, 513), F(-845, 4104)],
     [F(-8, 27), F(2), F(-3544, 2565), F(1859, 4104), F(-11, 40)]]
B5 = [F(16, 135), F(0), F(6656, 12825), F(28561, 56430), F(-9, 50), F(2, 55)]
B4 = [F(25, 216), F(0), F(1408, 2565), F(2197, 4104), F(-1, 5), F(0)]


def test_tableau_row_sums_and_order_conditions():
    for c, row in zip(C, A):
        assert sum(row, F(0)) == c
    for k in range(5):
        assert sum(b * c ** k for b, c in zip(B5, C)) == F(1, k + 1)
    for k in range(4):
        assert sum(b * c ** k for b, c in zip(B4, C)) == F(1, k + 1)


def test_kernel_constants_match_tableau():
    kernel_a = [[], [_pycore.A21], [_pycore.A31, _pycore.A32],
                [_pycore.A41, _pycore.A42, _pycore.A43],
                [_pycore.A51, _pycore.A52, _pycore.A53, _pycore.A54],
                [_pycore.A61, _pycore.A62, _pycore.A63, _pycore.A64, _pycore.A65]]
    for exact, got in zip(A, kernel_a):
        assert got == pytest.approx([float(v) for v in exact], rel=1e-15)
    b = [_pycore.B1, 0.0, _pycore.B3, _pycore.B4, _pycore.B5, _pycore.B6]
    assert b == pytest.approx([float(v) for v in B5], rel=1e-15)
    e = [_pycore.E1, 0.0, _pycore.E3, _pycore.E4, _pycore.E5, _pycore.E6]
    assert e == pytest.approx([float(x - y) for x, y in zip(B5, B4)], rel=1e-14, abs=1e-16)


def test_harmonic_full_circle():
    traj = integrate(harmonic, [1.0, 0.0], 2 * math.pi)
    assert traj.s[-1] == 2 * math.pi
    assert np.max(np.abs(traj.final - [1.0, 0.0])) < 1e-9


def test_tolerance_controls_global_error():
    errs = []
    for tol in (1e-6, 1e-8, 1e-10):
        traj = integrate(harmonic, [1.0, 0.0], 10.0, IntegratorConfig().with_tol(tol))
        errs.append(abs(traj.final[0] - math.cos(10.0)))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-8


def test_fixed_step_convergence_order():
    # a single unclamped step of size h has local error O(h^6)
    y0 = np.array([1.0, 0.0])
    errs = []
    for h in (0.2, 0.1):
        y5, _ = _pycore._stages(harmonic, 0.0, y0, harmonic(0.0, y0), h)
        errs.append(abs(y5[0] - math.cos(h)))
    assert 5.5 < math.log2(errs[0] / errs[1]) < 6.5


def test_s_eval_lands_exactly():
    s = np.array([0.0, 0.5, 1.25, 3.0])
    traj = integrate(harmonic, [1.0, 0.0], 3.0, s_eval=s)
    assert np.array_equal(traj.s, s)
    assert np.allclose(traj.y[:, 0], np.cos(s), atol=1e-10)


def test_reversibility_collinear():
    system = CollinearSystem(1.0)
    y0 = np.array([R1_PAPER, 0.0, 0.0, 2.0])
    fwd = propagate(system, y0, 0.5)
    back = integrate(lambda s, y: -system(s, y), fwd.state, 0.5)
    assert np.max(np.abs(back.final - y0)) < 1e-9


def test_events_component_and_callable():
    s, y = integrate_to_event(harmonic, [1.0, 0.0], 0, direction=-1)
    assert s == pytest.approx(math.pi / 2, abs=1e-12)
    assert abs(y[0]) < 1e-14
    s, _ = integrate_to_event(harmonic, [1.0, 0.0], lambda s, y: y[0] - 0.5, direction=-1)
    assert s == pytest.approx(math.pi / 3, abs=1e-11)
    s, _ = integrate_to_event(harmonic, [1.0, 0.0], 0, direction=+1)
    assert s == pytest.approx(1.5 * math.pi, abs=1e-11)


def test_event_zero_at_start_rejected():
    with pytest.raises(ValueError):
        integrate_to_event(harmonic, [0.0, 1.0], 0)


def test_no_event():
    with pytest.raises(NoEventFound):
        integrate_to_event(lambda s, y: np.array([1.0]), [1.0], 0, s_max=1.0)


def test_step_underflow_on_blowup():
    with pytest.raises(StepUnderflow):
        integrate(lambda s, y: y * y, [1.0], 2.0)


def test_max_steps():
    with pytest.raises(MaxStepsExceeded):
        integrate(harmonic, [1.0, 0.0], 100.0, IntegratorConfig(max_steps=5))


@pytest.mark.parametrize("kwargs", [dict(abs_tol=0), dict(h_min=1.0, h_init=0.1),
                                    dict(max_steps=0)])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        IntegratorConfig(**kwargs)


def test_variational_zero_field():
    zero = lambda s, y: np.zeros(4)
    state, Y = integrate_with_variational(zero, lambda s, y: np.zeros((4, 4)),
                                          np.ones(4), np.eye(4), 3.0)
    assert np.array_equal(Y, np.eye(4))
    assert np.array_equal(state, np.ones(4))


def test_variational_linear_system_matches_expm():
    from scipy.linalg import expm
    M = np.array([[0.1, 1.0, 0, 0], [-1.0, 0, 0.2, 0], [0, 0, 0, 1.0], [0.3, 0, -2.0, -0.1]])
    _, Y = integrate_with_variational(lambda s, y: M @ y, lambda s, y: M,
                                      np.zeros(4), np.eye(4), 2.0)
    assert np.max(np.abs(Y - expm(2.0 * M))) < 1e-8


def test_variational_matches_finite_differences():
    system = CollinearSystem(1.0)
    y0 = np.array([R1_PAPER, 0.3, 0.1, 2.0])
    _, Y = integrate_with_variational(system, None, y0, np.eye(4), 0.4)
    h = 1e-6
    fd = np.empty((4, 4))
    for j in range(4):
        d = np.zeros(4)
        d[j] = h
        fd[:, j] = (propagate(system, y0 + d, 0.4).state - propagate(system, y0 - d, 0.4).state) / (2 * h)
    assert np.max(np.abs(Y - fd)) < 1e-6


def test_compiled_and_generic_paths_agree():
    system = CollinearSystem(1.0)
    y0 = np.array([R1_PAPER, 0.0, 0.0, 2.0])
    fast = propagate(system, y0, 0.6, Y0=np.eye(4))
    generic = propagate(lambda s, y: system(s, y), y0, 0.6, Y0=np.eye(4),
                        jacobian=lambda s, y: system.jacobian(s, y))
    assert np.max(np.abs(fast.state - generic.state)) < 1e-13
    assert np.max(np.abs(fast.Y - generic.Y)) < 1e-12


# Values quoted with the orbits.

def test_collinear_quoted_quarter_period_zero():
    traj = integrate(CollinearSystem(1.0), [R1_PAPER, 0.0, 0.0, 2.0], T4_PAPER)
    assert abs(traj.final[0]) < 1e-6


def test_collinear_event_at_quoted_quarter_period():
    s, _ = integrate_to_event(CollinearSystem(1.0), [R1_PAPER, 0.0, 0.0, 2.0], 0, -1)
    assert abs(s - T4_PAPER) < 1e-8


def test_planar_quoted_seed_reaches_collision_at_one():
    seed = PlanarSeed.from_momentum(XI_PAPER, ETA_PAPER)
    traj = integrate(PlanarSystem(energy_from_seed(seed)), seed.state, 1.0)
    assert abs(traj.final[0]) < 1e-6
    assert abs(traj.final[3]) < 1e-6


def test_planar_unit_orbit_event_time():
    seed = PlanarSeed.from_momentum(1.0, ETA_PAPER)
    s, _ = integrate_to_event(PlanarSystem(energy_from_seed(seed)), seed.state, 0, -1)
    assert abs(s - XI_PAPER) < 1e-8


def test_variational_kappa_collinear():
    Y0 = build_Y0_collinear()
    _, B = integrate_with_variational(CollinearSystem(1.0), None, [R1_PAPER, 0, 0, 2.0], Y0,
                                      T4_PAPER)
    assert abs(B[:, 1] @ S_COLLINEAR @ J @ B[:, 3] - 0.598490) < 1e-4


def test_variational_kappa_planar():
    seed = PlanarSeed.from_momentum(XI_PAPER, ETA_PAPER)
    E = energy_from_seed(seed)
    _, B = integrate_with_variational(PlanarSystem(E), None, seed.state,
                                      build_Y0_planar(seed, E), 1.0)
    assert abs(B[:, 1] @ S_G @ J @ B[:, 3] - -0.68024151010592) < 1e-6
