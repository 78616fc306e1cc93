"""Regularized collinear four-body problem with masses 1, m, m, 1.

Bodies sit at x1 >= x2 >= 0 and their mirror images.  With
``q1 = x1 - x2``, ``q2 = 2 x2``, ``Q_i^2 = q_i``, ``P_i = 2 Q_i p_i`` and
fictitious time ``dt/ds = Q1^2 Q2^2`` the motion is the zero level set of
the extended Hamiltonian ``gamma``.  The energy is fixed at E = -1.
"""
from dataclasses import dataclass
from typing import ClassVar

import numpy as np

from . import _pycore
from .errors import CollisionSingularity, TotalCollapse

ENERGY = -1.0


def _check(state):
    y = np.asarray(state, dtype=float)
    if y[0] == 0.0 and y[1] == 0.0:
        raise TotalCollapse("Q1 = Q2 = 0 (total collapse)")
    return y


def gamma(state, m):
    """Regularized extended Hamiltonian; zero along physical motions."""
    Q1, Q2, P1, P2 = _check(state)
    q1s, q2s = Q1 * Q1, Q2 * Q2
    kinetic = ((1.0 + 1.0 / m) * q2s * P1 * P1 / 16.0
               + (-Q1 * Q2 * P1 * P2 + q1s * P2 * P2) / (4.0 * m))
    potential = (-m * m * q1s - 2.0 * m * q2s
                 - 2.0 * m * q1s * q2s / (q1s + q2s)
                 - q1s * q2s / (2.0 * q1s + q2s)
                 - ENERGY * q1s * q2s)
    return float(kinetic + potential)


def field(state, m):
    """Right-hand side ``(Q1', Q2', P1', P2')`` in fictitious time."""
    return np.array(_pycore.collinear_field(_check(state), m, ENERGY))


def linearization(state, m):
    """Analytic Jacobian ``J D^2 gamma`` of :func:`field`."""
    return np.array(_pycore.collinear_jacobian(_check(state), m, ENERGY))


@dataclass(frozen=True)
class CollinearSystem:
    """The vector field for a fixed mass ratio, usable as an integrator field."""

    m: float
    kernel_id: ClassVar[int] = _pycore.COLLINEAR

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError("mass ratio m must be positive")

    @property
    def kernel_params(self):
        return (float(self.m), ENERGY)

    def __call__(self, s, y):
        return np.array(_pycore.collinear_field(y, self.m, ENERGY))

    def jacobian(self, s, y):
        return np.array(_pycore.collinear_jacobian(y, self.m, ENERGY))


def initial_momentum(m):
    """P2 at the inner binary collision that starts the orbit: ``2 m^(3/2)``."""
    if not m > 0:
        raise ValueError("mass ratio m must be positive")
    return 2.0 * m ** 1.5


def initial_state(R, m):
    """State ``(R, 0, 0, 2 m^(3/2))`` at the inner binary collision."""
    return np.array([R, 0.0, 0.0, initial_momentum(m)])


def to_physical(state):
    """Return ``(x1, x2, t_weight)``; ``t_weight = dt/ds``."""
    Q1, Q2 = float(state[0]), float(state[1])
    q1, q2 = Q1 * Q1, Q2 * Q2
    return q1 + 0.5 * q2, 0.5 * q2, q1 * q2


def from_physical(x1, x2):
    """Regularized positions ``(Q1, Q2)`` (non-negative roots) of x1 >= x2 >= 0."""
    return np.sqrt(x1 - x2), np.sqrt(2.0 * x2)


def physical_momenta(state):
    """Canonical momenta ``(p1, p2)`` conjugate to ``(q1, q2)``.

    Raises
    ------
    CollisionSingularity
        At a binary collision (Q1 = 0 or Q2 = 0).
    """
    Q1, Q2, P1, P2 = (float(v) for v in state)
    if Q1 == 0.0 or Q2 == 0.0:
        raise CollisionSingularity("momenta undefined at a binary collision")
    return P1 / (2.0 * Q1), P2 / (2.0 * Q2)


def physical_energy(state, m):
    """Newtonian energy of the configuration, using the original
    ``x``/``w`` coordinates (``w1 = 2 xdot1``, ``w2 = 2 m xdot2``)."""
    x1, x2, _ = to_physical(state)
    p1, p2 = physical_momenta(state)
    w1, w2 = p1, 2.0 * p2 - p1
    return (0.25 * w1 * w1 + w2 * w2 / (4.0 * m) - 1.0 / (2.0 * x1) - m * m / (2.0 * x2)
            - 2.0 * m / (x1 + x2) - 2.0 * m / (x1 - x2))


def mass_ratio_from_m1(m1):
    """Convert the alternative parametrization (outer mass ``m1`` with
    ``m1 + m2 = 2``) to the inner/outer ratio ``m = (2 - m1) / m1``."""
    if not 0.0 < m1 < 2.0:
        raise ValueError("m1 must lie in (0, 2)")
    return (2.0 - m1) / m1
