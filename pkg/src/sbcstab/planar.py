"""Regularized planar four-body problem with equal masses.

Body 1 is at ``(x1, x2)``; the others at ``(x2, x1)``, ``(-x1, -x2)`` and
``(-x2, -x1)``.  With ``q1 = x1 - x2``, ``q2 = x1 + x2`` and the same
square-root regularization as the collinear problem, motions with energy
``E`` lie on the zero level of :func:`gamma`.  Unlike the collinear case
``E`` is a free parameter.
"""
import math
from dataclasses import dataclass
from typing import ClassVar

import numpy as np

from . import _pycore
from .errors import CollisionSingularity, TotalCollapse

SQRT2 = math.sqrt(2.0)


def _check(state):
    y = np.asarray(state, dtype=float)
    if y[0] == 0.0 and y[1] == 0.0:
        raise TotalCollapse("Q1 = Q2 = 0 (total collapse)")
    return y


@dataclass(frozen=True)
class PlanarSeed:
    """Symmetric initial data ``Q1 = Q2 = zeta``, ``-P1 = P2 = 4 v0``."""

    zeta: float
    v0: float

    @classmethod
    def from_momentum(cls, zeta, eta):
        """Build from ``eta = P2(0) = 4 v0``."""
        return cls(zeta, eta / 4.0)

    @property
    def eta(self):
        return 4.0 * self.v0

    @property
    def state(self):
        return np.array([self.zeta, self.zeta, -4.0 * self.v0, 4.0 * self.v0])


def gamma(state, E):
    Q1, Q2, P1, P2 = _check(state)
    q1s, q2s = Q1 * Q1, Q2 * Q2
    return float((P1 * P1 * q2s + P2 * P2 * q1s) / 16.0 - SQRT2 * (q1s + q2s)
                 - SQRT2 * q1s * q2s / math.sqrt(q1s * q1s + q2s * q2s) - E * q1s * q2s)


def field(state, E):
    return np.array(_pycore.planar_field(_check(state), E))


def linearization(state, E):
    return np.array(_pycore.planar_jacobian(_check(state), E))


@dataclass(frozen=True)
class PlanarSystem:
    """The vector field at energy ``E``, usable as an integrator field."""

    E: float
    kernel_id: ClassVar[int] = _pycore.PLANAR

    @property
    def kernel_params(self):
        return (float(self.E), 0.0)

    def __call__(self, s, y):
        return np.array(_pycore.planar_field(y, self.E))

    def jacobian(self, s, y):
        return np.array(_pycore.planar_jacobian(y, self.E))


def energy_from_seed(seed):
    """Energy that puts the seed state on the zero level of ``gamma``:
    ``E = (2 v0^2 - 2 sqrt(2) - 1) / zeta^2``."""
    if not seed.zeta > 0:
        raise ValueError("zeta must be positive")
    return (2.0 * seed.v0 ** 2 - 2.0 * SQRT2 - 1.0) / seed.zeta ** 2


def scale_orbit(seed, E, period, eps):
    """Apply the scaling symmetry ``(Q, P)(s) -> (eps Q(eps s), P(eps s))``.

    Positions scale by ``eps``, momenta are unchanged, the energy becomes
    ``E / eps^2`` and the period ``period / eps``.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    return PlanarSeed(eps * seed.zeta, seed.v0), E / eps ** 2, period / eps


def to_physical(state):
    """Return ``(x1, x2, t_weight)`` for body 1; ``t_weight = dt/ds``."""
    Q1, Q2 = float(state[0]), float(state[1])
    q1, q2 = Q1 * Q1, Q2 * Q2
    return 0.5 * (q1 + q2), 0.5 * (q2 - q1), q1 * q2


def body_positions(state):
    """Positions of all four bodies as a (4, 2) array."""
    x1, x2, _ = to_physical(state)
    return np.array([[x1, x2], [x2, x1], [-x1, -x2], [-x2, -x1]])


def physical_momenta(state):
    """Canonical momenta ``(p1, p2)`` conjugate to ``(q1, q2)``."""
    Q1, Q2, P1, P2 = (float(v) for v in state)
    if Q1 == 0.0 or Q2 == 0.0:
        raise CollisionSingularity("momenta undefined at a binary collision")
    return P1 / (2.0 * Q1), P2 / (2.0 * Q2)


def physical_energy(state):
    """Newtonian energy in the original coordinates (``w = 4 xdot``)."""
    x1, x2, _ = to_physical(state)
    p1, p2 = physical_momenta(state)
    w1, w2 = p1 + p2, p2 - p1
    return ((w1 * w1 + w2 * w2) / 8.0 - SQRT2 / abs(x1 - x2) - SQRT2 / abs(x1 + x2)
            - 1.0 / math.hypot(x1, x2))
