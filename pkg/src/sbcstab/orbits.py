"""Shooting solvers for the periodic simultaneous-binary-collision orbits.

Collinear family
    Start at the inner binary collision ``(R, 0, 0, 2 m^(3/2))`` and stop at
    the first decreasing zero of Q1.  The reversal ``-S`` fixes the state at
    T/4, which forces ``P2 = 0`` there as well, so ``R`` is the root of the
    scalar map ``R -> P2(s*)``.

Planar orbit
    Start at ``(xi, xi, -eta, eta)`` with the energy fixed by ``gamma = 0``;
    for a prescribed period ``T`` require ``Q1 = P2 = 0`` at ``s = T/8``.

Newton derivatives come from the variational flow; a central
finite-difference Jacobian is available for cross-checking.
"""
import functools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import collinear, planar
from .errors import IntegrationError, NewtonDiverged, NoEventFound, SBCError
from .integrate import ORBIT_CONFIG, IntegratorConfig, propagate

log = logging.getLogger(__name__)

R1_GUESS = 2.29559
PLANAR_GUESS = (1.6, 2.6)  # (xi, eta) for period 8
# Collinear continuation ladder: rungs at m = 2**(k / RUNGS_PER_OCTAVE).
RUNGS_PER_OCTAVE = 16
DEFAULT_BLOCK = 50
EVENT_HORIZON = 200.0


@dataclass(frozen=True)
class ShootingConfig:
    newton_tol: float = 1e-10
    max_newton_iters: int = 30
    fd_jacobian: bool = False
    fd_step: float = 1e-7
    integrator: IntegratorConfig = ORBIT_CONFIG

    def __post_init__(self):
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")


@dataclass(frozen=True, eq=False)
class PeriodicOrbit:
    """A converged symmetric periodic orbit.

    ``fundamental_time`` is the first simultaneous binary collision time:
    T/4 for the collinear family and T/8 for the planar orbit.  ``param`` is
    the mass ratio ``m`` (collinear) or the energy ``E`` (planar).
    """

    system: str
    param: float
    initial_state: np.ndarray
    fundamental_time: float
    residual: float
    residual_history: tuple = dc_field(default=())

    @property
    def symmetry_order(self):
        return 4 if self.system == "collinear" else 8

    @property
    def period(self):
        return self.symmetry_order * self.fundamental_time

    @property
    def field(self):
        if self.system == "collinear":
            return collinear.CollinearSystem(self.param)
        return planar.PlanarSystem(self.param)

    @property
    def m(self):
        return self.param if self.system == "collinear" else None

    @property
    def R(self):
        return float(self.initial_state[0])

    @property
    def E(self):
        return collinear.ENERGY if self.system == "collinear" else self.param

    @property
    def seed(self):
        if self.system != "planar":
            raise AttributeError("only planar orbits have a seed")
        return planar.PlanarSeed(float(self.initial_state[0]), float(self.initial_state[3]) / 4.0)

    def gamma(self):
        """``gamma`` at the initial state (zero on the energy surface)."""
        if self.system == "collinear":
            return collinear.gamma(self.initial_state, self.param)
        return planar.gamma(self.initial_state, self.param)

    def scaled(self, eps):
        """Planar orbit mapped by the scaling symmetry with factor ``eps``."""
        if self.system != "planar":
            raise ValueError("scaling applies to the planar orbit only")
        seed, E, period = planar.scale_orbit(self.seed, self.param, self.period, eps)
        return PeriodicOrbit("planar", E, seed.state, period / 8.0, self.residual,
                             self.residual_history)


def _newton(shoot, x0, cfg, what):
    """Damped Newton on ``shoot(x) -> (residual_vector, jacobian)``."""
    x = np.atleast_1d(np.asarray(x0, dtype=float))
    history = []
    try:
        r, jac = shoot(x)
    except IntegrationError as exc:
        raise NewtonDiverged(f"{what}: initial guess failed ({exc})") from exc
    for _ in range(cfg.max_newton_iters + 1):
        norm = float(np.max(np.abs(r)))
        history.append(norm)
        if norm < cfg.newton_tol:
            return x, r, tuple(history)
        if len(history) > cfg.max_newton_iters:
            break
        try:
            dx = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError as exc:
            raise NewtonDiverged(f"{what}: singular Newton matrix") from exc
        lam = 1.0
        while True:
            trial = x + lam * dx
            try:
                r_new, jac_new = shoot(trial)
                if np.max(np.abs(r_new)) < norm:
                    break
            except IntegrationError:
                pass
            lam *= 0.5
            if lam < 1.0 / 128:
                raise NewtonDiverged(f"{what}: line search failed at |F|={norm:.3e}")
        x, r, jac = trial, r_new, jac_new
    raise NewtonDiverged(f"{what}: no convergence in {cfg.max_newton_iters} iterations "
                         f"(|F|={history[-1]:.3e})")


# --------------------------------------------------------------------------
# collinear family
# --------------------------------------------------------------------------

def _collinear_shot(m, R, cfg, with_jacobian=True):
    system = collinear.CollinearSystem(m)
    y0 = collinear.initial_state(R, m)
    if not with_jacobian:
        run = propagate(system, y0, EVENT_HORIZON, cfg.integrator, event=0, direction=-1)
    else:
        run = propagate(system, y0, EVENT_HORIZON, cfg.integrator, Y0=np.eye(4),
                        event=0, direction=-1)
    if not run.event:
        raise NoEventFound(f"Q1 never returned to zero (m={m}, R={R})")
    if not with_jacobian:
        return run.state[3], None, run.s, run.state
    f = system(run.s, run.state)
    Phi = run.Y
    # P2 at the moving event time: dP2/dR = Phi[3,0] + P2' ds*/dR
    dres = Phi[3, 0] - f[3] * Phi[0, 0] / f[0]
    return run.state[3], dres, run.s, run.state


def _collinear_newton(m, R_guess, cfg):
    h = cfg.fd_step

    def shoot(x):
        R = x[0]
        if not R > 0:
            raise NoEventFound("R must stay positive")
        if cfg.fd_jacobian:
            res = _collinear_shot(m, R, cfg, with_jacobian=False)[0]
            hi = _collinear_shot(m, R + h, cfg, with_jacobian=False)[0]
            lo = _collinear_shot(m, R - h, cfg, with_jacobian=False)[0]
            return np.array([res]), np.array([[(hi - lo) / (2 * h)]])
        res, dres, _, _ = _collinear_shot(m, R, cfg)
        return np.array([res]), np.array([[dres]])

    x, r, hist = _newton(shoot, [R_guess], cfg, f"collinear m={m}")
    R = float(x[0])
    _, _, s_star, _ = _collinear_shot(m, R, cfg, with_jacobian=False)
    return PeriodicOrbit("collinear", float(m), collinear.initial_state(R, m), float(s_star),
                         float(abs(r[0])), hist)


def _rung_index(m):
    """Rung next to ``m`` on the side facing m = 1."""
    return math.trunc(RUNGS_PER_OCTAVE * math.log2(m))


def _rung_mass(k):
    return 2.0 ** (k / RUNGS_PER_OCTAVE)


@functools.lru_cache(maxsize=4096)
def _rung(k, cfg):
    if k == 0:
        return _collinear_newton(1.0, R1_GUESS, cfg).R
    step = 1 if k > 0 else -1
    prev = _rung(k - step, cfg)
    if abs(k) >= 2:
        prev2 = _rung(k - 2 * step, cfg)
        m0, m1, m2 = _rung_mass(k - 2 * step), _rung_mass(k - step), _rung_mass(k)
        guess = prev + (prev - prev2) * (m2 - m1) / (m1 - m0)
    else:
        guess = prev
    return _collinear_newton(_rung_mass(k), guess, cfg).R


def ladder_guess(m, cfg=None):
    """Initial guess for R(m) from the cached continuation ladder out of m = 1."""
    cfg = cfg or ShootingConfig()
    k = _rung_index(m)
    Rk = _rung(k, cfg)
    mk = _rung_mass(k)
    if m == mk:
        return Rk
    # extrapolate/interpolate toward m using the next rung outward
    k2 = k + (1 if m > mk else -1)
    try:
        R2 = _rung(k2, cfg)
    except SBCError:
        return Rk
    return Rk + (R2 - Rk) * (m - mk) / (_rung_mass(k2) - mk)


def solve_collinear(m, guess_R=None, cfg=None):
    """Converged collinear orbit for mass ratio ``m``.

    Without a guess, R(m) is approached along a continuation ladder that
    starts from R(1) ~ 2.29559; large jumps in ``m`` can otherwise land on a
    different periodic family.
    """
    if not m > 0:
        raise ValueError("mass ratio m must be positive")
    cfg = cfg or ShootingConfig()
    if guess_R is None:
        guess_R = ladder_guess(m, cfg)
    return _collinear_newton(m, float(guess_R), cfg)


def _solve_block(ms, cfg):
    """Warm-started sequential solves over one contiguous block of masses."""
    out = []
    for i, m in enumerate(ms):
        guess = None
        if i >= 1 and out[-1] is not None:
            guess = out[-1].R
            if i >= 2 and out[-2] is not None:
                guess += (out[-1].R - out[-2].R) * (m - ms[i - 1]) / (ms[i - 1] - ms[i - 2])
        try:
            out.append(solve_collinear(m, guess, cfg))
        except SBCError as exc:
            log.warning("collinear m=%g failed: %s", m, exc)
            out.append(None)
    return out


def blocks(m_grid, block_size=DEFAULT_BLOCK):
    """Split a grid into fixed contiguous blocks (independent of worker count,
    so results do not depend on how many workers are used)."""
    m_grid = list(m_grid)
    return [m_grid[i:i + block_size] for i in range(0, len(m_grid), block_size)]


def continue_family(m_grid, cfg=None, *, jobs=1, block_size=DEFAULT_BLOCK,
                    max_failure_fraction=0.1):
    """Solve the collinear family along a sorted grid of mass ratios.

    Each block's first point is seeded from the ladder; the rest are warm
    started from their converged neighbours.  Failed points come back as
    ``None``.

    Raises
    ------
    NewtonDiverged
        If more than ``max_failure_fraction`` of the points fail.
    """
    m_grid = [float(m) for m in m_grid]
    if any(m <= 0 for m in m_grid):
        raise ValueError("all masses must be positive")
    if any(b < a for a, b in zip(m_grid, m_grid[1:])):
        raise ValueError("m_grid must be sorted")
    cfg = cfg or ShootingConfig()
    parts = blocks(m_grid, block_size)
    if jobs > 1 and len(parts) > 1:
        with ThreadPoolExecutor(jobs) as pool:
            solved = list(pool.map(lambda b: _solve_block(b, cfg), parts))
    else:
        solved = [_solve_block(b, cfg) for b in parts]
    result = [o for part in solved for o in part]
    failed = sum(o is None for o in result)
    if result and failed > max_failure_fraction * len(result):
        raise NewtonDiverged(f"{failed} of {len(result)} continuation points failed")
    return result


# --------------------------------------------------------------------------
# planar orbit
# --------------------------------------------------------------------------

def _planar_shot(xi, eta, s_end, cfg, with_jacobian=True):
    seed = planar.PlanarSeed.from_momentum(xi, eta)
    E = planar.energy_from_seed(seed)
    system = planar.PlanarSystem(E)
    if not with_jacobian:
        run = propagate(system, seed.state, s_end, cfg.integrator)
        return np.array([run.state[0], run.state[3]]), None, E
    run = propagate(system, seed.state, s_end, cfg.integrator, Y0=np.eye(4))
    Phi, y = run.Y, run.state
    f = system(s_end, y)
    # Sensitivity to E from the scaling symmetry (eps Q(eps s), P(eps s)) at
    # energy E/eps^2: differentiating at eps = 1 gives
    #   (Q(s), 0) + s f(y(s)) = Phi (Q(0), 0) - 2 E dy/dE.
    q0 = np.array([xi, xi, 0.0, 0.0])
    qs = np.array([y[0], y[1], 0.0, 0.0])
    dy_dE = (Phi @ q0 - qs - s_end * f) / (2.0 * E)
    dE_dxi = -2.0 * E / xi
    dE_deta = eta / (4.0 * xi * xi)
    d_xi = Phi @ np.array([1.0, 1.0, 0.0, 0.0]) + dy_dE * dE_dxi
    d_eta = Phi @ np.array([0.0, 0.0, -1.0, 1.0]) + dy_dE * dE_deta
    jac = np.array([[d_xi[0], d_eta[0]], [d_xi[3], d_eta[3]]])
    return np.array([y[0], y[3]]), jac, E


def solve_planar(period=8.0, guess=None, cfg=None):
    """Planar orbit of the prescribed period.

    Solves ``F(xi, eta) = (Q1(T/8), P2(T/8)) = 0`` for the seed
    ``(xi, xi, -eta, eta)``; the energy follows from ``gamma = 0`` at every
    iterate.
    """
    if not period > 0:
        raise ValueError("period must be positive")
    cfg = cfg or ShootingConfig()
    s_end = period / 8.0
    if guess is None:
        # xi * T is invariant under the scaling symmetry
        guess = (PLANAR_GUESS[0] * 8.0 / period, PLANAR_GUESS[1])
    h = cfg.fd_step

    def shoot(x):
        xi, eta = x
        if not xi > 0:
            raise NoEventFound("xi must stay positive")
        if cfg.fd_jacobian:
            r = _planar_shot(xi, eta, s_end, cfg, False)[0]
            cols = []
            for d in (np.array([h, 0.0]), np.array([0.0, h])):
                hi = _planar_shot(*(x + d), s_end, cfg, False)[0]
                lo = _planar_shot(*(x - d), s_end, cfg, False)[0]
                cols.append((hi - lo) / (2 * h))
            return r, np.column_stack(cols)
        r, jac, _ = _planar_shot(xi, eta, s_end, cfg)
        return r, jac

    x, r, hist = _newton(shoot, guess, cfg, f"planar period={period}")
    seed = planar.PlanarSeed.from_momentum(float(x[0]), float(x[1]))
    E = planar.energy_from_seed(seed)
    return PeriodicOrbit("planar", E, seed.state, s_end, float(np.max(np.abs(r))), hist)


def planar_orbit_with_zeta(zeta, cfg=None):
    """Planar orbit scaled so that ``Q1(0) = Q2(0) = zeta``."""
    base = solve_planar(8.0, cfg=cfg)
    return base.scaled(zeta / base.seed.zeta)
