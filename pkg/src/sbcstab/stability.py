"""Symmetry-reduced linear stability of the periodic orbits.

The fundamental matrix is started from an orthogonal, symplectic ``Y0``
adapted to the orbit's symmetries, propagated to the first simultaneous
binary collision (``B = Y(T/4)`` or ``Y(T/8)``), and reduced to

    W = (Y0^-1 R Y0) B^-1 S B,       Y0^-1 Y(T) = W^k,

with ``(R, S, k) = (S, S, 2)`` for the collinear family and
``(Q, S_G, 4)`` for the planar orbit.  ``(W + W^-1)/2`` is block diagonal
``diag(K^T, K)`` and ``K = [[-+1, *], [0, kappa]]`` where
``kappa = c2^T (S J c4)`` is read off the columns ``c_i`` of ``B``.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.optimize import brentq

from . import collinear, planar
from .errors import BracketInvalid, DegenerateTangent, ResidualExceeded, SBCError, SingularMatrixError
from .integrate import VARIATIONAL_CONFIG, IntegratorConfig, propagate
from .orbits import DEFAULT_BLOCK, ShootingConfig, _solve_block, blocks, solve_collinear
from .symplectic4 import (J, Q_PLANAR, S_COLLINEAR, S_F, S_G, half_sum_inverse,
                          k_block_stable, off_block_norm, palindromic_defect, symplectic_defect)

log = logging.getLogger(__name__)

MARGINAL_BAND = 1e-4
SYMMETRY_SAMPLES = 20
VERIFY_EVERY = 100
# Full-period checks track |gamma| to 1e-9 over many steps; at large m the
# potential terms are O(m^2), so this needs a tighter tolerance than B does.
VERIFY_CONFIG = IntegratorConfig(abs_tol=1e-13, rel_tol=1e-13)

DEFAULT_BOUNDS = {
    "kappa_consistency": 1e-6,
    "eigvec": 1e-6,
    "block": 1e-6,
    "k_lower_left": 1e-6,
    "det": 1e-8,
    "w_symplectic": 1e-7,
    "factorization": 1e-5,
    "reversal": 1e-5,
    "palindromic": 1e-6,
    "gamma": 1e-9,
    "symplectic_drift": 1e-7,
    "symmetry": 1e-7,
    "closure": 1e-7,
}


def build_Y0_collinear():
    """Orthogonal symplectic basis with ``Y0^-1 S Y0 = Lambda`` whose third
    column is the unit tangent at the start of a collinear orbit."""
    return np.array([
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [-1.0, 0.0, 0.0, 0.0],
    ])


def build_Y0_planar(seed, E):
    """Orthogonal symplectic basis with ``Y0^-1 Q Y0 = Lambda`` for the planar
    seed; the third column is the unit tangent ``(-a, a, b, b) / c``.

    Raises
    ------
    DegenerateTangent
        If the tangent vanishes (``a = b = 0``).
    """
    a = seed.v0 * seed.zeta ** 2 / 2.0
    b = E * seed.zeta ** 3
    c = math.sqrt(2.0 * a * a + 2.0 * b * b)
    if c == 0.0:
        raise DegenerateTangent("field vanishes at the seed")
    return np.array([
        [b, a, -a, b],
        [b, a, a, -b],
        [a, -b, b, a],
        [-a, b, b, a],
    ]) / c


@dataclass(frozen=True)
class _Reduction:
    Y0: np.ndarray
    outer: np.ndarray    # symmetry conjugated on the left of W
    reverse: np.ndarray  # time-reversing symmetry inside B^-1 S B
    e3_eigenvalue: float
    power: int


def _reduction(orbit):
    if orbit.system == "collinear":
        return _Reduction(build_Y0_collinear(), S_COLLINEAR, S_COLLINEAR, -1.0, 2)
    return _Reduction(build_Y0_planar(orbit.seed, orbit.param), Q_PLANAR, S_G, 1.0, 4)


@dataclass(eq=False)
class StabilityReport:
    """Outcome of :func:`analyze`.

    ``kappa`` is the column-formula value (``kappa_direct``); ``kappa_from_W``
    is the same eigenvalue read from ``K`` as a cross-check.  Every residual
    and its bound is kept in ``residuals`` / ``bounds``; ``failures`` lists
    the names that missed their bound.
    """

    system: str
    param: float
    kappa: float
    kappa_direct: float
    kappa_from_W: float
    stable: bool
    marginal: bool
    K: np.ndarray
    W: np.ndarray
    B: np.ndarray
    residuals: dict = dc_field(default_factory=dict)
    bounds: dict = dc_field(default_factory=dict)
    failures: list = dc_field(default_factory=list)

    @property
    def ok(self):
        return not self.failures

    @property
    def eigvec_residual(self):
        return self.residuals["eigvec"]

    @property
    def block_residual(self):
        return self.residuals["block"]

    @property
    def factorization_residual(self):
        return self.residuals.get("factorization", float("nan"))

    @property
    def symplectic_drift(self):
        return self.residuals.get("symplectic_drift", self.residuals["w_symplectic"])

    def k_eigenvalues(self):
        return np.linalg.eigvals(self.K)


def _bounds(overrides):
    b = dict(DEFAULT_BOUNDS)
    if overrides:
        unknown = set(overrides) - set(b)
        if unknown:
            raise ValueError(f"unknown residual names: {sorted(unknown)}")
        b.update(overrides)
    return b


def _failures(residuals, bounds):
    return [k for k, v in residuals.items() if not v < bounds[k]]


def _check_strict(report, strict):
    if strict and report.failures:
        names = ", ".join(f"{k}={report.residuals[k]:.3e}" for k in report.failures)
        raise ResidualExceeded(f"residual bounds exceeded: {names}", report)


def reduce_W(orbit, B, red=None):
    """``W``, the reduced block ``K`` and the raw block residuals."""
    red = red or _reduction(orbit)
    Y0inv = red.Y0.T  # Y0 is orthogonal
    try:
        Binv = np.linalg.inv(B)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("B is singular") from exc
    W = (Y0inv @ red.outer @ red.Y0) @ Binv @ red.reverse @ B
    M = half_sum_inverse(W)
    return W, M


def analyze(orbit, cfg=VARIATIONAL_CONFIG, *, bounds=None, strict=False):
    """Integrate orbit and fundamental matrix to the first simultaneous
    binary collision and evaluate the reduced stability block.

    Parameters
    ----------
    orbit : PeriodicOrbit
    cfg : IntegratorConfig
    bounds : dict, optional
        Overrides for :data:`DEFAULT_BOUNDS`.
    strict : bool
        Raise :class:`ResidualExceeded` (carrying the report) when a bound is
        missed.  Otherwise the failures are only listed on the report.
    """
    bounds = _bounds(bounds)
    red = _reduction(orbit)
    run = propagate(orbit.field, orbit.initial_state, orbit.fundamental_time, cfg, Y0=red.Y0)
    B = run.Y
    W, M = reduce_W(orbit, B, red)
    K = M[2:, 2:].copy()
    kappa_direct = float(B[:, 1] @ red.reverse @ J @ B[:, 3])
    kappa_from_W = float(K[1, 1])
    e3 = np.array([0.0, 0.0, 1.0, 0.0])
    residuals = {
        "kappa_consistency": abs(kappa_direct - kappa_from_W),
        "eigvec": float(np.max(np.abs(W @ e3 - red.e3_eigenvalue * e3))),
        "block": off_block_norm(M),
        "k_lower_left": abs(float(K[1, 0])),
        "det": abs(float(np.linalg.det(W)) - 1.0),
        "w_symplectic": symplectic_defect(W),
    }
    if kappa_direct < -1.0:
        log.warning("kappa=%.6f below -1 for %s %g", kappa_direct, orbit.system, orbit.param)
    report = StabilityReport(
        system=orbit.system,
        param=orbit.param,
        kappa=kappa_direct,
        kappa_direct=kappa_direct,
        kappa_from_W=kappa_from_W,
        stable=k_block_stable(K),
        marginal=min(abs(kappa_direct - 1.0), abs(kappa_direct + 1.0)) < MARGINAL_BAND,
        K=K,
        W=W,
        B=B,
        residuals=residuals,
        bounds={k: bounds[k] for k in residuals},
        failures=_failures(residuals, bounds),
    )
    _check_strict(report, strict)
    return report


def _gamma_fn(orbit):
    if orbit.system == "collinear":
        return lambda y: collinear.gamma(y, orbit.param)
    return lambda y: planar.gamma(y, orbit.param)


def _max_diff(a, b):
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def symmetry_residuals(orbit, cfg=VERIFY_CONFIG, samples=SYMMETRY_SAMPLES):
    """Check the orbit's symmetry relations at ``samples`` points each.

    Collinear: ``gamma(T - s) = S gamma(s)`` and ``gamma(T/2 - s) = -S gamma(s)``.
    Planar: ``gamma(s + T/4) = S_F gamma(s)`` and ``gamma(T/4 - s) = S_G gamma(s)``.
    """
    T = orbit.period
    if orbit.system == "collinear":
        s = np.linspace(0.0, T, samples, endpoint=False)
        pairs = [(s, T - s, S_COLLINEAR), (s[s <= T / 2], T / 2 - s[s <= T / 2], -S_COLLINEAR)]
    else:
        s = np.linspace(0.0, 0.75 * T, samples)
        r = np.linspace(0.0, 0.25 * T, samples)
        pairs = [(s, s + 0.25 * T, S_F), (r, 0.25 * T - r, S_G)]
    times = np.unique(np.concatenate([np.concatenate([a, b]) for a, b, _ in pairs]))
    run = propagate(orbit.field, orbit.initial_state, T, cfg, s_eval=times)
    lookup = dict(zip(times.tolist(), run.at))
    worst = []
    for a, b, M in pairs:
        worst.append(max(_max_diff(lookup[tb], M @ lookup[ta]) for ta, tb in zip(a.tolist(), b.tolist())))
    return tuple(worst)


def verify_factorization(orbit, cfg=VERIFY_CONFIG, *, bounds=None, strict=False):
    """Full-period consistency checks for an orbit and its reduction.

    Integrates ``(gamma, Y)`` over the whole period, independently of the
    fundamental-time integration behind ``W``, and compares:

    * ``factorization``: ``||Y0^-1 Y(T) - W^k||``
    * ``reversal``: ``||Y(T/N) - R Y0 B^-1 R B||`` at the first reversal
      point (``T/2`` collinear, ``T/4`` planar)
    * ``palindromic``: reciprocal eigenvalue pairs of ``W^k``
    * ``gamma``: max ``|gamma|`` over every accepted step
    * ``symplectic_drift``: max ``||Y^T J Y - J||`` over every accepted step
    * ``symmetry``: the two symmetry relations of :func:`symmetry_residuals`
    * ``closure``: ``||gamma(T) - gamma(0)||``

    together with every residual of :func:`analyze`.
    """
    bounds = _bounds(bounds)
    base = analyze(orbit, cfg)
    red = _reduction(orbit)
    T = orbit.period
    s_rev = 2.0 * orbit.fundamental_time
    run = propagate(orbit.field, orbit.initial_state, T, cfg, Y0=red.Y0, s_eval=[s_rev],
                    record=True)
    Wk = np.linalg.matrix_power(base.W, red.power)
    B = base.B
    Y_rev = run.at[0, 4:].reshape(4, 4)
    rev_pred = red.reverse @ red.Y0 @ np.linalg.inv(B) @ red.reverse @ B
    g = _gamma_fn(orbit)
    traj = run.trajectory
    sym = symmetry_residuals(orbit, cfg)
    residuals = dict(base.residuals)
    residuals.update({
        "factorization": _max_diff(red.Y0.T @ run.Y, Wk),
        "reversal": _max_diff(Y_rev, rev_pred),
        "palindromic": palindromic_defect(Wk),
        "gamma": max(abs(g(y[:4])) for y in traj.y),
        "symplectic_drift": max(symplectic_defect(y[4:].reshape(4, 4)) for y in traj.y),
        "symmetry": max(sym),
        "closure": _max_diff(run.state, orbit.initial_state),
    })
    base.residuals = residuals
    base.bounds = {k: bounds[k] for k in residuals}
    base.failures = _failures(residuals, bounds)
    _check_strict(base, strict)
    return base


# --------------------------------------------------------------------------
# mass scan
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ScanRow:
    m: float
    R: float
    quarter_period: float
    kappa: float
    stable: bool
    converged: bool


def _row(m, orbit, verify, cfg, verify_cfg):
    if orbit is None:
        return ScanRow(m, math.nan, math.nan, math.nan, False, False)
    try:
        rep = analyze(orbit, cfg)
        failures = list(rep.failures)
        if verify:
            # gamma carries O(m^2) terms; hold its drift to the same relative size
            scaled = {"gamma": DEFAULT_BOUNDS["gamma"] * max(1.0, m * m)}
            failures += verify_factorization(orbit, verify_cfg, bounds=scaled).failures
    except SBCError as exc:
        log.warning("stability at m=%g failed: %s", m, exc)
        return ScanRow(m, orbit.R, orbit.fundamental_time, math.nan, False, False)
    if failures:
        log.warning("m=%g misses bounds: %s", m, sorted(set(failures)))
    return ScanRow(m, orbit.R, orbit.fundamental_time, rep.kappa, rep.stable, not failures)


def mass_scan(m_grid, cfg=VARIATIONAL_CONFIG, *, shooting=None, jobs=1,
              block_size=DEFAULT_BLOCK, verify_every=VERIFY_EVERY, verify_cfg=VERIFY_CONFIG):
    """Stability verdict along a sorted grid of mass ratios.

    The grid is split into fixed contiguous blocks that are continued
    independently, so the rows do not depend on ``jobs``.  Every
    ``verify_every``-th row also runs :func:`verify_factorization`.
    """
    m_grid = [float(m) for m in m_grid]
    if any(m <= 0 for m in m_grid):
        raise ValueError("all masses must be positive")
    if any(b < a for a, b in zip(m_grid, m_grid[1:])):
        raise ValueError("m_grid must be sorted")
    shooting = shooting or ShootingConfig()
    parts = blocks(m_grid, block_size)
    offsets = np.cumsum([0] + [len(p) for p in parts])

    def work(i):
        orbits = _solve_block(parts[i], shooting)
        return [_row(m, o, verify_every and (offsets[i] + j) % verify_every == 0,
                     cfg, verify_cfg)
                for j, (m, o) in enumerate(zip(parts[i], orbits))]

    if jobs > 1 and len(parts) > 1:
        with ThreadPoolExecutor(jobs) as pool:
            done = list(pool.map(work, range(len(parts))))
    else:
        done = [work(i) for i in range(len(parts))]
    return [r for part in done for r in part]


def crossings(rows, level=1.0):
    """Linear-interpolated masses where ``kappa - level`` changes sign."""
    out = []
    good = [r for r in rows if r.converged]
    for a, b in zip(good, good[1:]):
        fa, fb = a.kappa - level, b.kappa - level
        if fa == 0.0:
            out.append(a.m)
        elif fa * fb < 0:
            out.append(a.m + (b.m - a.m) * fa / (fa - fb))
    return out


def kappa_at(m, cfg=VARIATIONAL_CONFIG, shooting=None):
    return analyze(solve_collinear(m, cfg=shooting), cfg).kappa


def critical_mass(bracket, cfg=VARIATIONAL_CONFIG, *, shooting=None, xtol=1e-5):
    """Root of ``kappa(m) - 1`` inside ``bracket``.

    Each evaluation solves the orbit from the cached continuation ladder, so
    the result does not depend on evaluation order.

    Raises
    ------
    BracketInvalid
        If ``kappa - 1`` has the same sign at both ends.
    """
    lo, hi = (float(v) for v in bracket)
    if not 0 < lo < hi:
        raise BracketInvalid("bracket must satisfy 0 < m_lo < m_hi")

    def f(m):
        return kappa_at(m, cfg, shooting) - 1.0

    flo, fhi = f(lo), f(hi)
    if flo * fhi > 0:
        raise BracketInvalid(f"kappa - 1 has the same sign at m={lo:g} ({flo:+.3e}) "
                             f"and m={hi:g} ({fhi:+.3e})")
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    return float(brentq(f, lo, hi, xtol=xtol))
