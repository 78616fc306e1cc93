"""Adaptive Runge-Kutta-Fehlberg 4(5) integration with event location.

``field`` arguments are either a plain callable ``f(s, y)`` or one of the
built-in system objects (:class:`~sbcstab.collinear.CollinearSystem`,
:class:`~sbcstab.planar.PlanarSystem`).  Built-in systems run on the
compiled core when it is available; everything else runs on the
pure-Python driver.  Both use the same tableau, error norm, step-size
controller and event locator.
"""
from dataclasses import dataclass, replace

import numpy as np

from . import _backend, _pycore
from .errors import MaxStepsExceeded, NoEventFound, StepUnderflow


@dataclass(frozen=True)
class IntegratorConfig:
    """Step-size control settings; ``h_*`` are in fictitious-time units.

    The local error estimate of every accepted step satisfies
    ``|err_i| <= abs_tol + rel_tol * max(|y_i|, |y_new_i|)``.
    """

    abs_tol: float = 1e-12
    rel_tol: float = 1e-12
    h_init: float = 1e-3
    h_min: float = 1e-14
    h_max: float = 0.5
    max_steps: int = 1_000_000

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("abs_tol and rel_tol must be positive")
        if not (0 < self.h_min <= self.h_init <= self.h_max):
            raise ValueError("need 0 < h_min <= h_init <= h_max")
        if self.max_steps <= 0:
            raise ValueError("max_steps must be positive")

    def with_tol(self, tol):
        return replace(self, abs_tol=tol, rel_tol=tol)


ORBIT_CONFIG = IntegratorConfig()
VARIATIONAL_CONFIG = IntegratorConfig(abs_tol=1e-10, rel_tol=1e-10)


@dataclass
class Trajectory:
    """Samples ``(s[i], y[i])`` with ``s`` strictly increasing."""

    s: np.ndarray
    y: np.ndarray
    nsteps: int = 0

    def __len__(self):
        return len(self.s)

    @property
    def final(self):
        return self.y[-1]


@dataclass
class Propagation:
    """Everything a single integration run produces.

    ``state`` is the 4-vector at ``s``; ``Y`` the 4x4 variational matrix when
    one was propagated.  ``at`` holds the states requested through
    ``s_eval`` (rows beyond an event are left unfilled).
    """

    s: float
    state: np.ndarray
    Y: np.ndarray | None
    event: bool
    nsteps: int
    at: np.ndarray
    trajectory: Trajectory | None


def _is_builtin(field):
    return getattr(field, "kernel_id", None) is not None


def _variational_rhs(field, jacobian):
    def rhs(s, y):
        out = np.empty(20)
        out[:4] = field(s, y[:4])
        out[4:] = (np.asarray(jacobian(s, y[:4])) @ y[4:].reshape(4, 4)).ravel()
        return out
    return rhs


def propagate(field, y0, s_end, cfg=ORBIT_CONFIG, *, Y0=None, jacobian=None,
              event=None, direction=0, s_eval=None, record=False):
    """Integrate from ``s = 0`` to ``s_end`` (or to the first event).

    Parameters
    ----------
    field : callable or built-in system
    y0 : array_like
        Initial state.
    Y0 : array_like, optional
        Initial 4x4 fundamental matrix; when given the variational equations
        are co-integrated with the orbit under one shared step control.
    jacobian : callable, optional
        ``jacobian(s, y)`` for plain-callable fields; built-in systems use
        their analytic linearization.
    event : int or callable, optional
        Component index or scalar function ``g(s, y)``; integration stops at
        its first zero crossing in ``direction`` (-1, 0 or +1).
    s_eval : array_like, optional
        Sorted times at which the state is captured exactly (steps are
        clamped to land on them).
    record : bool
        Keep every accepted step in ``Propagation.trajectory``.
    """
    y0 = np.asarray(y0, dtype=float)
    variational = Y0 is not None
    n_state = len(y0)
    y_init = np.concatenate([y0, np.asarray(Y0, dtype=float).ravel()]) if variational else y0
    if isinstance(event, (int, np.integer)):
        event = int(event)
    if s_eval is not None:
        s_eval = np.asarray(s_eval, dtype=float)
        if np.any(np.diff(s_eval) < 0):
            raise ValueError("s_eval must be sorted")

    fast = (_is_builtin(field) and n_state == 4
            and (jacobian is None or jacobian == field.jacobian)
            and (event is None or isinstance(event, int)))
    if fast:
        out = _backend.kernel.rkf45(
            field.kernel_id, field.kernel_params, y_init, float(s_end),
            cfg.abs_tol, cfg.rel_tol, cfg.h_init, cfg.h_min, cfg.h_max, cfg.max_steps,
            s_eval, -1 if event is None else event, int(np.sign(direction)), record)
    else:
        if variational:
            jac = jacobian if jacobian is not None else field.jacobian
            fun = _variational_rhs(field, jac)
        else:
            fun = field
        out = _pycore.solve(
            fun, y_init, 0.0, float(s_end), cfg.abs_tol, cfg.rel_tol, cfg.h_init,
            cfg.h_min, cfg.h_max, cfg.max_steps, s_eval, event, int(np.sign(direction)),
            record)

    status, s, y, nsteps, eval_y, n_done, rec_s, rec_y = out
    if status == _pycore.STATUS_UNDERFLOW:
        raise StepUnderflow(f"step size fell below h_min={cfg.h_min:g} at s={s:.17g}")
    if status == _pycore.STATUS_MAXSTEPS:
        raise MaxStepsExceeded(f"{cfg.max_steps} steps taken without reaching s={s_end:g}")
    y = np.asarray(y)
    traj = None
    if record:
        traj = Trajectory(np.asarray(rec_s), np.asarray(rec_y), nsteps)
    return Propagation(
        s=float(s),
        state=y[:n_state].copy(),
        Y=y[n_state:].reshape(4, 4).copy() if variational else None,
        event=status == _pycore.STATUS_EVENT,
        nsteps=int(nsteps),
        at=eval_y[:n_done],
        trajectory=traj,
    )


def integrate(field, y0, s_end, cfg=ORBIT_CONFIG, *, s_eval=None):
    """Integrate ``y' = field(s, y)`` over ``[0, s_end]``.

    Returns every accepted step, or only the ``s_eval`` samples when given.
    The last accepted step is clamped so the final sample sits exactly at
    ``s_end``.
    """
    if not s_end > 0:
        raise ValueError("s_end must be positive")
    if s_eval is None:
        run = propagate(field, y0, s_end, cfg, record=True)
        return run.trajectory
    run = propagate(field, y0, s_end, cfg, s_eval=s_eval)
    return Trajectory(np.asarray(s_eval, dtype=float)[: len(run.at)], run.at, run.nsteps)


def integrate_to_event(field, y0, event, direction=-1, cfg=ORBIT_CONFIG, *, s_max=100.0):
    """Integrate until ``event`` first crosses zero in ``direction``.

    Returns ``(s_star, state_star)``.  ``event`` is a component index or a
    callable ``g(s, y)``.

    Raises
    ------
    ValueError
        If the event function already vanishes at the initial state.
    NoEventFound
        If no crossing occurs before ``s_max``.
    """
    y0 = np.asarray(y0, dtype=float)
    g0 = y0[event] if isinstance(event, (int, np.integer)) else event(0.0, y0)
    if g0 == 0.0:
        raise ValueError("event function vanishes at the initial state")
    run = propagate(field, y0, s_max, cfg, event=event, direction=direction)
    if not run.event:
        raise NoEventFound(f"no event crossing before s={s_max:g}")
    return run.s, run.state


def integrate_with_variational(field, jacobian, y0, Y0, s_end, cfg=VARIATIONAL_CONFIG):
    """Co-integrate the orbit and the fundamental matrix ``Y' = A(y) Y``.

    Returns ``(state, Y)`` at ``s_end``.  Pass ``jacobian=None`` for built-in
    systems.
    """
    run = propagate(field, y0, s_end, cfg, Y0=Y0, jacobian=jacobian)
    return run.state, run.Y
