"""Pure-Python numerical core.

Vector fields and Jacobians of the two regularized systems, plus the
adaptive RKF45 driver.  This module is the fallback for ``_ccore`` and
mirrors its API exactly; ``solve`` additionally accepts arbitrary Python
callables, which the compiled core does not.
"""
import math

import numpy as np

COLLINEAR = 0
PLANAR = 1

SQRT2 = math.sqrt(2.0)

# Fehlberg 4(5) tableau.  The fifth-order solution is propagated.
C2, C3, C4, C5, C6 = 1 / 4, 3 / 8, 12 / 13, 1.0, 1 / 2
A21 = 1 / 4
A31, A32 = 3 / 32, 9 / 32
A41, A42, A43 = 1932 / 2197, -7200 / 2197, 7296 / 2197
A51, A52, A53, A54 = 439 / 216, -8.0, 3680 / 513, -845 / 4104
A61, A62, A63, A64, A65 = -8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40
B1, B3, B4, B5, B6 = 16 / 135, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55
E1, E3, E4, E5, E6 = 1 / 360, -128 / 4275, -2197 / 75240, 1 / 50, 2 / 55

STATUS_END = 0
STATUS_EVENT = 1
STATUS_UNDERFLOW = -1
STATUS_MAXSTEPS = -2


# --------------------------------------------------------------------------
# collinear 1, m, m, 1 problem
# --------------------------------------------------------------------------

def collinear_field(y, m, E):
    Q1, Q2, P1, P2 = y[0], y[1], y[2], y[3]
    a = (1.0 + 1.0 / m) / 16.0
    b = 0.25 / m
    q1s = Q1 * Q1
    q2s = Q2 * Q2
    D1 = q1s + q2s
    D2 = 2.0 * q1s + q2s
    D1s = D1 * D1
    D2s = D2 * D2
    q24 = q2s * q2s
    q14 = q1s * q1s
    VQ1 = (-2.0 * m * m * Q1 - 4.0 * m * Q1 * q24 / D1s
           - 2.0 * Q1 * q24 / D2s - 2.0 * E * Q1 * q2s)
    VQ2 = (-4.0 * m * Q2 - 4.0 * m * q14 * Q2 / D1s
           - 4.0 * q14 * Q2 / D2s - 2.0 * E * q1s * Q2)
    return (
        2.0 * a * q2s * P1 - b * Q1 * Q2 * P2,
        b * (2.0 * q1s * P2 - Q1 * Q2 * P1),
        -(b * (2.0 * Q1 * P2 * P2 - Q2 * P1 * P2) + VQ1),
        -(2.0 * a * Q2 * P1 * P1 - b * Q1 * P1 * P2 + VQ2),
    )


def collinear_jacobian(y, m, E):
    Q1, Q2, P1, P2 = y[0], y[1], y[2], y[3]
    a = (1.0 + 1.0 / m) / 16.0
    b = 0.25 / m
    q1s = Q1 * Q1
    q2s = Q2 * Q2
    # g(alpha) = Q1^2 Q2^2 / (alpha Q1^2 + Q2^2) second partials
    g11 = g22 = g12 = 0.0
    for alpha, w in ((1.0, 2.0 * m), (2.0, 1.0)):
        D = alpha * q1s + q2s
        D3 = D * D * D
        g11 += w * 2.0 * q2s * q2s * (q2s - 3.0 * alpha * q1s) / D3
        g22 += w * 2.0 * alpha * q1s * q1s * (alpha * q1s - 3.0 * q2s) / D3
        g12 += w * 8.0 * alpha * q1s * Q1 * q2s * Q2 / D3
    V11 = -2.0 * m * m - g11 - 2.0 * E * q2s
    V22 = -4.0 * m - g22 - 2.0 * E * q1s
    V12 = -g12 - 4.0 * E * Q1 * Q2
    return (
        (-b * Q2 * P2, 4.0 * a * Q2 * P1 - b * Q1 * P2, 2.0 * a * q2s, -b * Q1 * Q2),
        (b * (4.0 * Q1 * P2 - Q2 * P1), -b * Q1 * P1, -b * Q1 * Q2, 2.0 * b * q1s),
        (-(2.0 * b * P2 * P2 + V11), -(V12 - b * P1 * P2), b * Q2 * P2,
         -b * (4.0 * Q1 * P2 - Q2 * P1)),
        (-(V12 - b * P1 * P2), -(2.0 * a * P1 * P1 + V22),
         -(4.0 * a * Q2 * P1 - b * Q1 * P2), b * Q1 * P1),
    )


# --------------------------------------------------------------------------
# planar symmetric equal-mass problem
# --------------------------------------------------------------------------

def planar_field(y, E):
    Q1, Q2, P1, P2 = y[0], y[1], y[2], y[3]
    q1s = Q1 * Q1
    q2s = Q2 * Q2
    r = q1s * q1s + q2s * q2s
    r32 = r * math.sqrt(r)
    h1 = 2.0 * Q1 * q2s * q2s * q2s / r32
    h2 = 2.0 * q1s * q1s * q1s * Q2 / r32
    return (
        P1 * q2s / 8.0,
        P2 * q1s / 8.0,
        -P2 * P2 * Q1 / 8.0 + 2.0 * SQRT2 * Q1 + SQRT2 * h1 + 2.0 * E * Q1 * q2s,
        -P1 * P1 * Q2 / 8.0 + 2.0 * SQRT2 * Q2 + SQRT2 * h2 + 2.0 * E * q1s * Q2,
    )


def planar_jacobian(y, E):
    Q1, Q2, P1, P2 = y[0], y[1], y[2], y[3]
    q1s = Q1 * Q1
    q2s = Q2 * Q2
    q14 = q1s * q1s
    q24 = q2s * q2s
    r = q14 + q24
    r52 = r * r * math.sqrt(r)
    h11 = 2.0 * q24 * q2s * (q24 - 5.0 * q14) / r52
    h22 = 2.0 * q14 * q1s * (q14 - 5.0 * q24) / r52
    h12 = 12.0 * q14 * Q1 * q24 * Q2 / r52
    V11 = -2.0 * SQRT2 - SQRT2 * h11 - 2.0 * E * q2s
    V22 = -2.0 * SQRT2 - SQRT2 * h22 - 2.0 * E * q1s
    V12 = -SQRT2 * h12 - 4.0 * E * Q1 * Q2
    return (
        (0.0, P1 * Q2 / 4.0, q2s / 8.0, 0.0),
        (P2 * Q1 / 4.0, 0.0, 0.0, q1s / 8.0),
        (-(P2 * P2 / 8.0 + V11), -V12, 0.0, -P2 * Q1 / 4.0),
        (-V12, -(P1 * P1 / 8.0 + V22), -P1 * Q2 / 4.0, 0.0),
    )


def field(system, params, y):
    """Vector field of a built-in system as a length-4 array."""
    if system == COLLINEAR:
        return np.array(collinear_field(y, params[0], params[1]))
    return np.array(planar_field(y, params[0]))


def jacobian(system, params, y):
    """Jacobian of the built-in vector field as a 4x4 array."""
    if system == COLLINEAR:
        return np.array(collinear_jacobian(y, params[0], params[1]))
    return np.array(planar_jacobian(y, params[0]))


def builtin_rhs(system, params, variational):
    """Return ``fun(s, y)`` for a built-in system, optionally with the 4x4
    variational block appended (row-major) after the state."""
    if system == COLLINEAR:
        m, E = params[0], params[1]

        def f(y):
            return collinear_field(y, m, E)

        def jac(y):
            return collinear_jacobian(y, m, E)
    else:
        E = params[0]

        def f(y):
            return planar_field(y, E)

        def jac(y):
            return planar_jacobian(y, E)

    if not variational:
        def rhs(s, y):
            return np.array(f(y))
    else:
        def rhs(s, y):
            out = np.empty(20)
            out[:4] = f(y)
            out[4:] = (np.array(jac(y)) @ y[4:].reshape(4, 4)).ravel()
            return out
    return rhs


# --------------------------------------------------------------------------
# RKF45 driver
# --------------------------------------------------------------------------

def _stages(fun, s, y, k1, h):
    k2 = fun(s + C2 * h, y + h * (A21 * k1))
    k3 = fun(s + C3 * h, y + h * (A31 * k1 + A32 * k2))
    k4 = fun(s + C4 * h, y + h * (A41 * k1 + A42 * k2 + A43 * k3))
    k5 = fun(s + C5 * h, y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4))
    k6 = fun(s + C6 * h, y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5))
    y5 = y + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6)
    err = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6)
    return y5, err


def _hermite(theta, h, y0, f0, y1, f1):
    t2 = theta * theta
    t3 = t2 * theta
    return ((2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + theta) * h * f0
            + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * h * f1)


def _hermite_dtheta(theta, h, y0, f0, y1, f1):
    t2 = theta * theta
    return ((6 * t2 - 6 * theta) * y0 + (3 * t2 - 4 * theta + 1) * h * f0
            + (-6 * t2 + 6 * theta) * y1 + (3 * t2 - 2 * theta) * h * f1)


def _crossed(g0, g1, direction):
    if direction < 0:
        return g0 > 0.0 and g1 <= 0.0
    if direction > 0:
        return g0 < 0.0 and g1 >= 0.0
    return (g0 > 0.0 and g1 <= 0.0) or (g0 < 0.0 and g1 >= 0.0)


def _hermite_root(gfun, dgfun, h):
    """Root of a scalar function of theta on [0, 1] with a sign change;
    safeguarded Newton inside a shrinking bisection bracket."""
    lo, hi = 0.0, 1.0
    glo = gfun(0.0)
    ghi = gfun(1.0)
    theta = glo / (glo - ghi) if glo != ghi else 0.5
    for _ in range(100):
        g = gfun(theta)
        if g == 0.0:
            return theta
        if (g > 0.0) == (glo > 0.0):
            lo, glo = theta, g
        else:
            hi = theta
        if (hi - lo) * abs(h) <= 1e-13:
            break
        dg = dgfun(theta)
        nxt = theta - g / dg if dg != 0.0 else -1.0
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi)
        theta = nxt
    return theta


def _locate(fun, s, y, k1, h, y1, f1, event):
    """Find the event root inside the accepted step ``[s, s + h]``.

    The dense-output cubic brackets the root; the state at the root is then
    recomputed by a direct RK step and the crossing time polished by Newton
    (component events) or secant (callable events) iterations.
    """
    if isinstance(event, int):
        k = event

        def gth(theta):
            return _hermite(theta, h, y[k], k1[k], y1[k], f1[k])

        def dgth(theta):
            return _hermite_dtheta(theta, h, y[k], k1[k], y1[k], f1[k])

        sigma = _hermite_root(gth, dgth, h) * h
        ys = y1
        for _ in range(8):
            ys, _ = _stages(fun, s, y, k1, sigma)
            fs = fun(s + sigma, ys)
            if fs[k] == 0.0:
                break
            d = ys[k] / fs[k]
            if abs(d) <= 4e-16 * max(1.0, abs(s + sigma)):
                break
            sigma -= d
        return s + sigma, ys

    def gth(theta):
        return event(s + theta * h, _hermite(theta, h, y, k1, y1, f1))

    def dgth(theta):
        d = 1e-7
        return (gth(min(theta + d, 1.0)) - gth(max(theta - d, 0.0))) / (
            min(theta + d, 1.0) - max(theta - d, 0.0))

    sig0 = _hermite_root(gth, dgth, h) * h
    y0s, _ = _stages(fun, s, y, k1, sig0)
    g0 = event(s + sig0, y0s)
    best = (abs(g0), sig0, y0s)
    sig1 = sig0 * (1.0 - 1e-8) if sig0 != 0.0 else 1e-12 * h
    for _ in range(10):
        y1s, _ = _stages(fun, s, y, k1, sig1)
        g1 = event(s + sig1, y1s)
        if abs(g1) < best[0]:
            best = (abs(g1), sig1, y1s)
        if g1 == g0 or abs(sig1 - sig0) <= 1e-15 * max(1.0, abs(s + sig1)):
            break
        sig0, g0, sig1 = sig1, g1, sig1 - g1 * (sig1 - sig0) / (g1 - g0)
    return s + best[1], best[2]


def solve(fun, y0, s0, s_end, abs_tol, rel_tol, h_init, h_min, h_max, max_steps,
          s_eval=None, event=None, event_dir=0, record=False):
    """Adaptive RKF45 integration of ``y' = fun(s, y)`` from ``s0`` to ``s_end``.

    ``event`` is ``None``, a component index, or a callable ``g(s, y)``; the
    integration stops at the first crossing in ``event_dir``.  Returns the
    tuple ``(status, s, y, nsteps, eval_y, n_eval, rec_s, rec_y)``.
    """
    y = np.array(y0, dtype=float)
    s = float(s0)
    s_eval = np.empty(0) if s_eval is None else np.asarray(s_eval, dtype=float)
    eval_y = np.empty((len(s_eval), len(y)))
    ie = 0
    while ie < len(s_eval) and s_eval[ie] <= s:
        eval_y[ie] = y
        ie += 1
    rec_s = [s] if record else None
    rec_y = [y.copy()] if record else None

    if isinstance(event, int):
        def gval(ss, yy):
            return yy[event]
    else:
        gval = event

    k1 = np.asarray(fun(s, y), dtype=float)
    h = min(h_init, h_max)
    nsteps = 0
    while True:
        if nsteps >= max_steps:
            return _pack(STATUS_MAXSTEPS, s, y, nsteps, eval_y, ie, rec_s, rec_y)
        target = s_eval[ie] if ie < len(s_eval) and s_eval[ie] < s_end else s_end
        h_try = min(h, target - s)
        clamped = h_try < h
        try:
            with np.errstate(all="raise"):
                y_new, err_vec = _stages(fun, s, y, k1, h_try)
                scale = abs_tol + rel_tol * np.maximum(np.abs(y), np.abs(y_new))
                err = float(np.max(np.abs(err_vec) / scale))
        except (ZeroDivisionError, FloatingPointError, OverflowError):
            err = math.inf
        if not math.isfinite(err) or err > 1.0:
            fac = 0.2 if not math.isfinite(err) else max(0.2, 0.9 * err ** -0.2)
            h = h_try * fac
            if h < h_min:
                return _pack(STATUS_UNDERFLOW, s, y, nsteps, eval_y, ie, rec_s, rec_y)
            continue

        s_new = target if clamped or h_try == target - s else s + h_try
        f_new = np.asarray(fun(s_new, y_new), dtype=float)
        nsteps += 1
        if event is not None:
            g0 = gval(s, y)
            g1 = gval(s_new, y_new)
            if _crossed(g0, g1, event_dir):
                s_star, y_star = _locate(fun, s, y, k1, h_try, y_new, f_new, event)
                if record:
                    rec_s.append(s_star)
                    rec_y.append(y_star.copy())
                return _pack(STATUS_EVENT, s_star, y_star, nsteps, eval_y, ie, rec_s, rec_y)

        s, y, k1 = s_new, y_new, f_new
        if record:
            rec_s.append(s)
            rec_y.append(y.copy())
        grow = 5.0 if err == 0.0 else min(5.0, 0.9 * err ** -0.2)
        h = max(h, h_try * grow) if clamped else h_try * grow
        h = min(h, h_max)
        while ie < len(s_eval) and s_eval[ie] <= s:
            eval_y[ie] = y
            ie += 1
        if s >= s_end:
            return _pack(STATUS_END, s, y, nsteps, eval_y, ie, rec_s, rec_y)


def _pack(status, s, y, nsteps, eval_y, ie, rec_s, rec_y):
    if rec_s is not None:
        rec_s = np.array(rec_s)
        rec_y = np.array(rec_y)
    return status, s, y, nsteps, eval_y, ie, rec_s, rec_y


def rkf45(system, params, y0, s_end, abs_tol, rel_tol, h_init, h_min, h_max,
          max_steps, s_eval, event_index, event_dir, record):
    """Integrate a built-in system (4-dim, or 20-dim with variational block)."""
    y0 = np.asarray(y0, dtype=float)
    rhs = builtin_rhs(system, params, len(y0) == 20)
    event = None if event_index < 0 else int(event_index)
    return solve(rhs, y0, 0.0, s_end, abs_tol, rel_tol, h_init, h_min, h_max,
                 max_steps, s_eval, event, event_dir, record)
