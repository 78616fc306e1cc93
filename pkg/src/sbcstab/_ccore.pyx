# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled numerical core.

Same API and algorithm as ``_pycore`` for the built-in systems; the whole
adaptive loop (including event location) runs in C without the GIL.
"""
from libc.math cimport sqrt, fabs, pow, isfinite, INFINITY
from libc.stdlib cimport malloc, realloc, free
from libc.string cimport memcpy

import numpy as np

COLLINEAR = 0
PLANAR = 1

DEF NMAX = 20

cdef double SQRT2 = 1.4142135623730951

cdef double C2 = 1.0 / 4, C3 = 3.0 / 8, C4 = 12.0 / 13, C5 = 1.0, C6 = 1.0 / 2
cdef double A21 = 1.0 / 4
cdef double A31 = 3.0 / 32, A32 = 9.0 / 32
cdef double A41 = 1932.0 / 2197, A42 = -7200.0 / 2197, A43 = 7296.0 / 2197
cdef double A51 = 439.0 / 216, A52 = -8.0, A53 = 3680.0 / 513, A54 = -845.0 / 4104
cdef double A61 = -8.0 / 27, A62 = 2.0, A63 = -3544.0 / 2565, A64 = 1859.0 / 4104, A65 = -11.0 / 40
cdef double B1 = 16.0 / 135, B3 = 6656.0 / 12825, B4 = 28561.0 / 56430, B5 = -9.0 / 50, B6 = 2.0 / 55
cdef double E1 = 1.0 / 360, E3 = -128.0 / 4275, E4 = -2197.0 / 75240, E5 = 1.0 / 50, E6 = 2.0 / 55

DEF STATUS_END = 0
DEF STATUS_EVENT = 1
DEF STATUS_UNDERFLOW = -1
DEF STATUS_MAXSTEPS = -2


cdef struct Model:
    int system
    double p0
    double p1
    int n


cdef void collinear_f(const double* y, double m, double E, double* f) noexcept nogil:
    cdef double Q1 = y[0], Q2 = y[1], P1 = y[2], P2 = y[3]
    cdef double a = (1.0 + 1.0 / m) / 16.0
    cdef double b = 0.25 / m
    cdef double q1s = Q1 * Q1, q2s = Q2 * Q2
    cdef double D1 = q1s + q2s, D2 = 2.0 * q1s + q2s
    cdef double D1s = D1 * D1, D2s = D2 * D2
    cdef double q24 = q2s * q2s, q14 = q1s * q1s
    cdef double VQ1 = (-2.0 * m * m * Q1 - 4.0 * m * Q1 * q24 / D1s
                       - 2.0 * Q1 * q24 / D2s - 2.0 * E * Q1 * q2s)
    cdef double VQ2 = (-4.0 * m * Q2 - 4.0 * m * q14 * Q2 / D1s
                       - 4.0 * q14 * Q2 / D2s - 2.0 * E * q1s * Q2)
    f[0] = 2.0 * a * q2s * P1 - b * Q1 * Q2 * P2
    f[1] = b * (2.0 * q1s * P2 - Q1 * Q2 * P1)
    f[2] = -(b * (2.0 * Q1 * P2 * P2 - Q2 * P1 * P2) + VQ1)
    f[3] = -(2.0 * a * Q2 * P1 * P1 - b * Q1 * P1 * P2 + VQ2)


cdef void collinear_j(const double* y, double m, double E, double* A) noexcept nogil:
    cdef double Q1 = y[0], Q2 = y[1], P1 = y[2], P2 = y[3]
    cdef double a = (1.0 + 1.0 / m) / 16.0
    cdef double b = 0.25 / m
    cdef double q1s = Q1 * Q1, q2s = Q2 * Q2
    cdef double g11 = 0.0, g22 = 0.0, g12 = 0.0
    cdef double alpha, w, D, D3
    cdef int i
    for i in range(2):
        if i == 0:
            alpha = 1.0
            w = 2.0 * m
        else:
            alpha = 2.0
            w = 1.0
        D = alpha * q1s + q2s
        D3 = D * D * D
        g11 += w * 2.0 * q2s * q2s * (q2s - 3.0 * alpha * q1s) / D3
        g22 += w * 2.0 * alpha * q1s * q1s * (alpha * q1s - 3.0 * q2s) / D3
        g12 += w * 8.0 * alpha * q1s * Q1 * q2s * Q2 / D3
    cdef double V11 = -2.0 * m * m - g11 - 2.0 * E * q2s
    cdef double V22 = -4.0 * m - g22 - 2.0 * E * q1s
    cdef double V12 = -g12 - 4.0 * E * Q1 * Q2
    A[0] = -b * Q2 * P2
    A[1] = 4.0 * a * Q2 * P1 - b * Q1 * P2
    A[2] = 2.0 * a * q2s
    A[3] = -b * Q1 * Q2
    A[4] = b * (4.0 * Q1 * P2 - Q2 * P1)
    A[5] = -b * Q1 * P1
    A[6] = -b * Q1 * Q2
    A[7] = 2.0 * b * q1s
    A[8] = -(2.0 * b * P2 * P2 + V11)
    A[9] = -(V12 - b * P1 * P2)
    A[10] = b * Q2 * P2
    A[11] = -b * (4.0 * Q1 * P2 - Q2 * P1)
    A[12] = -(V12 - b * P1 * P2)
    A[13] = -(2.0 * a * P1 * P1 + V22)
    A[14] = -(4.0 * a * Q2 * P1 - b * Q1 * P2)
    A[15] = b * Q1 * P1


cdef void planar_f(const double* y, double E, double* f) noexcept nogil:
    cdef double Q1 = y[0], Q2 = y[1], P1 = y[2], P2 = y[3]
    cdef double q1s = Q1 * Q1, q2s = Q2 * Q2
    cdef double r = q1s * q1s + q2s * q2s
    cdef double r32 = r * sqrt(r)
    cdef double h1 = 2.0 * Q1 * q2s * q2s * q2s / r32
    cdef double h2 = 2.0 * q1s * q1s * q1s * Q2 / r32
    f[0] = P1 * q2s / 8.0
    f[1] = P2 * q1s / 8.0
    f[2] = -P2 * P2 * Q1 / 8.0 + 2.0 * SQRT2 * Q1 + SQRT2 * h1 + 2.0 * E * Q1 * q2s
    f[3] = -P1 * P1 * Q2 / 8.0 + 2.0 * SQRT2 * Q2 + SQRT2 * h2 + 2.0 * E * q1s * Q2


cdef void planar_j(const double* y, double E, double* A) noexcept nogil:
    cdef double Q1 = y[0], Q2 = y[1], P1 = y[2], P2 = y[3]
    cdef double q1s = Q1 * Q1, q2s = Q2 * Q2
    cdef double q14 = q1s * q1s, q24 = q2s * q2s
    cdef double r = q14 + q24
    cdef double r52 = r * r * sqrt(r)
    cdef double h11 = 2.0 * q24 * q2s * (q24 - 5.0 * q14) / r52
    cdef double h22 = 2.0 * q14 * q1s * (q14 - 5.0 * q24) / r52
    cdef double h12 = 12.0 * q14 * Q1 * q24 * Q2 / r52
    cdef double V11 = -2.0 * SQRT2 - SQRT2 * h11 - 2.0 * E * q2s
    cdef double V22 = -2.0 * SQRT2 - SQRT2 * h22 - 2.0 * E * q1s
    cdef double V12 = -SQRT2 * h12 - 4.0 * E * Q1 * Q2
    A[0] = 0.0
    A[1] = P1 * Q2 / 4.0
    A[2] = q2s / 8.0
    A[3] = 0.0
    A[4] = P2 * Q1 / 4.0
    A[5] = 0.0
    A[6] = 0.0
    A[7] = q1s / 8.0
    A[8] = -(P2 * P2 / 8.0 + V11)
    A[9] = -V12
    A[10] = 0.0
    A[11] = -P2 * Q1 / 4.0
    A[12] = -V12
    A[13] = -(P1 * P1 / 8.0 + V22)
    A[14] = -P1 * Q2 / 4.0
    A[15] = 0.0


cdef void rhs(const Model* md, const double* y, double* f) noexcept nogil:
    cdef double A[16]
    cdef int i, j, k
    cdef double acc
    if md.system == 0:
        collinear_f(y, md.p0, md.p1, f)
    else:
        planar_f(y, md.p0, f)
    if md.n == 20:
        if md.system == 0:
            collinear_j(y, md.p0, md.p1, A)
        else:
            planar_j(y, md.p0, A)
        for i in range(4):
            for j in range(4):
                acc = 0.0
                for k in range(4):
                    acc = acc + A[4 * i + k] * y[4 + 4 * k + j]
                f[4 + 4 * i + j] = acc


cdef double step(const Model* md, const double* y, const double* k1, double h,
                 double* y5, double* err) noexcept nogil:
    """One RKF45 step; writes the fifth-order state and error vector."""
    cdef double k2[NMAX]
    cdef double k3[NMAX]
    cdef double k4[NMAX]
    cdef double k5[NMAX]
    cdef double k6[NMAX]
    cdef double t[NMAX]
    cdef int n = md.n
    cdef int i
    for i in range(n):
        t[i] = y[i] + h * (A21 * k1[i])
    rhs(md, t, k2)
    for i in range(n):
        t[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i])
    rhs(md, t, k3)
    for i in range(n):
        t[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
    rhs(md, t, k4)
    for i in range(n):
        t[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
    rhs(md, t, k5)
    for i in range(n):
        t[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i])
    rhs(md, t, k6)
    for i in range(n):
        y5[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i])
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i])
    return 0.0


cdef inline double hermite(double th, double h, double y0, double f0, double y1, double f1) noexcept nogil:
    cdef double t2 = th * th
    cdef double t3 = t2 * th
    return ((2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + th) * h * f0
            + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * h * f1)


cdef inline double hermite_d(double th, double h, double y0, double f0, double y1, double f1) noexcept nogil:
    cdef double t2 = th * th
    return ((6 * t2 - 6 * th) * y0 + (3 * t2 - 4 * th + 1) * h * f0
            + (-6 * t2 + 6 * th) * y1 + (3 * t2 - 2 * th) * h * f1)


cdef inline bint crossed(double g0, double g1, int direction) noexcept nogil:
    if direction < 0:
        return g0 > 0.0 and g1 <= 0.0
    if direction > 0:
        return g0 < 0.0 and g1 >= 0.0
    return (g0 > 0.0 and g1 <= 0.0) or (g0 < 0.0 and g1 >= 0.0)


cdef double locate(const Model* md, double s, const double* y, const double* k1, double h,
                   const double* y1, const double* f1, int k, double* ys) noexcept nogil:
    """Event root inside [s, s+h]; writes the state at the root into ys."""
    cdef double lo = 0.0, hi = 1.0
    cdef double g0 = y[k], d0 = k1[k], g1 = y1[k], d1 = f1[k]
    cdef double glo = g0
    cdef double th, g, dg, nxt, sigma, d
    cdef double err[NMAX]
    cdef double fs[NMAX]
    cdef int it
    th = g0 / (g0 - g1) if g0 != g1 else 0.5
    for it in range(100):
        g = hermite(th, h, g0, d0, g1, d1)
        if g == 0.0:
            break
        if (g > 0.0) == (glo > 0.0):
            lo = th
            glo = g
        else:
            hi = th
        if (hi - lo) * fabs(h) <= 1e-13:
            break
        dg = hermite_d(th, h, g0, d0, g1, d1)
        nxt = th - g / dg if dg != 0.0 else -1.0
        if not (lo < nxt < hi):
            nxt = 0.5 * (lo + hi)
        th = nxt
    sigma = th * h
    memcpy(ys, y1, md.n * sizeof(double))
    for it in range(8):
        step(md, y, k1, sigma, ys, err)
        rhs(md, ys, fs)
        if fs[k] == 0.0:
            break
        d = ys[k] / fs[k]
        if fabs(d) <= 4e-16 * max(1.0, fabs(s + sigma)):
            break
        sigma -= d
    return s + sigma


cdef struct Recorder:
    double* buf
    long size
    long cap
    int n


cdef int rec_push(Recorder* r, double s, const double* y) noexcept nogil:
    cdef double* nb
    if r.size >= r.cap:
        r.cap = 2 * r.cap + 64
        nb = <double*> realloc(r.buf, r.cap * (r.n + 1) * sizeof(double))
        if nb == NULL:
            return -1
        r.buf = nb
    r.buf[r.size * (r.n + 1)] = s
    memcpy(&r.buf[r.size * (r.n + 1) + 1], y, r.n * sizeof(double))
    r.size += 1
    return 0


cdef int drive(const Model* md, double* y, double* s_out, double s_end,
               double atol, double rtol, double h_init, double h_min, double h_max,
               long max_steps, const double* s_eval, int n_eval, double* eval_y,
               int* n_eval_done, int ev, int ev_dir, Recorder* rec, long* nsteps_out) noexcept nogil:
    cdef int n = md.n
    cdef double s = 0.0
    cdef double k1[NMAX]
    cdef double ynew[NMAX]
    cdef double errv[NMAX]
    cdef double fnew[NMAX]
    cdef double ystar[NMAX]
    cdef double h, h_try, target, err, sc, e, a, b, fac, grow, s_new
    cdef bint clamped
    cdef long nsteps = 0
    cdef int ie = 0
    cdef int i

    while ie < n_eval and s_eval[ie] <= s:
        memcpy(&eval_y[ie * n], y, n * sizeof(double))
        ie += 1
    if rec != NULL:
        rec_push(rec, s, y)
    rhs(md, y, k1)
    h = h_init if h_init < h_max else h_max
    while True:
        if nsteps >= max_steps:
            s_out[0] = s
            n_eval_done[0] = ie
            nsteps_out[0] = nsteps
            return STATUS_MAXSTEPS
        if ie < n_eval and s_eval[ie] < s_end:
            target = s_eval[ie]
        else:
            target = s_end
        h_try = h if h < target - s else target - s
        clamped = h_try < h
        step(md, y, k1, h_try, ynew, errv)
        err = 0.0
        for i in range(n):
            a = fabs(y[i])
            b = fabs(ynew[i])
            sc = atol + rtol * (a if a > b else b)
            e = fabs(errv[i]) / sc
            if not isfinite(e) or not isfinite(ynew[i]):
                err = INFINITY
                break
            if e > err:
                err = e
        if err > 1.0:
            if isfinite(err):
                fac = 0.9 * pow(err, -0.2)
                if fac < 0.2:
                    fac = 0.2
            else:
                fac = 0.2
            h = h_try * fac
            if h < h_min:
                s_out[0] = s
                n_eval_done[0] = ie
                nsteps_out[0] = nsteps
                return STATUS_UNDERFLOW
            continue

        if clamped or h_try == target - s:
            s_new = target
        else:
            s_new = s + h_try
        rhs(md, ynew, fnew)
        nsteps += 1
        if ev >= 0 and crossed(y[ev], ynew[ev], ev_dir):
            s_new = locate(md, s, y, k1, h_try, ynew, fnew, ev, ystar)
            memcpy(y, ystar, n * sizeof(double))
            if rec != NULL:
                rec_push(rec, s_new, y)
            s_out[0] = s_new
            n_eval_done[0] = ie
            nsteps_out[0] = nsteps
            return STATUS_EVENT

        s = s_new
        memcpy(y, ynew, n * sizeof(double))
        memcpy(k1, fnew, n * sizeof(double))
        if rec != NULL:
            rec_push(rec, s, y)
        if err == 0.0:
            grow = 5.0
        else:
            grow = 0.9 * pow(err, -0.2)
            if grow > 5.0:
                grow = 5.0
        if clamped:
            if h_try * grow > h:
                h = h_try * grow
        else:
            h = h_try * grow
        if h > h_max:
            h = h_max
        while ie < n_eval and s_eval[ie] <= s:
            memcpy(&eval_y[ie * n], y, n * sizeof(double))
            ie += 1
        if s >= s_end:
            s_out[0] = s
            n_eval_done[0] = ie
            nsteps_out[0] = nsteps
            return STATUS_END


cdef Model make_model(int system, params, int n):
    cdef Model md
    md.system = system
    md.p0 = params[0]
    md.p1 = params[1] if system == 0 else 0.0
    md.n = n
    return md


def field(int system, params, y):
    """Vector field of a built-in system as a length-4 array."""
    cdef double yy[4]
    cdef double f[4]
    cdef int i
    for i in range(4):
        yy[i] = y[i]
    if system == 0:
        collinear_f(yy, params[0], params[1], f)
    else:
        planar_f(yy, params[0], f)
    return np.array([f[0], f[1], f[2], f[3]])


def jacobian(int system, params, y):
    """Jacobian of the built-in vector field as a 4x4 array."""
    cdef double yy[4]
    cdef double A[16]
    cdef int i
    for i in range(4):
        yy[i] = y[i]
    if system == 0:
        collinear_j(yy, params[0], params[1], A)
    else:
        planar_j(yy, params[0], A)
    return np.array([A[i] for i in range(16)]).reshape(4, 4)


def rkf45(int system, params, y0, double s_end, double abs_tol, double rel_tol,
          double h_init, double h_min, double h_max, long max_steps, s_eval,
          int event_index, int event_dir, bint record):
    """Integrate a built-in system (4-dim, or 20-dim with variational block)."""
    cdef double[::1] y = np.array(y0, dtype=float)
    cdef int n = y.shape[0]
    if n != 4 and n != 20:
        raise ValueError("state must have length 4 or 20")
    if s_eval is None:
        s_eval = np.empty(0)
    cdef double[::1] se = np.ascontiguousarray(s_eval, dtype=float)
    cdef int n_eval = se.shape[0]
    eval_arr = np.empty((n_eval, n))
    cdef double[:, ::1] ev = eval_arr
    cdef Model md = make_model(system, params, n)
    cdef Recorder rec
    cdef Recorder* recp = NULL
    cdef double s = 0.0
    cdef int n_done = 0
    cdef long nsteps = 0
    cdef int status
    cdef double* se_ptr = &se[0] if n_eval > 0 else NULL
    cdef double* ev_ptr = &ev[0, 0] if n_eval > 0 else NULL
    rec.buf = NULL
    rec.size = 0
    rec.cap = 0
    rec.n = n
    if record:
        recp = &rec
    with nogil:
        status = drive(&md, &y[0], &s, s_end, abs_tol, rel_tol, h_init, h_min, h_max,
                       max_steps, se_ptr, n_eval, ev_ptr, &n_done,
                       event_index, event_dir, recp, &nsteps)
    rec_s = rec_y = None
    if record:
        try:
            if rec.size > 0:
                flat = np.asarray(<double[:rec.size * (n + 1)]> rec.buf).copy()
            else:
                flat = np.empty(0)
        finally:
            free(rec.buf)
        flat = flat.reshape(rec.size, n + 1)
        rec_s = flat[:, 0].copy()
        rec_y = flat[:, 1:].copy()
    return status, s, np.asarray(y), nsteps, eval_arr, n_done, rec_s, rec_y
