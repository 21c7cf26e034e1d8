# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled solver kernels; same contract as ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, atan2, fabs, exp, log1p, M_PI

cnp.import_array()

cdef double HOUR = 3600.0
cdef double EPS_SING = 1e-6


cdef inline int _path_one(double ex, double ey, double side, double d,
                          double xf, double yf, double r,
                          double* d_l, double* theta, double* dl_dd, double* th_dd) nogil:
    cdef double vx = ex - (xf - d)
    cdef double vy = ey - (yf + side * r)
    cdef double d0_sq = vx * vx + vy * vy
    if sqrt(d0_sq) <= r + EPS_SING:
        return 1
    cdef double root = sqrt(d0_sq - r * r)
    cdef double a = r * r / d0_sq
    cdef double b = r * root / d0_sq
    cdef double px = a * vx - side * b * vy
    cdef double py = a * vy + side * b * vx
    cdef double th = atan2(fabs(px), -side * py)
    if px > 0:
        th = 2.0 * M_PI - th
    d_l[0] = root
    theta[0] = th
    dl_dd[0] = vx / root
    th_dd[0] = (fabs(vy) - r * vx / root) / d0_sq
    return 0


def path_terms(double[::1] ex, double[::1] ey, double[::1] side, double[::1] d,
               double xf, double yf, double r):
    cdef Py_ssize_t n = d.shape[0], i
    out = np.empty((4, n))
    cdef double[:, ::1] o = out
    for i in range(n):
        if _path_one(ex[i], ey[i], side[i], d[i], xf, yf, r,
                     &o[0, i], &o[1, i], &o[2, i], &o[3, i]):
            return None, None, None, None, int(i)
    return out[0], out[1], out[2], out[3], -1


cdef int _times(double[:, ::1] X, double[::1] tau, double[::1] ex, double[::1] ey,
                double[::1] side, double xf, double yf, double r,
                double[::1] t, double[:, ::1] dt) nogil:
    cdef Py_ssize_t n = X.shape[0], i
    cdef double d_l, theta, dl_dd, th_dd, d, vl, vt, vf, arc
    for i in range(n):
        d = X[i, 0]
        if _path_one(ex[i], ey[i], side[i], d, xf, yf, r, &d_l, &theta, &dl_dd, &th_dd):
            return <int>i
        vl = X[i, 1]
        vt = X[i, 2]
        vf = X[i, 3]
        arc = r * theta
        t[i] = tau[i] + HOUR * (d_l / vl + arc / vt + d / vf)
        dt[i, 0] = HOUR * (dl_dd / vl + r * th_dd / vt + 1.0 / vf)
        dt[i, 1] = -HOUR * d_l / (vl * vl)
        dt[i, 2] = -HOUR * arc / (vt * vt)
        dt[i, 3] = -HOUR * d / (vf * vf)
    return -1


def flight_times(double[:, ::1] X, double[::1] tau, double[::1] ex, double[::1] ey,
                 double[::1] side, double xf, double yf, double r):
    cdef Py_ssize_t n = X.shape[0]
    t = np.empty(n)
    dt = np.empty((n, 4))
    cdef int bad = _times(X, tau, ex, ey, side, xf, yf, r, t, dt)
    if bad >= 0:
        return None, None, bad
    return t, dt, -1


cdef inline double _softplus(double z) nogil:
    if z > 0:
        return z + log1p(exp(-z))
    return log1p(exp(z))


cdef inline double _sigmoid(double z) nogil:
    cdef double e
    if z >= 0:
        return 1.0 / (1.0 + exp(-z))
    e = exp(z)
    return e / (1.0 + e)


cdef int _obj(double[:, ::1] X, double[::1] tau, double[::1] ex, double[::1] ey,
              double[::1] side, double xf, double yf, double r, double tsep, double eta,
              double[::1] w, double[::1] vmax, double[::1] inv_span,
              double[::1] t, double[:, ::1] dt, double[:, ::1] g, double* f_out) nogil:
    cdef Py_ssize_t n = X.shape[0], i, j
    cdef double sep = 0.0, gap, slope, dfdt_prev, dfdt_i, stretch = 0.0, deficit = 0.0
    cdef int bad = _times(X, tau, ex, ey, side, xf, yf, r, t, dt)
    if bad >= 0:
        return bad
    # dfdt for aircraft i collects +w_safe*slope from pair (i, i+1) and
    # -w_safe*slope from pair (i-1, i)
    dfdt_prev = 0.0
    for i in range(n):
        dfdt_i = dfdt_prev
        if i + 1 < n:
            gap = t[i] + tsep - t[i + 1]
            if eta > 0:
                sep += eta * _softplus(gap / eta)
                slope = _sigmoid(gap / eta)
            else:
                if gap > 0:
                    sep += gap
                    slope = 1.0
                else:
                    slope = 0.0
            dfdt_i += w[0] * slope
            dfdt_prev = -w[0] * slope
        if i == n - 1:
            dfdt_i += w[1]
        stretch += X[i, 0]
        for j in range(4):
            g[i, j] = dt[i, j] * dfdt_i
        g[i, 0] += w[2]
        for j in range(3):
            deficit += (vmax[j] - X[i, j + 1]) * inv_span[j]
            g[i, j + 1] -= w[3] * inv_span[j]
    f_out[0] = w[0] * sep + w[1] * t[n - 1] + w[2] * stretch + w[3] * deficit
    return -1


def objective(double[:, ::1] X, double[::1] tau, double[::1] ex, double[::1] ey,
              double[::1] side, double xf, double yf, double r, double tsep, double eta,
              double[::1] w, double[::1] vmax, double[::1] inv_span):
    cdef Py_ssize_t n = X.shape[0]
    t_arr = np.empty(n)
    dt_arr = np.empty((n, 4))
    grad_arr = np.empty((n, 4))
    cdef double[::1] t = t_arr
    cdef double[:, ::1] dt = dt_arr
    cdef double[:, ::1] g = grad_arr
    cdef double f = 0.0
    cdef int bad
    with nogil:
        bad = _obj(X, tau, ex, ey, side, xf, yf, r, tsep, eta, w, vmax, inv_span, t, dt, g, &f)
    if bad >= 0:
        return np.nan, None, None, bad
    return f, grad_arr, t_arr, -1


cdef inline double _clip(double v, double lo, double hi) nogil:
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


cdef inline void _try(double c1, double c2, double c3, double y1, double y2, double y3,
                      double* best, double* out) nogil:
    cdef double dist
    if c1 >= c2 and c2 >= c3:
        dist = (c1 - y1) * (c1 - y1) + (c2 - y2) * (c2 - y2) + (c3 - y3) * (c3 - y3)
        if dist < best[0]:
            best[0] = dist
            out[0] = c1
            out[1] = c2
            out[2] = c3


cdef void _project(double[:, ::1] X, double[::1] lo, double[::1] hi) nogil:
    # nearest feasible candidate over the four block splits of the speed chain
    cdef Py_ssize_t n = X.shape[0], i
    cdef double y1, y2, y3, c1, c3, m, best
    cdef double out[3]
    for i in range(n):
        y1 = X[i, 1]
        y2 = X[i, 2]
        y3 = X[i, 3]
        best = 1e300
        c1 = _clip(y1, lo[1], hi[1])
        c3 = _clip(y3, lo[3], hi[3])
        _try(c1, _clip(y2, lo[2], hi[2]), c3, y1, y2, y3, &best, out)
        if lo[1] <= hi[2]:
            m = _clip(0.5 * (y1 + y2), lo[1], hi[2])
            _try(m, m, c3, y1, y2, y3, &best, out)
        if lo[2] <= hi[3]:
            m = _clip(0.5 * (y2 + y3), lo[2], hi[3])
            _try(c1, m, m, y1, y2, y3, &best, out)
        if lo[1] <= hi[3]:
            m = _clip((y1 + y2 + y3) / 3.0, lo[1], hi[3])
            _try(m, m, m, y1, y2, y3, &best, out)
        X[i, 0] = _clip(X[i, 0], lo[0], hi[0])
        X[i, 1] = out[0]
        X[i, 2] = out[1]
        X[i, 3] = out[2]


def project(double[:, ::1] X, double[::1] lo, double[::1] hi):
    with nogil:
        _project(X, lo, hi)
    return np.asarray(X)


def spg(X0, double[::1] tau, double[::1] ex, double[::1] ey, double[::1] side,
        double xf, double yf, double r, double tsep, double eta,
        double[::1] w, double[::1] vmax, double[::1] inv_span,
        double[::1] lo, double[::1] hi, double[::1] scale,
        int max_iter, double rel_tol, int window):
    cdef Py_ssize_t n = tau.shape[0], i, j, k
    X_arr = np.array(X0, dtype=float, order="C")
    cdef double[:, ::1] X = X_arr
    cdef double[:, ::1] Xn = np.empty((n, 4))
    cdef double[:, ::1] step = np.empty((n, 4))
    cdef double[:, ::1] g = np.empty((n, 4))
    cdef double[:, ::1] gn = np.empty((n, 4))
    cdef double[:, ::1] dt = np.empty((n, 4))
    cdef double[::1] t = np.empty(n)
    cdef double[::1] hist = np.empty(max_iter + 1)
    cdef double[10] recent
    cdef int M = 10, n_recent, it, bad, converged = 0, iters = max_iter
    cdef double gamma = 1e-4, f, fn, alpha, gd, smax, f_ref, lam, denom, lam_q
    cdef double sy, ss, s, y, mx
    with nogil:
        _project(X, lo, hi)
        bad = _obj(X, tau, ex, ey, side, xf, yf, r, tsep, eta, w, vmax, inv_span, t, dt, g, &f)
        if bad >= 0:
            iters = 0
        else:
            hist[0] = f
            recent[0] = f
            n_recent = 1
            mx = 0.0
            for i in range(n):
                for j in range(4):
                    mx = max(mx, fabs(g[i, j] * scale[j]))
            alpha = 1.0 / max(mx, 1e-12)
            it = 1
            while it <= max_iter:
                for i in range(n):
                    for j in range(4):
                        step[i, j] = X[i, j] - alpha * scale[j] * scale[j] * g[i, j]
                _project(step, lo, hi)
                gd = 0.0
                smax = 0.0
                for i in range(n):
                    for j in range(4):
                        step[i, j] -= X[i, j]
                        gd += g[i, j] * step[i, j]
                        smax = max(smax, fabs(step[i, j] / scale[j]))
                if gd >= 0 or smax < 1e-14:
                    converged = 1
                    iters = it
                    break
                f_ref = recent[0]
                for k in range(1, n_recent):
                    f_ref = max(f_ref, recent[k])
                lam = 1.0
                while True:
                    for i in range(n):
                        for j in range(4):
                            Xn[i, j] = X[i, j] + lam * step[i, j]
                    bad = _obj(Xn, tau, ex, ey, side, xf, yf, r, tsep, eta, w, vmax, inv_span,
                               t, dt, gn, &fn)
                    if bad >= 0:
                        break
                    if fn <= f_ref + gamma * lam * gd:
                        break
                    # safeguarded quadratic backtrack
                    denom = 2.0 * (fn - f - lam * gd)
                    lam_q = -gd * lam * lam / denom if denom > 0 else 0.5 * lam
                    lam = min(max(lam_q, 0.1 * lam), 0.5 * lam)
                    if lam < 1e-16:
                        break
                if bad >= 0:
                    iters = it
                    break
                if lam < 1e-16:
                    converged = 1
                    iters = it
                    break
                # rounding in X + lam*step can leave the feasible set by an ulp
                _project(Xn, lo, hi)
                sy = 0.0
                ss = 0.0
                for i in range(n):
                    for j in range(4):
                        s = Xn[i, j] - X[i, j]
                        y = gn[i, j] - g[i, j]
                        sy += s * y
                        ss += (s / scale[j]) * (s / scale[j])
                        X[i, j] = Xn[i, j]
                        g[i, j] = gn[i, j]
                alpha = min(max(ss / sy, 1e-12), 1e12) if sy > 0 else 1e12
                f = fn
                hist[it] = f
                if n_recent < M:
                    recent[n_recent] = f
                    n_recent += 1
                else:
                    for k in range(M - 1):
                        recent[k] = recent[k + 1]
                    recent[M - 1] = f
                if it >= window:
                    if hist[it - window] - f <= rel_tol * max(1.0, fabs(f)):
                        converged = 1
                        iters = it
                        break
                it += 1
    return X_arr, iters, bool(converged), (bad if bad >= 0 else -1)


