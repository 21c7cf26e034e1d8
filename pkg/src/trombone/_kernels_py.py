"""Pure numpy implementation of the solver kernels.

Mirrors ``_kernels.pyx`` function for function.  Decision matrix ``X`` has
one row per aircraft in landing order with columns (d, v_L, v_theta, v_f).
"""
import numpy as np

HOUR = 3600.0
EPS_SING = 1e-6
TWO_PI = 2.0 * np.pi


def path_terms(ex, ey, side, d, xf, yf, r):
    """Tangent-leg length, arc angle and their d-derivatives, vectorized.

    Returns ``(d_l, theta, dl_dd, th_dd, bad)`` where ``bad`` is the index of
    the first aircraft without a tangent, or -1.
    """
    vx = ex - (xf - d)
    vy = ey - (yf + side * r)
    d0_sq = vx * vx + vy * vy
    ok = np.sqrt(d0_sq) > r + EPS_SING
    if not ok.all():
        return None, None, None, None, int(np.argmin(ok))
    root = np.sqrt(d0_sq - r * r)
    a = r * r / d0_sq
    b = r * root / d0_sq
    px = a * vx - side * b * vy
    py = a * vy + side * b * vx
    theta = np.arctan2(np.abs(px), -side * py)
    # reflex arc when the tangent point lies right of the center
    theta = np.where(px > 0, TWO_PI - theta, theta)
    dl_dd = vx / root
    th_dd = (np.abs(vy) - r * vx / root) / d0_sq
    return root, theta, dl_dd, th_dd, -1


def flight_times(X, tau, ex, ey, side, xf, yf, r):
    """FAF times and their partials with respect to each column of ``X``."""
    d = X[:, 0]
    d_l, theta, dl_dd, th_dd, bad = path_terms(ex, ey, side, d, xf, yf, r)
    if bad >= 0:
        return None, None, bad
    vl, vt, vf = X[:, 1], X[:, 2], X[:, 3]
    arc = r * theta
    t = tau + HOUR * (d_l / vl + arc / vt + d / vf)
    dt = np.empty_like(X)
    dt[:, 0] = HOUR * (dl_dd / vl + r * th_dd / vt + 1.0 / vf)
    dt[:, 1] = -HOUR * d_l / (vl * vl)
    dt[:, 2] = -HOUR * arc / (vt * vt)
    dt[:, 3] = -HOUR * d / (vf * vf)
    return t, dt, -1


def objective(X, tau, ex, ey, side, xf, yf, r, tsep, eta, w, vmax, inv_span):
    """Weighted objective and gradient.

    ``eta > 0`` smooths the separation hinge with a softplus of that width;
    ``eta == 0`` evaluates the exact hinge (gradient is a subgradient).
    ``w`` is (safe, thru, eff, speed).  Returns ``(f, grad, t, bad)``.
    """
    t, dt, bad = flight_times(X, tau, ex, ey, side, xf, yf, r)
    if bad >= 0:
        return np.nan, None, None, bad
    n = X.shape[0]
    dfdt = np.zeros(n)
    sep = 0.0
    if n > 1:
        gap = t[:-1] + tsep - t[1:]
        if eta > 0:
            z = gap / eta
            sep = float(np.sum(eta * np.logaddexp(0.0, z)))
            slope = 0.5 * (1.0 + np.tanh(0.5 * z))
        else:
            sep = float(np.sum(np.maximum(gap, 0.0)))
            slope = (gap > 0).astype(float)
        dfdt[:-1] += w[0] * slope
        dfdt[1:] -= w[0] * slope
    dfdt[-1] += w[1]
    deficit = (vmax[None, :] - X[:, 1:]) * inv_span[None, :]
    f = w[0] * sep + w[1] * t[-1] + w[2] * float(np.sum(X[:, 0])) + w[3] * float(np.sum(deficit))
    grad = dt * dfdt[:, None]
    grad[:, 0] += w[2]
    grad[:, 1:] -= w[3] * inv_span[None, :]
    return f, grad, t, -1


def project(X, lo, hi):
    """Euclidean projection of rows of ``X`` onto the box and v_L >= v_theta >= v_f, in place.

    At the optimum the active ordering constraints split the speeds into
    consecutive blocks, each sitting at its mean clipped to the block's
    common bounds.  There are only four such splits, so we build each
    candidate and keep the feasible one nearest to the input.
    ``lo``/``hi`` must be tightened (nonincreasing over the speed columns).
    """
    y = X[:, 1:].copy()
    l1, l2, l3 = lo[1:]
    h1, h2, h3 = hi[1:]
    cands = np.empty((4,) + y.shape)
    cands[0] = np.clip(y, lo[1:], hi[1:])
    m12 = np.clip(0.5 * (y[:, 0] + y[:, 1]), l1, h2)
    cands[1] = np.column_stack([m12, m12, cands[0][:, 2]])
    m23 = np.clip(0.5 * (y[:, 1] + y[:, 2]), l2, h3)
    cands[2] = np.column_stack([cands[0][:, 0], m23, m23])
    m = np.clip(y.mean(axis=1), l1, h3)
    cands[3] = np.column_stack([m, m, m])
    domain_ok = np.array([True, l1 <= h2, l2 <= h3, l1 <= h3])
    ok = (cands[:, :, 0] >= cands[:, :, 1]) & (cands[:, :, 1] >= cands[:, :, 2]) & domain_ok[:, None]
    dist = np.where(ok, np.sum((cands - y[None]) ** 2, axis=2), np.inf)
    pick = np.argmin(dist, axis=0)
    X[:, 1:] = cands[pick, np.arange(len(pick))]
    np.clip(X[:, 0], lo[0], hi[0], out=X[:, 0])
    return X


def spg(X0, tau, ex, ey, side, xf, yf, r, tsep, eta, w, vmax, inv_span, lo, hi, scale,
        max_iter, rel_tol, window):
    """Spectral projected gradient with a nonmonotone Armijo line search.

    Steps are taken in the diagonal metric ``scale**2`` so extensions (NM)
    and speeds (knots) move comparably.  Stops when the objective has fallen
    by no more than ``rel_tol`` (relative) over the last ``window``
    iterations.  Returns ``(X, iterations, converged, bad)``.
    """
    M, gamma = 10, 1e-4
    metric = scale * scale

    def fg(X):
        return objective(X, tau, ex, ey, side, xf, yf, r, tsep, eta, w, vmax, inv_span)

    X = project(np.array(X0, dtype=float), lo, hi)
    f, g, _, bad = fg(X)
    if bad >= 0:
        return X, 0, False, bad
    history = [f]
    recent = [f]
    alpha = 1.0 / max(float(np.max(np.abs(g * scale))), 1e-12)
    for it in range(1, max_iter + 1):
        step = project(X - alpha * metric * g, lo, hi) - X
        gd = float(np.sum(g * step))
        if gd >= 0 or float(np.max(np.abs(step / scale))) < 1e-14:
            return X, it, True, -1
        f_ref = max(recent)
        lam = 1.0
        while True:
            Xn = X + lam * step
            fn, gn, _, bad = fg(Xn)
            if bad >= 0:
                return X, it, False, bad
            if fn <= f_ref + gamma * lam * gd:
                break
            # safeguarded quadratic backtrack
            denom = 2.0 * (fn - f - lam * gd)
            lam_q = -gd * lam * lam / denom if denom > 0 else 0.5 * lam
            lam = min(max(lam_q, 0.1 * lam), 0.5 * lam)
            if lam < 1e-16:
                return X, it, True, -1
        # rounding in X + lam*step can leave the feasible set by an ulp
        project(Xn, lo, hi)
        s = Xn - X
        y = gn - g
        sy = float(np.sum(s * y))
        ss = float(np.sum((s / scale) ** 2))
        alpha = min(max(ss / sy, 1e-12), 1e12) if sy > 0 else 1e12
        X, f, g = Xn, fn, gn
        history.append(f)
        recent.append(f)
        if len(recent) > M:
            recent.pop(0)
        if len(history) > window:
            if history[-1 - window] - f <= rel_tol * max(1.0, abs(f)):
                return X, it, True, -1
    return X, max_iter, False, -1
