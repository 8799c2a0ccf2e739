"""Independent reference implementations used as test oracles."""

import itertools

import numpy as np


def grid_min(K, kappa, eps, cap, jitter=0.0, rho=0.0, step=0.01):
    """Exact minimum of the KMM objective over the feasible points of a
    regular grid with spacing ``step`` on ``[0, cap]^N``.

    The first N-1 coordinates are enumerated; along the last one the
    objective is a convex parabola, so only the two feasible grid points
    bracketing its vertex need checking.
    """
    n = len(kappa)
    Q = K + (jitter + rho) * np.eye(n)
    c = kappa + rho
    const = 0.5 * rho * n
    lo, hi = n * (1 - eps) - 1e-9, n * (1 + eps) + 1e-9
    kmax_box = int(round(cap / step))
    axis = np.arange(kmax_box + 1) * step
    if n > 1:
        P = np.array(list(itertools.product(axis, repeat=n - 1)))
    else:
        P = np.zeros((1, 0))
    s = P.sum(axis=1)
    base = 0.5 * np.einsum("ij,jk,ik->i", P, Q[:-1, :-1], P) - P @ c[:-1] + const
    lin = P @ Q[:-1, -1] - c[-1]
    qnn = Q[-1, -1]
    kmin = np.maximum(0, np.ceil((lo - s) / step - 1e-9)).astype(int)
    kmax = np.minimum(kmax_box, np.floor((hi - s) / step + 1e-9)).astype(int)
    ok = kmin <= kmax
    tstar = -lin / qnn
    best = np.full(len(P), np.inf)
    for k in (np.floor(tstar / step), np.ceil(tstar / step)):
        k = np.clip(k.astype(int), kmin, kmax)
        t = k * step
        f = base + lin * t + 0.5 * qnn * t * t
        best = np.where(ok, np.minimum(best, f), best)
    return best.min()


def dykstra(v, lo, hi, cap, iters=20000):
    """Alternating projections with Dykstra corrections onto box and slab."""
    x = v.copy()
    p = np.zeros_like(v)
    q = np.zeros_like(v)
    for _ in range(iters):
        y = np.clip(x + p, 0, cap)
        p = x + p - y
        z = y + q
        s = z.sum()
        shift = 0.0 if lo <= s <= hi else ((hi if s > hi else lo) - s) / len(v)
        x_new = z + shift
        q = z - x_new
        # stop only once both sets agree, not merely when x stalls
        done = np.max(np.abs(x_new - x)) < 1e-15 and np.max(np.abs(x_new - y)) < 1e-12
        x = x_new
        if done:
            break
    return np.clip(x, 0, cap)


def cg(A, b, tol=1e-14, max_iter=10000):
    """Textbook conjugate gradient for symmetric positive definite A."""
    x = np.zeros_like(b)
    r = b - A @ x
    p = r.copy()
    rr = r @ r
    for _ in range(max_iter):
        if np.sqrt(rr) <= tol * max(1.0, np.linalg.norm(b)):
            break
        Ap = A @ p
        a = rr / (p @ Ap)
        x += a * p
        r -= a * Ap
        rr_new = r @ r
        p = r + (rr_new / rr) * p
        rr = rr_new
    return x


def central_diff(f, W, h=1e-5):
    g = np.zeros_like(W)
    for idx in itertools.product(*map(range, W.shape)):
        Wp, Wm = W.copy(), W.copy()
        Wp[idx] += h
        Wm[idx] -= h
        g[idx] = (f(Wp) - f(Wm)) / (2 * h)
    return g
