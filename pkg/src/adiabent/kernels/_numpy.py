"""Pure numpy kernels, vectorized where the algorithm allows."""

import numpy as np

_EPS = np.finfo(np.float64).eps
MAX_ITER = 200


def secular_roots(d, w, mu):
    m = d.shape[0]
    rho = 1.0 / mu
    if m == 1:
        return np.zeros(1, np.int64), np.array([mu * w[0]]), np.zeros(1, np.int64)
    lower = np.arange(m - 1)
    width = np.diff(d)
    mid = 0.5 * width
    gmid = rho + (w / ((d[None, :] - d[:-1, None]) - mid[:, None])).sum(axis=1)
    left = gmid >= 0.0
    origin = np.append(np.where(left, lower, lower + 1), m - 1)
    a = np.append(np.where(left, 0.0, -(width - mid)), 0.0)
    b = np.append(np.where(left, mid, 0.0), mu * w.sum())

    delta = d[None, :] - d[origin][:, None]
    own = np.zeros((m, m), bool)
    own[np.arange(m), origin] = True
    safe = np.where(own, 1.0, delta)
    rest = rho + np.where(own, 0.0, w / safe).sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        guess = w[origin] / rest
    ok = (rest != 0.0) & (guess > a) & (guess < b)
    t = np.where(ok, guess, 0.5 * (a + b))

    iters = np.full(m, -1, np.int64)
    active = np.ones(m, bool)
    for it in range(MAX_ITER):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        ti = t[idx]
        r = 1.0 / (delta[idx] - ti[:, None])
        g = rho + (w * r).sum(axis=1)
        gp = (w * r * r).sum(axis=1)
        zero = g == 0.0
        ai = np.where(g > 0.0, a[idx], ti)
        bi = np.where(g > 0.0, ti, b[idx])
        a[idx] = ai
        b[idx] = bi
        with np.errstate(divide="ignore", invalid="ignore"):
            step = g / gp
        conv = np.abs(step) <= 4.0 * _EPS * np.abs(ti)
        tn = ti - step
        out = ~((tn > ai) & (tn < bi))
        tn = np.where(out, 0.5 * (ai + bi), tn)
        stuck = out & ~((tn > ai) & (tn < bi))
        keep_old = zero | stuck | conv
        t[idx] = np.where(keep_old, ti, tn)
        finished = keep_old
        iters[idx[finished]] = it
        active[idx[finished]] = False
    return origin, t, iters


def secular_roots_grid(d, w, mus):
    out = np.empty((mus.shape[0], d.shape[0]))
    worst = 0
    for r, mu in enumerate(mus):
        origin, tau, iters = secular_roots(d, w, mu)
        out[r] = d[origin] + tau
        if np.any(iters < 0):
            worst = -1
    return out, worst


def lagrange_coefficients(d, w, r, order):
    n_dim = d.shape[0]
    others = np.arange(n_dim) != r
    diff = d[r] - d[others]
    wp = w[others]
    powers = np.arange(order)
    tk = (wp[None, :] / diff[None, :] ** powers[:, None]).sum(axis=1)
    # each of the N-1 zeroth-power terms carries -1/(N-1)
    tk[0] -= 1.0
    coeffs = np.zeros(order)
    series = np.array([1.0])
    for n in range(1, order + 1):
        series = np.convolve(series, tk)[:order]
        coeffs[n - 1] = -series[n - 1] / n
    return coeffs


def four_index_sum(c0, c1, c2, c3):
    return complex(np.einsum("ij,kj,kp,ip->", c0, c1.conj(), c2, c3.conj(), optimize=True))


def propagate_eig(vecs, vals, dt, psi):
    phases = np.exp(-1j * vals * dt)
    for c in range(vecs.shape[0]):
        v = vecs[c]
        psi[...] = v @ (phases[c][:, None] * (v.conj().T @ psi))
    return psi
