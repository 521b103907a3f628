"""Compiled kernels.

Every function here has a numpy twin in ``_numpy`` with the same signature
and semantics; ``tests/test_kernels.py`` checks that they agree.
"""

import numpy as np
from numba import njit

_EPS = np.finfo(np.float64).eps
MAX_ITER = 200


@njit(cache=True)
def _bracket(d, w, rho, mu, wsum, k):
    m = d.shape[0]
    if k == m - 1:
        return m - 1, 0.0, mu * wsum
    width = d[k + 1] - d[k]
    mid = 0.5 * width
    g = rho
    for j in range(m):
        g += w[j] / ((d[j] - d[k]) - mid)
    if g >= 0.0:
        return k, 0.0, mid
    return k + 1, -(width - mid), 0.0


@njit(cache=True)
def secular_roots(d, w, mu):
    """Roots of ``1/mu + sum_j w_j/(d_j - s)`` for ``mu > 0``.

    Parameters
    ----------
    d : ndarray
        Strictly ascending poles.
    w : ndarray
        Strictly positive weights.
    mu : float
        Positive coupling.

    Returns
    -------
    origin : ndarray of int
        Pole each root is measured from.
    tau : ndarray
        Offset of each root from its origin pole.
    iters : ndarray of int
        Iterations used, ``-1`` where the cap was hit.
    """
    m = d.shape[0]
    origin = np.empty(m, np.int64)
    tau = np.empty(m)
    iters = np.empty(m, np.int64)
    rho = 1.0 / mu
    wsum = 0.0
    for j in range(m):
        wsum += w[j]
    delta = np.empty(m)
    for k in range(m):
        o, a, b = _bracket(d, w, rho, mu, wsum, k)
        if m == 1:
            origin[k] = 0
            tau[k] = b
            iters[k] = 0
            continue
        rest = rho
        for j in range(m):
            delta[j] = d[j] - d[o]
            if j != o:
                rest += w[j] / delta[j]
        t = 0.5 * (a + b)
        if rest != 0.0:
            guess = w[o] / rest
            if guess > a and guess < b:
                t = guess
        done = -1
        for it in range(MAX_ITER):
            g = rho
            gp = 0.0
            for j in range(m):
                r = 1.0 / (delta[j] - t)
                g += w[j] * r
                gp += w[j] * r * r
            if g == 0.0:
                done = it
                break
            if g > 0.0:
                b = t
            else:
                a = t
            step = g / gp
            if abs(step) <= 4.0 * _EPS * abs(t):
                done = it
                break
            tn = t - step
            if not (tn > a and tn < b):
                tn = 0.5 * (a + b)
                if not (tn > a and tn < b):
                    done = it
                    break
            t = tn
        origin[k] = o
        tau[k] = t
        iters[k] = done
    return origin, tau, iters


@njit(cache=True)
def secular_roots_grid(d, w, mus):
    """Ascending roots for each positive coupling in ``mus``; row per coupling."""
    g = mus.shape[0]
    m = d.shape[0]
    out = np.empty((g, m))
    worst = 0
    for r in range(g):
        origin, tau, iters = secular_roots(d, w, mus[r])
        for k in range(m):
            out[r, k] = d[origin[k]] + tau[k]
            if iters[k] < 0:
                worst = -1
    return out, worst


@njit(cache=True)
def lagrange_coefficients(d, w, r, order):
    """Coefficients ``c_1..c_order`` of the series of the r-th root in ``mu``.

    Literal enumeration of the weak compositions of ``n - 1`` into ``n``
    parts; each part indexes the pole-weighted sum ``T_k``.
    """
    n_dim = d.shape[0]
    tk = np.zeros(order)
    for k in range(order):
        acc = 0.0
        for p in range(n_dim):
            if p == r:
                continue
            num = w[p]
            if k == 0:
                num -= 1.0 / (n_dim - 1)
            acc += num / (d[r] - d[p]) ** k
        tk[k] = acc
    coeffs = np.zeros(order)
    for n in range(1, order + 1):
        q = n - 1
        bars = n - 1
        slots = q + n - 1
        idx = np.arange(bars)
        total = 0.0
        while True:
            prod = 1.0
            prev = -1
            for t in range(bars):
                prod *= tk[idx[t] - prev - 1]
                prev = idx[t]
            prod *= tk[slots - prev - 1]
            total += prod
            t = bars - 1
            while t >= 0 and idx[t] == slots - bars + t:
                t -= 1
            if t < 0:
                break
            idx[t] += 1
            for u in range(t + 1, bars):
                idx[u] = idx[u - 1] + 1
        coeffs[n - 1] = -total / n
    return coeffs


@njit(cache=True)
def four_index_sum(c0, c1, c2, c3):
    """``sum_{ijkp} c0[i,j] conj(c1[k,j]) c2[k,p] conj(c3[i,p])``."""
    n, m = c0.shape
    acc = 0.0 + 0.0j
    for i in range(n):
        for j in range(m):
            a = c0[i, j]
            for k in range(n):
                b = a * np.conj(c1[k, j])
                for p in range(m):
                    acc += b * c2[k, p] * np.conj(c3[i, p])
    return acc


@njit(cache=True)
def propagate_eig(vecs, vals, dt, psi):
    """Apply ``V_c exp(-i L_c dt) V_c^H`` for ``c = 0, 1, ...`` in order.

    ``psi`` has shape ``(N, K)`` and is updated in place.
    """
    steps, n, _ = vecs.shape
    ncol = psi.shape[1]
    tmp = np.empty((n, ncol), np.complex128)
    for c in range(steps):
        for a in range(n):
            ph = np.exp(-1j * vals[c, a] * dt)
            for col in range(ncol):
                acc = 0.0 + 0.0j
                for b in range(n):
                    acc += np.conj(vecs[c, b, a]) * psi[b, col]
                tmp[a, col] = ph * acc
        for b in range(n):
            for col in range(ncol):
                acc = 0.0 + 0.0j
                for a in range(n):
                    acc += vecs[c, b, a] * tmp[a, col]
                psi[b, col] = acc
    return psi
