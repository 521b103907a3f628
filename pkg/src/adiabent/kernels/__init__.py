"""Hot loops with interchangeable numba and numpy implementations.

The default backend is numba when importable; ``ADIABENT_DISABLE_NUMBA=1``
selects numpy. Each wrapper also accepts an explicit ``backend`` argument.
"""

import numpy as np

from .. import _accel
from . import _numpy

if _accel.HAVE_NUMBA:
    from . import _numba
else:  # pragma: no cover
    _numba = None

MAX_ITER = _numpy.MAX_ITER


def _impl(backend):
    return _numba if _accel.resolve(backend) == "numba" else _numpy


def secular_roots(d, w, mu, backend=None):
    d = np.ascontiguousarray(d, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    return _impl(backend).secular_roots(d, w, float(mu))


def secular_roots_grid(d, w, mus, backend=None):
    d = np.ascontiguousarray(d, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    mus = np.ascontiguousarray(mus, dtype=np.float64)
    return _impl(backend).secular_roots_grid(d, w, mus)


def lagrange_coefficients(d, w, r, order, backend=None):
    d = np.ascontiguousarray(d, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    return _impl(backend).lagrange_coefficients(d, w, int(r), int(order))


def four_index_sum(c0, c1, c2, c3, backend=None):
    arrs = [np.ascontiguousarray(c, dtype=np.complex128) for c in (c0, c1, c2, c3)]
    return complex(_impl(backend).four_index_sum(*arrs))


def propagate_eig(vecs, vals, dt, psi, backend=None):
    vecs = np.ascontiguousarray(vecs, dtype=np.complex128)
    vals = np.ascontiguousarray(vals, dtype=np.float64)
    psi = np.ascontiguousarray(psi, dtype=np.complex128)
    return _impl(backend).propagate_eig(vecs, vals, float(dt), psi)
