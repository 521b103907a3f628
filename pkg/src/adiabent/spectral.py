"""Spectral analysis of Hermitian operators under a rank-one update.

The central object is ``H(mu) = D + mu |v><v|`` with ``D`` diagonal and
non-degenerate. Eigenvalues come from a bracketed secular-equation solver
(see :mod:`adiabent.kernels`) and eigenvectors from the resolvent formula
``|s> = gamma (s - D)^{-1} |v>``. A dense LAPACK eigendecomposition is kept
alongside as the reference implementation used by the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import NumericalError, PoleError, SingularError, ValidationError

HERMITIAN_ATOL = 1e-12
UNIT_NORM_TOL = 1e-12
ZERO_COMPONENT = 1e-15
POLE_TOL = 1e-14
MAX_SERIES_ORDER = 8
_EPS = float(np.finfo(np.float64).eps)


def _frozen(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def as_hermitian(h, atol: float = HERMITIAN_ATOL) -> np.ndarray:
    """Validate a square Hermitian matrix and return it as a complex array."""
    h = np.asarray(h, dtype=np.complex128)
    if h.ndim == 0:
        h = h.reshape(1, 1)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {h.shape}")
    if not np.all(np.isfinite(h)):
        raise ValidationError("matrix has non-finite entries")
    dev = np.max(np.abs(h - h.conj().T)) if h.size else 0.0
    if dev > atol:
        raise ValidationError(f"matrix is not Hermitian (max |H - H^H| = {dev:.3e})")
    return h


def fix_phase(vecs: np.ndarray) -> np.ndarray:
    """Rotate each column so its largest-magnitude entry is real and positive."""
    vecs = np.array(vecs, dtype=np.complex128, copy=True)
    if vecs.ndim == 1:
        return fix_phase(vecs[:, None])[:, 0]
    idx = np.argmax(np.abs(vecs), axis=0)
    lead = vecs[idx, np.arange(vecs.shape[1])]
    mag = np.abs(lead)
    phase = np.where(mag > 0, lead / np.where(mag > 0, mag, 1.0), 1.0)
    vecs /= phase[None, :]
    vecs[idx, np.arange(vecs.shape[1])] = mag
    return vecs


@dataclass(frozen=True)
class SpectralDecomposition:
    """Ascending eigenvalues with orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    nondegenerate: bool = False

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=np.float64)
        vec = np.asarray(self.eigenvectors, dtype=np.complex128)
        n = lam.shape[0]
        if lam.ndim != 1 or vec.shape != (n, n):
            raise ValidationError("eigenvalue/eigenvector shapes disagree")
        steps = np.diff(lam)
        if self.nondegenerate and np.any(steps <= 0):
            raise ValidationError("eigenvalues not strictly ascending")
        if np.any(steps < 0):
            raise ValidationError("eigenvalues not ascending")
        gram = vec.conj().T @ vec
        if n and np.max(np.abs(gram - np.eye(n))) > 1e-10:
            raise ValidationError("eigenvectors are not orthonormal")
        object.__setattr__(self, "eigenvalues", _frozen(lam))
        object.__setattr__(self, "eigenvectors", _frozen(vec))

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues[None, :]) @ v.conj().T


def eigendecompose(h, nondegenerate: bool = False) -> SpectralDecomposition:
    """Dense eigendecomposition with the phase convention of :func:`fix_phase`."""
    h = as_hermitian(h)
    lam, vec = np.linalg.eigh(h)
    return SpectralDecomposition(lam, fix_phase(vec), nondegenerate=nondegenerate)


def jitter_spectrum(d, spacing: float | None = None) -> np.ndarray:
    """Sort ``d`` and separate tied values by an additive ``spacing``.

    The default spacing is ``1e-9`` times the spread of ``d``.
    """
    d = np.sort(np.asarray(d, dtype=np.float64))
    if spacing is None:
        spread = d[-1] - d[0] if d.size else 0.0
        spacing = 1e-9 * (spread if spread > 0 else max(1.0, float(np.max(np.abs(d), initial=0.0))))
    out = d.copy()
    for k in range(1, out.size):
        if out[k] <= out[k - 1]:
            out[k] = out[k - 1] + spacing
    return out


@dataclass(frozen=True)
class RankOneActivation:
    """Base spectrum ``d``, unit activation vector ``v`` in the base eigenbasis."""

    d: np.ndarray
    v: np.ndarray
    mu_final: float = 0.0
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        d = np.atleast_1d(np.asarray(self.d, dtype=np.float64))
        v = np.atleast_1d(np.asarray(self.v, dtype=np.complex128))
        if d.ndim != 1 or d.size == 0:
            raise ValidationError("d must be a non-empty 1-D array")
        if v.shape != d.shape:
            raise ValidationError(f"v has shape {v.shape}, expected {d.shape}")
        if not (np.all(np.isfinite(d)) and np.all(np.isfinite(v))):
            raise ValidationError("non-finite entries")
        if np.any(np.diff(d) <= 0):
            raise ValidationError("d must be strictly ascending (see jitter_spectrum)")
        norm2 = float(np.sum(np.abs(v) ** 2))
        if abs(norm2 - 1.0) > UNIT_NORM_TOL:
            raise ValidationError(f"v is not unit norm (|v|^2 = {norm2:.15g})")
        if not np.isfinite(self.mu_final):
            raise ValidationError("mu_final must be finite")
        object.__setattr__(self, "d", _frozen(d))
        object.__setattr__(self, "v", _frozen(v))
        object.__setattr__(self, "mu_final", float(self.mu_final))
        object.__setattr__(self, "weights", _frozen(np.abs(v) ** 2))

    @classmethod
    def normalized(cls, d, v, mu_final: float = 0.0) -> "RankOneActivation":
        v = np.asarray(v, dtype=np.complex128)
        norm = np.linalg.norm(v)
        if norm == 0:
            raise ValidationError("activation vector is zero")
        return cls(d, v / norm, mu_final)

    @property
    def dim(self) -> int:
        return self.d.shape[0]

    @property
    def spread(self) -> float:
        return float(self.d[-1] - self.d[0])

    def hamiltonian(self, mu: float) -> np.ndarray:
        return np.diag(self.d).astype(np.complex128) + mu * np.outer(self.v, self.v.conj())


def _pole_scale(d) -> float:
    return max(1.0, float(np.max(np.abs(d))))


def secular_mu(s: float, act: RankOneActivation) -> float:
    """Coupling at which ``s`` is an eigenvalue of ``D + mu |v><v|``."""
    s = float(s)
    gap = s - act.d
    near = np.flatnonzero(np.abs(gap) <= POLE_TOL * _pole_scale(act.d))
    if near.size:
        raise PoleError(f"s = {s!r} coincides with pole d[{near[0]}]")
    total = float(np.sum(act.weights / gap))
    if total == 0.0:
        raise SingularError(f"secular sum vanishes at s = {s!r}")
    return 1.0 / total


class _Roots(NamedTuple):
    values: np.ndarray
    origin: np.ndarray
    tau: np.ndarray
    fixed: np.ndarray


def _first_order_exact(d, w, mu) -> bool:
    """Whether ``d_k + mu w_k`` is already exact to rounding for every root."""
    gap = float(np.min(np.diff(d))) if d.size > 1 else math.inf
    return abs(mu) * float(np.sum(w)) <= _EPS * min(gap, 1.0) * 1e-3


def _solve(act: RankOneActivation, mu: float, backend=None) -> _Roots:
    """All eigenvalues with the pole-relative data needed for eigenvectors.

    ``origin[k]`` is the index of the pole the k-th root is measured from and
    ``tau[k]`` the offset; ``fixed[k]`` marks eigenvalues decoupled from ``v``.
    """
    d, w = act.d, act.weights
    n = d.shape[0]
    mu = float(mu)
    if not np.isfinite(mu):
        raise ValidationError("mu must be finite")
    coupled = np.abs(act.v) >= ZERO_COMPONENT
    if mu == 0.0 or not coupled.any():
        idx = np.arange(n)
        return _Roots(d.copy(), idx, np.zeros(n), ~coupled | (mu == 0.0))
    live = np.flatnonzero(coupled)
    dd, ww = d[live], w[live]
    if _first_order_exact(dd, ww, mu):
        # 1/mu may overflow here; the second-order shift is below one ulp anyway
        origin, tau, iters = np.arange(dd.size), mu * ww, np.zeros(dd.size, np.int64)
    elif mu > 0:
        origin, tau, iters = kernels.secular_roots(dd, ww, mu, backend=backend)
    else:
        origin, tau, iters = kernels.secular_roots(-dd[::-1], ww[::-1], -mu, backend=backend)
        origin = (dd.size - 1 - origin)[::-1]
        tau = -tau[::-1]
        iters = iters[::-1]
    bad = np.flatnonzero(iters < 0)
    if bad.size:
        k = int(bad[0])
        raise NumericalError(
            f"secular root {k} did not converge in {kernels.MAX_ITER} iterations "
            f"(mu={mu!r}, pole={float(dd[origin[k]])!r}, offset={float(tau[k])!r})"
        )
    origin = live[origin]
    values = np.concatenate([d[origin] + tau, d[~coupled]])
    all_origin = np.concatenate([origin, np.flatnonzero(~coupled)])
    all_tau = np.concatenate([tau, np.zeros((~coupled).sum())])
    fixed = np.concatenate([np.zeros(live.size, bool), np.ones((~coupled).sum(), bool)])
    order = np.argsort(values, kind="stable")
    return _Roots(values[order], all_origin[order], all_tau[order], fixed[order])


def eigenvalues_at_mu(act: RankOneActivation, mu: float, backend=None) -> np.ndarray:
    """Ascending eigenvalues of ``D + mu |v><v|`` from the secular equation."""
    return _solve(act, mu, backend).values


def eigenvalues_on_grid(act: RankOneActivation, mus, backend=None) -> np.ndarray:
    """Eigenvalues for many couplings at once; one row per coupling."""
    mus = np.asarray(mus, dtype=np.float64)
    coupled = np.abs(act.v) >= ZERO_COMPONENT
    if coupled.all() and np.all(mus > 0) and not _first_order_exact(act.d, act.weights, float(mus.min())):
        out, status = kernels.secular_roots_grid(act.d, act.weights, mus, backend=backend)
        if status < 0:
            raise NumericalError("secular root did not converge on the grid")
        return out
    return np.array([_solve(act, mu, backend).values for mu in mus])


def _resolvent_vector(act, origin, tau):
    delta = act.d - act.d[origin]
    x = np.zeros(act.dim, dtype=np.complex128)
    coupled = np.abs(act.v) >= ZERO_COMPONENT
    denom = tau - delta[coupled]
    if np.any(denom == 0.0):
        x[coupled] = np.where(denom == 0.0, 1.0, 0.0)
        return x
    # scale by the smallest denominator first so tiny offsets cannot overflow
    x[coupled] = act.v[coupled] * (np.min(np.abs(denom)) / denom)
    return x / np.linalg.norm(x)


def eigenvector_at(s: float, act: RankOneActivation) -> np.ndarray:
    """Unit eigenvector ``gamma (s - D)^{-1} |v>`` for the eigenvalue ``s``."""
    s = float(s)
    gap = s - act.d
    near = np.flatnonzero(np.abs(gap) <= POLE_TOL * _pole_scale(act.d))
    if near.size:
        raise PoleError(f"s = {s!r} coincides with pole d[{near[0]}]")
    x = act.v / gap
    return fix_phase(x / np.linalg.norm(x))


def eigensystem_at_mu(act: RankOneActivation, mu: float, backend=None) -> SpectralDecomposition:
    """Eigenvalues and eigenvectors of ``D + mu |v><v|`` via the secular route.

    Eigenvectors are evaluated relative to the nearest pole, which keeps them
    accurate when a root sits very close to a base eigenvalue.
    """
    roots = _solve(act, mu, backend)
    n = act.dim
    vecs = np.zeros((n, n), dtype=np.complex128)
    for k in range(n):
        if roots.fixed[k]:
            vecs[roots.origin[k], k] = 1.0
        else:
            vecs[:, k] = _resolvent_vector(act, roots.origin[k], roots.tau[k])
    return SpectralDecomposition(roots.values, fix_phase(vecs))


def lagrange_series(
    act: RankOneActivation,
    mu: float,
    r: int,
    order: int,
    max_order: int = MAX_SERIES_ORDER,
    return_decrements: bool = False,
    backend=None,
):
    """Truncated power series in ``mu`` for the eigenvalue branch starting at ``d[r]``.

    With ``return_decrements`` the magnitudes of the successive terms are also
    returned, so callers can see whether the series is settling down.
    """
    if not 0 <= r < act.dim:
        raise ValidationError(f"index r={r} out of range")
    if order < 1:
        raise ValidationError("order must be at least 1")
    if order > max_order:
        raise ValidationError(f"order {order} exceeds the cap of {max_order}")
    mu = float(mu)
    if act.dim == 1:
        terms = np.zeros(order)
        terms[0] = mu * act.weights[0]
    else:
        coeffs = kernels.lagrange_coefficients(act.d, act.weights, r, order, backend=backend)
        terms = coeffs * mu ** np.arange(1, order + 1)
    value = float(act.d[r] + terms.sum())
    if return_decrements:
        return value, np.abs(terms)
    return value


def interlacing_check(d, s, mu_sign: int, tol: float = 0.0) -> bool:
    """Whether ``s`` interlaces ``d`` as a rank-one update of the given sign."""
    d = np.asarray(d, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    if d.shape != s.shape or d.ndim != 1:
        raise ValidationError(f"length mismatch: {d.shape} vs {s.shape}")
    sign = int(np.sign(mu_sign))
    if sign == 0:
        return bool(np.all(np.abs(s - d) <= tol))
    if sign > 0:
        lower_ok = np.all(s >= d - tol)
        upper_ok = np.all(s[:-1] <= d[1:] + tol)
    else:
        lower_ok = np.all(s[1:] >= d[:-1] - tol)
        upper_ok = np.all(s <= d + tol)
    return bool(lower_ok and upper_ok)
