"""Time-dependent Schroedinger integration under coupling schedules.

Each step freezes the Hamiltonian at the step midpoint and applies its exact
exponential, obtained from a batched eigendecomposition. The scheme is
unitary to rounding and second order in the step size.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence, Union

import numpy as np

from . import kernels
from .errors import DivergenceError, NumericalError, ValidationError
from .spectral import (
    ZERO_COMPONENT,
    RankOneActivation,
    _resolvent_vector,
    _solve,
    eigensystem_at_mu,
)

NORM_TOL = 1e-10
CHUNK = 4096
GAP_FLOOR = 1e-12


class StepAccuracyWarning(UserWarning):
    """Step-halving error exceeds the requested tolerance."""


@dataclass(frozen=True)
class Schedule:
    """Coupling ramp ``mu(t)`` on ``[0, t_final]``.

    ``kind`` is ``"linear"``, ``"aqc_rational"`` (``mu = t/(T - t)``, stopped
    at ``mu_final``) or ``"custom"`` (piecewise linear through ``samples``).
    """

    kind: str
    t_final: float
    mu_final: float
    samples: Optional[tuple] = None
    horizon: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("linear", "aqc_rational", "custom"):
            raise ValidationError(f"unknown schedule kind {self.kind!r}")
        if not (self.t_final > 0 and math.isfinite(self.t_final)):
            raise ValidationError("t_final must be positive and finite")
        if not math.isfinite(self.mu_final) or self.mu_final < 0:
            raise ValidationError("mu_final must be finite and non-negative")
        if self.kind == "custom":
            ts, mus = (np.asarray(x, dtype=np.float64) for x in self.samples)
            if ts.ndim != 1 or ts.shape != mus.shape or ts.size < 2:
                raise ValidationError("custom samples need matching 1-D arrays")
            if ts[0] != 0.0 or np.any(np.diff(ts) <= 0) or not np.isclose(ts[-1], self.t_final):
                raise ValidationError("sample times must rise from 0 to t_final")
            if mus[0] != 0.0 or np.any(np.diff(mus) < 0):
                raise ValidationError("sampled mu must start at 0 and be non-decreasing")
            ts.setflags(write=False)
            mus.setflags(write=False)
            object.__setattr__(self, "samples", (ts, mus))

    @classmethod
    def linear(cls, t_final: float, mu_final: float) -> "Schedule":
        return cls("linear", float(t_final), float(mu_final))

    @classmethod
    def aqc_rational(cls, horizon: float, mu_cap: float) -> "Schedule":
        """``mu(t) = 1/(horizon/t - 1)``, integrated until ``mu`` reaches ``mu_cap``."""
        if not (horizon > 0 and mu_cap > 0):
            raise ValidationError("horizon and mu_cap must be positive")
        t_final = horizon * mu_cap / (1.0 + mu_cap)
        return cls("aqc_rational", float(t_final), float(mu_cap), horizon=float(horizon))

    @classmethod
    def custom(cls, ts, mus) -> "Schedule":
        ts = np.asarray(ts, dtype=np.float64)
        mus = np.asarray(mus, dtype=np.float64)
        return cls("custom", float(ts[-1]), float(mus[-1]), samples=(ts, mus))

    def mu(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.kind == "linear":
            return self.mu_final * t / self.t_final
        if self.kind == "aqc_rational":
            return t / (self.horizon - t)
        ts, mus = self.samples
        return np.interp(t, ts, mus)

    def dmu_dt(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.kind == "linear":
            return np.full_like(t, self.mu_final / self.t_final)
        if self.kind == "aqc_rational":
            return self.horizon / (self.horizon - t) ** 2
        ts, mus = self.samples
        slopes = np.diff(mus) / np.diff(ts)
        j = np.clip(np.searchsorted(ts, t, side="right") - 1, 0, slopes.size - 1)
        return slopes[j]

    def time_at(self, mu):
        """Inverse of ``mu(t)`` (first time the coupling is reached)."""
        mu = np.asarray(mu, dtype=np.float64)
        if self.kind == "linear":
            return self.t_final * mu / self.mu_final if self.mu_final else np.zeros_like(mu)
        if self.kind == "aqc_rational":
            return self.horizon * mu / (1.0 + mu)
        ts, mus = self.samples
        return np.interp(mu, mus, ts)


@dataclass(frozen=True)
class AffineHamiltonian:
    """``H(mu) = h0 + mu * h1``; lets the integrator build step operators in bulk."""

    h0: np.ndarray
    h1: np.ndarray

    def __call__(self, mu):
        return self.h0 + mu * self.h1

    def stack(self, mus):
        return self.h0[None, :, :] + np.asarray(mus)[:, None, None] * self.h1[None, :, :]

    @property
    def dim(self):
        return self.h0.shape[0]

    @classmethod
    def from_activation(cls, act: RankOneActivation, ancilla_dim: int = 1) -> "AffineHamiltonian":
        h0 = np.diag(act.d).astype(np.complex128)
        h1 = np.outer(act.v, act.v.conj())
        if ancilla_dim > 1:
            eye = np.eye(ancilla_dim)
            h0, h1 = np.kron(eye, h0), np.kron(eye, h1)
        return cls(h0, h1)


HamiltonianLike = Union[AffineHamiltonian, Callable[[float], np.ndarray]]


def _operator_stack(ham, mus):
    if isinstance(ham, AffineHamiltonian):
        return ham.stack(mus)
    return np.stack([np.asarray(ham(float(m)), dtype=np.complex128) for m in mus])


def _as_states(psi0):
    psi = np.array(psi0, dtype=np.complex128, copy=True)
    single = psi.ndim == 1
    if single:
        psi = psi[:, None]
    norms = np.linalg.norm(psi, axis=0)
    if np.any(np.abs(norms - 1.0) > NORM_TOL):
        raise ValidationError("initial state is not unit norm")
    return psi, single


def _propagate(ham, psi, schedule, steps, start, stop, backend):
    """Advance ``psi`` (columns) through step indices ``[start, stop)``."""
    dt = schedule.t_final / steps
    for lo in range(start, stop, CHUNK):
        hi = min(lo + CHUNK, stop)
        mids = (np.arange(lo, hi) + 0.5) * dt
        vals, vecs = np.linalg.eigh(_operator_stack(ham, schedule.mu(mids)))
        psi = kernels.propagate_eig(vecs, vals, dt, psi, backend=backend)
        # eigh vectors are orthonormal only to rounding; keep that from accumulating
        _check_norm(psi)
        psi /= np.linalg.norm(psi, axis=0)[None, :]
    return psi


def _check_norm(psi):
    drift = float(np.max(np.abs(np.linalg.norm(psi, axis=0) - 1.0)))
    if drift > NORM_TOL:
        raise NumericalError(f"norm drifted by {drift:.3e}")


def evolve(
    hamiltonian: HamiltonianLike,
    psi0,
    schedule: Schedule,
    steps: int,
    tol: Optional[float] = None,
    backend=None,
) -> np.ndarray:
    """Final state after integrating ``i d/dt psi = H(mu(t)) psi``.

    ``psi0`` may hold several states as columns. With ``tol`` the run is
    repeated at twice the step count and a :class:`StepAccuracyWarning` is
    issued when the Richardson error estimate exceeds ``tol``.
    """
    steps = int(steps)
    if steps < 1:
        raise ValidationError("steps must be at least 1")
    psi, single = _as_states(psi0)
    out = _propagate(hamiltonian, psi.copy(), schedule, steps, 0, steps, backend)
    _check_norm(out)
    if tol is not None:
        fine = _propagate(hamiltonian, psi.copy(), schedule, 2 * steps, 0, 2 * steps, backend)
        err = float(np.linalg.norm(out - fine)) * 4.0 / 3.0
        if err > tol:
            warnings.warn(
                StepAccuracyWarning(f"step-halving error {err:.3e} exceeds tolerance {tol:.3e} at {steps} steps"),
                stacklevel=2,
            )
    return out[:, 0] if single else out


class Trajectory(NamedTuple):
    times: np.ndarray
    mus: np.ndarray
    states: np.ndarray


def evolve_trajectory(
    hamiltonian: HamiltonianLike,
    psi0,
    schedule: Schedule,
    steps: int,
    record_every: int,
    backend=None,
) -> Trajectory:
    """States after every ``record_every`` steps, including ``t = 0`` and ``t_final``."""
    steps = int(steps)
    if steps < 1 or record_every < 1:
        raise ValidationError("steps and record_every must be positive")
    psi, single = _as_states(psi0)
    marks = list(range(0, steps, record_every)) + [steps]
    states = [psi.copy()]
    for a, b in zip(marks, marks[1:]):
        psi = _propagate(hamiltonian, psi, schedule, steps, a, b, backend)
        _check_norm(psi)
        states.append(psi.copy())
    times = np.array(marks, dtype=np.float64) * schedule.t_final / steps
    arr = np.array(states)
    return Trajectory(times, schedule.mu(times), arr[:, :, 0] if single else arr)


def adiabatic_branch(act: RankOneActivation, n: int, mu: float) -> np.ndarray:
    """Instantaneous eigenvector continuously connected to ``|d_n>``.

    Decoupled base vectors never move; coupled levels never cross each other,
    so the branch is the matching root among the coupled ones.
    """
    if abs(act.v[n]) < ZERO_COMPONENT or mu == 0.0:
        e = np.zeros(act.dim, dtype=np.complex128)
        e[n] = 1.0
        return e
    roots = _solve(act, mu)
    coupled = np.flatnonzero(np.abs(act.v) >= ZERO_COMPONENT)
    rank = int(np.searchsorted(coupled, n))
    slots = np.flatnonzero(~roots.fixed)
    k = slots[rank]
    return _resolvent_vector(act, roots.origin[k], roots.tau[k])


def _quotients(act, schedule, us):
    mus = schedule.mu(us * schedule.t_final)
    rates = schedule.dmu_dt(us * schedule.t_final) * schedule.t_final
    out = np.zeros(us.size)
    for r, (mu, rate) in enumerate(zip(mus, rates)):
        es = eigensystem_at_mu(act, float(mu))
        ov = np.abs(es.eigenvectors.conj().T @ act.v)
        num = np.outer(ov, ov) * abs(rate)
        gap = es.eigenvalues[:, None] - es.eigenvalues[None, :]
        np.fill_diagonal(num, 0.0)
        live = num > 0
        if np.any(np.abs(gap[live]) < GAP_FLOOR):
            raise DivergenceError(f"gap below {GAP_FLOOR:g} at u={float(us[r])!r} (mu={float(mu)!r})")
        q = np.zeros_like(num)
        q[live] = num[live] / gap[live] ** 2
        out[r] = q.max() if q.size else 0.0
    return out


def adiabatic_time_estimate(
    act: RankOneActivation,
    schedule: Schedule,
    margin: float = 100.0,
    grid: int = 2001,
    refine_rounds: int = 6,
) -> float:
    """``margin`` times the largest adiabatic quotient over ``u = t/t_final``.

    The quotient for a pair ``(n, m)`` is
    ``|<s_m|v><v|s_n> dmu/du| / (s_n - s_m)^2``; the grid is refined around
    its largest values so narrow avoided crossings are resolved.
    """
    if not margin > 1:
        raise ValidationError("margin must exceed 1")
    us = np.linspace(0.0, 1.0, int(grid))
    q = _quotients(act, schedule, us)
    best = float(q.max())
    picks = np.argsort(q)[-3:]
    for j in picks:
        lo, hi = us[max(j - 1, 0)], us[min(j + 1, us.size - 1)]
        for _ in range(refine_rounds):
            sub = np.linspace(lo, hi, 41)
            qs = _quotients(act, schedule, sub)
            m = int(np.argmax(qs))
            best = max(best, float(qs[m]))
            step = sub[1] - sub[0]
            lo, hi = max(sub[m] - step, 0.0), min(sub[m] + step, 1.0)
    return margin * best


@dataclass(frozen=True)
class FidelityReport:
    n: int
    t_final: float
    mu_final: float
    steps: int
    fidelity: float
    deviation: float


def default_steps(act: RankOneActivation, schedule: Schedule, per_unit: float = 0.25) -> int:
    """Step count scaling with ``t_final`` times the spectral width of the ramp."""
    width = act.spread + abs(schedule.mu_final)
    return max(64, int(math.ceil(per_unit * schedule.t_final * max(width, 1.0))))


def verify_lemma2(
    act: RankOneActivation,
    n: int,
    schedule: Schedule,
    steps: Optional[int] = None,
    backend=None,
) -> FidelityReport:
    """Distance between the evolved ``|d_n>`` and its instantaneous eigenbranch."""
    if not 0 <= n < act.dim:
        raise ValidationError(f"level {n} out of range")
    steps = default_steps(act, schedule) if steps is None else int(steps)
    psi0 = np.zeros(act.dim, dtype=np.complex128)
    psi0[n] = 1.0
    psi = evolve(AffineHamiltonian.from_activation(act), psi0, schedule, steps, backend=backend)
    mu_end = float(schedule.mu(schedule.t_final))
    target = adiabatic_branch(act, n, mu_end)
    fid = float(abs(np.vdot(target, psi)))
    dev = math.sqrt(max(0.0, 2.0 - 2.0 * min(fid, 1.0)))
    return FidelityReport(n, schedule.t_final, mu_end, steps, fid, dev)


def trajectory_rows(
    act: RankOneActivation,
    schedule: Schedule,
    n: int,
    steps: int,
    samples: int,
    amplitudes: Sequence[int] = (),
):
    """Rows ``(t, mu, s_0..s_{N-1}, fidelity, |c_a|^2...)`` along an integration."""
    psi0 = np.zeros(act.dim, dtype=np.complex128)
    psi0[n] = 1.0
    every = max(1, steps // max(samples, 1))
    traj = evolve_trajectory(AffineHamiltonian.from_activation(act), psi0, schedule, steps, every)
    header = ["t", "mu"] + [f"s_{k}" for k in range(act.dim)] + ["fidelity"] + [f"p_{a}" for a in amplitudes]
    rows = []
    for t, mu, psi in zip(traj.times, traj.mus, traj.states):
        es = eigensystem_at_mu(act, float(mu))
        fid = abs(np.vdot(adiabatic_branch(act, n, float(mu)), psi))
        rows.append([t, mu, *es.eigenvalues, fid, *(abs(psi[a]) ** 2 for a in amplitudes)])
    return header, rows


def write_csv(path, header, rows, fmt: str = "{:.12e}"):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt.format(x) if isinstance(x, (float, np.floating)) else x for x in row])
