"""Adiabatic optimization over n-bit strings.

``H(mu) = H0 + mu * Hp`` with the transverse driver ``H0 = -sum_q X_q`` and
the diagonal problem Hamiltonian ``Hp = sum_x f(x) |x><x|``. Bitstrings are
big-endian: qubit 0 is the most significant bit of the basis index.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .dynamics import Schedule, _check_norm, _propagate, AffineHamiltonian
from .errors import ValidationError
from .spectral import fix_phase

MAX_QUBITS = 12
COST_ZERO_TOL = 1e-12
GAP_FLAG = 1e-12
CAP_FACTOR = 1e3


def _popcount(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    out = np.zeros_like(x)
    while np.any(x):
        out += x & 1
        x = x >> 1
    return out


@dataclass(frozen=True)
class AqcInstance:
    """Cost table over ``2**n_qubits`` basis states.

    ``mu_cap`` defaults to ``1000 * n / f_min`` where ``f_min`` is the smallest
    positive cost, deep in the regime where ``mu * Hp`` dominates the driver.
    ``horizon`` is the ``T`` of the rational schedule; ``None`` lets
    :func:`horizon_estimate` choose it when an integrated trace is requested.
    """

    n_qubits: int
    cost: np.ndarray
    mu_cap: Optional[float] = None
    horizon: Optional[float] = None
    degenerate: bool = False

    def __post_init__(self):
        n = int(self.n_qubits)
        if n < 1:
            raise ValidationError("need at least one qubit")
        if n > MAX_QUBITS:
            raise ValidationError(f"n_qubits = {n} exceeds the cap of {MAX_QUBITS}")
        f = np.array(self.cost, dtype=np.float64).reshape(-1)
        if f.size != 2**n:
            raise ValidationError(f"cost table has {f.size} entries, expected {2**n}")
        if not np.all(np.isfinite(f)) or np.any(f < 0):
            raise ValidationError("costs must be finite and non-negative")
        if abs(f.min()) > COST_ZERO_TOL:
            raise ValidationError("the minimum cost must be 0")
        n_min = int(np.sum(f <= COST_ZERO_TOL))
        if n_min > 1 and not self.degenerate:
            raise ValidationError(f"{n_min} minimizers; set degenerate=True to allow this")
        cap = self.mu_cap
        if cap is None:
            pos = f[f > COST_ZERO_TOL]
            cap = CAP_FACTOR * n / pos.min() if pos.size else CAP_FACTOR
        if not (cap > 0 and math.isfinite(cap)):
            raise ValidationError("mu_cap must be positive and finite")
        if self.horizon is not None and not self.horizon > 0:
            raise ValidationError("horizon must be positive")
        f.setflags(write=False)
        object.__setattr__(self, "n_qubits", n)
        object.__setattr__(self, "cost", f)
        object.__setattr__(self, "mu_cap", float(cap))
        if self.horizon is not None:
            object.__setattr__(self, "horizon", float(self.horizon))

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    def schedule(self, horizon: Optional[float] = None) -> Schedule:
        horizon = horizon or self.horizon
        if horizon is None:
            raise ValidationError("no horizon set")
        return Schedule.aqc_rational(horizon, self.mu_cap)

    @property
    def minimizers(self) -> np.ndarray:
        return np.flatnonzero(self.cost <= COST_ZERO_TOL)

    def bitstring(self, x: int) -> str:
        return format(int(x), f"0{self.n_qubits}b")

    @classmethod
    def from_mapping(cls, costs: Mapping[str, float], **kw) -> "AqcInstance":
        """Instance from ``{"0101": cost, ...}``; every bitstring must appear once."""
        keys = list(costs)
        if not keys:
            raise ValidationError("empty cost mapping")
        n = len(keys[0])
        table = np.full(2**n, np.nan)
        for key, val in costs.items():
            if len(key) != n or set(key) - {"0", "1"}:
                raise ValidationError(f"bad bitstring {key!r}")
            table[int(key, 2)] = float(val)
        if np.any(np.isnan(table)):
            raise ValidationError("cost mapping does not cover every bitstring")
        return cls(n, table, **kw)

    @classmethod
    def from_json(cls, text: str) -> "AqcInstance":
        doc = json.loads(text)
        kw = {k: doc[k] for k in ("mu_cap", "horizon", "degenerate") if doc.get(k) is not None}
        if "costs" in doc:
            return cls.from_mapping(doc["costs"], **kw)
        return cls(doc["n_qubits"], doc["cost"], **kw)

    def to_json(self) -> str:
        return json.dumps(
            {
                "n_qubits": self.n_qubits,
                "costs": {self.bitstring(x): float(c) for x, c in enumerate(self.cost)},
                "mu_cap": self.mu_cap,
                "horizon": self.horizon,
                "degenerate": self.degenerate,
            },
            indent=2,
            sort_keys=True,
        )


def linear_cost(n: int) -> np.ndarray:
    """``f(y) = y`` over the integer encoding of the bitstrings."""
    return np.arange(2**n, dtype=np.float64)


def paired_landscape(n: int, partner: int, second: float = 0.1, plateau: float = 3.0) -> np.ndarray:
    """Global minimum at ``0``, runner-up ``second`` at ``partner``, flat ``plateau`` elsewhere.

    Every choice of ``partner`` yields the same cost multiset, so a family of
    these landscapes differs only in where the runner-up sits.
    """
    size = 2**n
    if not 0 < partner < size:
        raise ValidationError("partner must be a non-zero basis index")
    if not 0 < second < plateau:
        raise ValidationError("need 0 < second < plateau")
    f = np.full(size, float(plateau))
    f[0] = 0.0
    f[partner] = second
    return f


def driver_hamiltonian(n: int) -> np.ndarray:
    """Dense ``-sum_q X_q`` in the big-endian computational basis."""
    size = 2**n
    idx = np.arange(size)
    h = np.zeros((size, size))
    for q in range(n):
        h[idx, idx ^ (1 << (n - 1 - q))] -= 1.0
    return h


def build_hamiltonians(inst: AqcInstance) -> Tuple[np.ndarray, np.ndarray]:
    """``(H0, Hp)`` as dense real matrices.

    The uniform superposition is checked to be the ground state of ``H0``:
    it is an eigenvector with eigenvalue ``-n``, and ``||H0|| <= n``.
    """
    n = inst.n_qubits
    h0 = driver_hamiltonian(n)
    uni = np.full(inst.dim, 2 ** (-n / 2))
    if np.max(np.abs(h0 @ uni + n * uni)) > 1e-12:
        raise ValidationError("uniform state is not the driver ground state")
    return h0, np.diag(inst.cost)


def qubit_renyi2(states: np.ndarray, n: int) -> np.ndarray:
    """Per-qubit 2-Renyi entropies, shape ``(rows, n)``, of pure states ``(rows, 2**n)``."""
    states = np.atleast_2d(states)
    rows = states.shape[0]
    out = np.empty((rows, n))
    for q in range(n):
        t = states.reshape(rows, 2**q, 2, 2 ** (n - 1 - q))
        rho = np.einsum("rjak,rjbk->rab", t, t.conj())
        out[:, q] = np.maximum(-np.log(np.sum(np.abs(rho) ** 2, axis=(1, 2))), 0.0)
    return out


@dataclass
class GroundTrace:
    """Ground-state amplitudes along the coupling grid.

    ``entanglement`` is the mean single-qubit 2-Renyi entropy; ``flagged``
    marks grid points whose gap above the ground level is below ``1e-12``.
    """

    mode: str
    times: np.ndarray
    mus: np.ndarray
    amplitudes: np.ndarray
    gaps: np.ndarray
    entanglement: np.ndarray
    flagged: np.ndarray

    def header(self, n: int) -> list:
        cols = ["t", "mu"]
        cols += [f"abs_c_{format(x, f'0{n}b')}" for x in range(2**n)]
        return cols + ["gap", "e"]

    def rows(self) -> np.ndarray:
        return np.column_stack([self.times, self.mus, np.abs(self.amplitudes), self.gaps, self.entanglement])


def mu_grid(mu_cap: float, grid_size: int) -> np.ndarray:
    """Linear on ``[0, 1]`` then geometric up to ``mu_cap``."""
    if grid_size < 4:
        raise ValidationError("grid_size must be at least 4")
    if mu_cap <= 1.0:
        return np.linspace(0.0, mu_cap, grid_size)
    n_lin = max(2, grid_size // 4)
    lin = np.linspace(0.0, 1.0, n_lin, endpoint=False)
    geo = np.geomspace(1.0, mu_cap, grid_size - n_lin)
    return np.concatenate([lin, geo])


def _ground_states(h0, cost, mus):
    vals_all, vecs_all = [], []
    for mu in mus:
        vals, vecs = np.linalg.eigh(h0 + mu * np.diag(cost))
        vals_all.append(vals[:2])
        vecs_all.append(fix_phase(vecs[:, :1])[:, 0])
    return np.array(vals_all), np.array(vecs_all)


def horizon_estimate(inst: AqcInstance, margin: float = 100.0, grid_size: int = 400) -> float:
    """``T`` making ``|<1|Hp|0>| (1 + mu)**2 / (T gap**2)`` at most ``1/margin`` on the grid.

    Under ``mu = t/(T - t)`` one has ``dmu/dt = (1 + mu)**2 / T``.
    """
    h0, hp = build_hamiltonians(inst)
    worst = 0.0
    for mu in mu_grid(inst.mu_cap, grid_size):
        vals, vecs = np.linalg.eigh(h0 + mu * hp)
        gap = vals[1] - vals[0]
        if gap < GAP_FLAG:
            continue
        elem = abs(vecs[:, 1] @ (inst.cost * vecs[:, 0]))
        worst = max(worst, elem * (1.0 + mu) ** 2 / gap**2)
    return float(margin * max(worst, 1e-12))


def ground_trace(
    inst: AqcInstance,
    grid_size: int = 200,
    mode: str = "instantaneous",
    steps: int = 20000,
    backend=None,
) -> GroundTrace:
    """Record the ground state across ``mu in [0, mu_cap]``.

    ``instantaneous`` diagonalizes at each grid point. ``integrated`` evolves
    the uniform state under the rational schedule with ``steps`` equal time
    steps and samples it at the step nearest each grid coupling; an unset
    horizon is taken from :func:`horizon_estimate`.
    """
    if mode not in ("instantaneous", "integrated"):
        raise ValidationError(f"unknown mode {mode!r}")
    h0, hp = build_hamiltonians(inst)
    mus = mu_grid(inst.mu_cap, grid_size)
    if mode == "integrated" and inst.horizon is None:
        sched = inst.schedule(horizon_estimate(inst))
    else:
        sched = inst.schedule(inst.horizon or 1.0)
    if mode == "integrated":
        steps = int(steps)
        if steps < 1:
            raise ValidationError("steps must be positive")
        marks = np.unique(np.rint(sched.time_at(mus) / sched.t_final * steps).astype(np.int64))
        times = marks * sched.t_final / steps
        mus = np.asarray(sched.mu(times), dtype=np.float64)
        ham = AffineHamiltonian(h0.astype(np.complex128), hp.astype(np.complex128))
        psi = np.full((inst.dim, 1), 2 ** (-inst.n_qubits / 2), dtype=np.complex128)
        states = [psi[:, 0].copy()]
        for a, b in zip(marks, marks[1:]):
            psi = _propagate(ham, psi, sched, steps, int(a), int(b), backend)
            _check_norm(psi)
            states.append(psi[:, 0].copy())
        amps = np.array(states)
        vals, _ = _ground_states(h0, inst.cost, mus)
    else:
        times = np.asarray(sched.time_at(mus), dtype=np.float64)
        vals, amps = _ground_states(h0, inst.cost, mus)
        amps = amps.astype(np.complex128)
    gaps = vals[:, 1] - vals[:, 0] if inst.dim > 1 else np.full(mus.size, np.inf)
    ent = qubit_renyi2(amps, inst.n_qubits).mean(axis=1)
    return GroundTrace(mode, times, mus, amps, gaps, ent, gaps < GAP_FLAG)


def suppression_onsets(trace: GroundTrace, threshold: float = 0.1) -> np.ndarray:
    """First grid ``mu`` at which ``|c_x| < threshold * |c_x(0)|``; ``inf`` if never."""
    if not 0.0 < threshold < 1.0:
        raise ValidationError("threshold must lie in (0, 1)")
    mags = np.abs(trace.amplitudes)
    below = mags < threshold * mags[0][None, :]
    first = np.argmax(below, axis=0)
    return np.where(below.any(axis=0), trace.mus[first], np.inf)


def onsets_ordered(cost, onsets) -> bool:
    """Onsets are non-increasing as the cost rises (ties compared by cost only)."""
    cost = np.asarray(cost)
    onsets = np.asarray(onsets)
    order = np.lexsort((np.arange(cost.size), cost))
    c, o = cost[order], onsets[order]
    for a in range(c.size):
        for b in range(a + 1, c.size):
            if c[b] > c[a] and o[b] > o[a]:
                return False
    return True


def amplitudes_ordered(trace: GroundTrace, cost, start_mu: float, tol: float = 0.0) -> np.ndarray:
    """Per grid point with ``mu >= start_mu``: are ``|c_x|`` non-increasing in ``f(x)``?"""
    cost = np.asarray(cost)
    order = np.argsort(cost, kind="stable")
    out = []
    for mu, row in zip(trace.mus, np.abs(trace.amplitudes)):
        if mu < start_mu:
            continue
        c, r = cost[order], row[order]
        ok = True
        for a in range(c.size - 1):
            up = c[a + 1:] > c[a]
            if np.any(r[a + 1:][up] > r[a] + tol):
                ok = False
                break
        out.append(ok)
    return np.array(out, dtype=bool)


def ruggedness(inst: AqcInstance, energy_threshold: float) -> float:
    """Mean pairwise Hamming distance among states with ``f(x) <= energy_threshold``."""
    xs = np.flatnonzero(inst.cost <= energy_threshold)
    if xs.size < 2:
        raise ValidationError("ruggedness needs at least two states below the threshold")
    a, b = np.triu_indices(xs.size, k=1)
    return float(np.mean(_popcount(xs[a] ^ xs[b])))


def entanglement_peak(trace: GroundTrace) -> Tuple[float, float]:
    """``(peak e, mu at peak)``, preferring the largest interior local maximum."""
    e = np.asarray(trace.entanglement)
    if e.size >= 3:
        mid = e[1:-1]
        local = np.flatnonzero((mid > e[:-2]) & (mid >= e[2:])) + 1
        if local.size:
            k = int(local[np.argmax(e[local])])
            return float(e[k]), float(trace.mus[k])
    k = int(np.argmax(e))
    return float(e[k]), float(trace.mus[k])


def hamming_distance(x: int, y: int) -> int:
    return int(_popcount(np.array([int(x) ^ int(y)]))[0])


CostLike = Union[Sequence[float], np.ndarray]
