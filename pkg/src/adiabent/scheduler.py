"""Edge-case activations, critical couplings, eigenvector swaps and permutations.

An edge-case vector is almost equal to a base eigenvector ``|d_i>``: its
dominant component is ``1 - (N-1) eps^2`` and every other component is
``eps``. Dialing ``mu`` up then drags a single eigenvalue across the spectrum,
and each time it approaches the next base level the two levels trade
eigenvectors. In the ``eps -> 0`` limit the final eigenvector ordering is a
permutation of the base eigenvectors; this module predicts it.

Permutations are stored as tuples ``order`` where ``order[slot]`` is the
initial label of the eigenvector that ends up in eigenvalue slot ``slot``.
A step acts on the current ordering by ``new[p] = old[step[p]]``, so a plan
``[s1, s2]`` has net order ``net[p] = s1[s2[p]]``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    AmbiguousRegionError,
    SingularError,
    UnsupportedPredictionError,
    ValidationError,
)
from .spectral import (
    RankOneActivation,
    SpectralDecomposition,
    as_hermitian,
    eigendecompose,
    eigensystem_at_mu,
    eigenvalues_on_grid,
)

GUARD_FRACTION = 1e-3
EDGE_THRESHOLD = 1e-3


@dataclass(frozen=True)
class EdgeCaseConfig:
    """Dominant index ``i``, small parameter ``epsilon`` and dimension ``dim``."""

    i: int
    epsilon: float
    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValidationError("dim must be positive")
        if not 0 <= self.i < self.dim:
            raise ValidationError(f"dominant index {self.i} out of range")
        eps = float(self.epsilon)
        if not (0.0 <= eps < 1.0):
            raise ValidationError(f"epsilon must lie in [0, 1), got {eps}")
        if eps > 0 and self.dim > 1 and not (1 - (self.dim - 1) * eps**2 > eps):
            raise ValidationError("dominant component does not dominate for this epsilon")
        object.__setattr__(self, "epsilon", eps)


class EdgeCaseVector(NamedTuple):
    components: np.ndarray
    norm: float

    def normalized(self) -> np.ndarray:
        return self.components / self.norm


def edge_case_v(cfg: EdgeCaseConfig) -> EdgeCaseVector:
    """Edge-case components exactly as constructed, with their Euclidean norm.

    The raw vector is not unit norm; use ``.normalized()`` for a state.
    """
    n, eps = cfg.dim, cfg.epsilon
    v = np.full(n, eps, dtype=np.complex128)
    v[cfg.i] = 1.0 - (n - 1) * eps**2
    return EdgeCaseVector(v, float(np.linalg.norm(v)))


def dominant_weight(cfg: EdgeCaseConfig, variant: str = "normalized") -> float:
    """``|v_i|^2`` of the raw or normalized edge-case vector."""
    vec = edge_case_v(cfg)
    raw = abs(vec.components[cfg.i]) ** 2
    if variant == "raw":
        return float(raw)
    if variant == "normalized":
        return float(raw / vec.norm**2)
    raise ValidationError(f"unknown variant {variant!r}")


def edge_case_activation(d, cfg: EdgeCaseConfig, mu_final: float = 0.0) -> RankOneActivation:
    d = np.asarray(d, dtype=np.float64)
    if d.shape != (cfg.dim,):
        raise ValidationError("spectrum length does not match cfg.dim")
    return RankOneActivation(d, edge_case_v(cfg).normalized(), mu_final)


def critical_mu(d, i: int, k: int, v_i) -> float:
    """Coupling at which the dominant level meets ``d[k+1]``."""
    d = np.asarray(d, dtype=np.float64)
    if not 0 <= k + 1 < d.size:
        raise ValidationError(f"k+1={k + 1} out of range")
    if not 0 <= i < d.size:
        raise ValidationError(f"i={i} out of range")
    w = abs(complex(v_i)) ** 2
    if w == 0.0:
        raise SingularError("dominant component is zero")
    return float((d[k + 1] - d[i]) / w)


def critical_ladder(d, i: int, v_i) -> np.ndarray:
    """Ascending critical couplings for the levels above ``i``."""
    d = np.asarray(d, dtype=np.float64)
    return np.array([critical_mu(d, i, k, v_i) for k in range(i, d.size - 1)])


def _limit_order(d, i: int, weight: float, mu: float) -> Tuple[int, ...]:
    """Slot ordering of base labels in the ``eps -> 0`` limit at coupling ``mu``.

    The dominant level carries eigenvalue ``d_i + mu w``; every other label
    keeps ``d_j``.
    """
    levels = np.array(d, dtype=np.float64)
    levels[i] = d[i] + mu * weight
    return tuple(int(x) for x in np.argsort(levels, kind="stable"))


def _guard_check(d, i: int, weight: float, mu: float, guard: float):
    d = np.asarray(d, dtype=np.float64)
    crit = np.sort(np.array([(d[j] - d[i]) / weight for j in range(d.size) if j != i]))
    side = crit[crit > 0] if mu >= 0 else -crit[crit < 0][::-1]
    m = abs(mu)
    for n, c in enumerate(side):
        below = c - (side[n - 1] if n > 0 else 0.0)
        above = side[n + 1] - c if n + 1 < side.size else below
        half = guard * min(below, above)
        if abs(m - c) <= half:
            raise AmbiguousRegionError(
                f"mu={mu!r} lies within {half:.3e} of the critical coupling {math.copysign(c, mu)!r}"
            )


def predict_final_eigenvector(
    d,
    cfg: EdgeCaseConfig,
    k: int,
    mu_final: float,
    guard: float = GUARD_FRACTION,
    variant: str = "normalized",
) -> int:
    """Base label approached by the adiabatically evolved ``|d_k>``.

    A return value equal to ``cfg.i`` means the state approaches the
    activation vector itself.
    """
    d = np.asarray(d, dtype=np.float64)
    if d.shape != (cfg.dim,):
        raise ValidationError("spectrum length does not match cfg.dim")
    if not 0 <= k < cfg.dim:
        raise ValidationError(f"k={k} out of range")
    weight = dominant_weight(cfg, variant)
    _guard_check(d, cfg.i, weight, float(mu_final), guard)
    return _limit_order(d, cfg.i, weight, float(mu_final))[k]


@dataclass(frozen=True)
class SwapRecord:
    """Overlaps on both sides of the critical coupling between slots k and k+1."""

    k: int
    mu_critical: float
    delta_mu: float
    before_v_k: float
    before_d_next_next: float
    after_d_next_k: float
    after_v_next: float
    swapped: bool

    def overlaps(self) -> Tuple[float, float, float, float]:
        return (self.before_v_k, self.before_d_next_next, self.after_d_next_k, self.after_v_next)


def swap_at_critical(d, cfg: EdgeCaseConfig, k: int, delta_mu: float) -> SwapRecord:
    """Overlap quadruple around ``mu_{k+1}`` for the evolved states of slots k, k+1.

    The evolved state of slot ``k`` is ``U |d_k>``. For ``eps > 0`` there are
    no crossings and it is the k-th instantaneous eigenvector. For ``eps = 0``
    levels cross exactly and every base vector is stationary.
    """
    d = np.asarray(d, dtype=np.float64)
    i = cfg.i
    if not i <= k < cfg.dim - 1:
        raise ValidationError(f"need i <= k < N-1, got k={k}")
    vec = edge_case_v(cfg)
    v = vec.normalized()
    weight = dominant_weight(cfg)
    mu_c = (d[k + 1] - d[i]) / weight
    mu_prev = (d[k] - d[i]) / weight
    mu_next = (d[k + 2] - d[i]) / weight if k + 2 < cfg.dim else math.inf
    window = min(mu_next - mu_c, mu_c - mu_prev)
    if not 0.0 < delta_mu < window:
        raise ValidationError(f"delta_mu must lie in (0, {window:.6g})")
    basis = np.eye(cfg.dim)
    if cfg.epsilon == 0.0:
        before = after = basis
    else:
        act = RankOneActivation(d, v)
        before = eigensystem_at_mu(act, mu_c - delta_mu).eigenvectors
        after = eigensystem_at_mu(act, mu_c + delta_mu).eigenvectors

    def ov(a, b):
        return float(abs(np.vdot(a, b)))

    rec = (
        ov(v, before[:, k]),
        ov(basis[:, k + 1], before[:, k + 1]),
        ov(basis[:, k + 1], after[:, k]),
        ov(v, after[:, k + 1]),
    )
    return SwapRecord(k, float(mu_c), float(delta_mu), *rec, swapped=min(rec) > 0.5)


# -- permutations ---------------------------------------------------------


def identity(n: int) -> Tuple[int, ...]:
    return tuple(range(n))


def compose(first: Sequence[int], second: Sequence[int]) -> Tuple[int, ...]:
    """Ordering after applying ``first`` then ``second``."""
    if len(first) != len(second):
        raise ValidationError("permutation sizes differ")
    return tuple(first[p] for p in second)


def cycle(n: int, *elements: int) -> Tuple[int, ...]:
    """Ordering for the cycle ``(e0, e1, ..., em)``: slot ``e_j`` receives ``e_{j+1}``."""
    order = list(range(n))
    for a, b in zip(elements, elements[1:] + elements[:1]):
        order[a] = b
    return tuple(order)


def cycle_notation(order: Sequence[int]) -> str:
    seen = set()
    parts = []
    for start in range(len(order)):
        if start in seen or order[start] == start:
            continue
        cur, cyc = start, []
        while cur not in seen:
            seen.add(cur)
            cyc.append(cur)
            cur = order[cur]
        parts.append("(" + ",".join(str(c) for c in cyc) + ")")
    return "".join(parts) or "()"


def parse_cycles(text: str, n: int) -> Tuple[int, ...]:
    order = identity(n)
    for chunk in text.replace(" ", "").split(")"):
        chunk = chunk.lstrip("(")
        if chunk:
            order = compose(order, cycle(n, *[int(x) for x in chunk.split(",")]))
    return order


def edge_profile(v) -> Tuple[int, float]:
    """Dominant index and largest off-dominant magnitude of ``v``."""
    mag = np.abs(np.asarray(v))
    i = int(np.argmax(mag))
    rest = np.delete(mag, i)
    return i, float(rest.max()) if rest.size else 0.0


def predict_step(act: RankOneActivation, threshold: float = EDGE_THRESHOLD, guard: float = GUARD_FRACTION):
    """Limit ordering produced by one edge-case activation."""
    i, eps = edge_profile(act.v)
    # normalizing the raw construction inflates eps by O(eps^2); allow for it
    if eps > threshold * 1.01:
        raise UnsupportedPredictionError(
            f"activation is not an edge case (off-dominant component {eps:.3e} > {threshold:g})"
        )
    weight = float(act.weights[i])
    _guard_check(act.d, i, weight, act.mu_final, guard)
    return _limit_order(act.d, i, weight, act.mu_final)


@dataclass(frozen=True)
class ActivationPlan:
    """Ordered activations, each expressed in the eigenbasis left by the previous one."""

    base: SpectralDecomposition
    steps: Tuple[Tuple[RankOneActivation, Tuple[int, ...]], ...]
    net_permutation: Tuple[int, ...] = field(default=())

    def __post_init__(self):
        n = self.base.dim
        net = identity(n)
        for act, order in self.steps:
            if act.dim != n or len(order) != n or sorted(order) != list(range(n)):
                raise ValidationError("step does not match the base dimension")
            if not math.isfinite(act.mu_final):
                raise ValidationError("step coupling must be finite")
            net = compose(net, order)
        if self.net_permutation and tuple(self.net_permutation) != net:
            raise ValidationError("net permutation disagrees with the composed steps")
        object.__setattr__(self, "steps", tuple((a, tuple(o)) for a, o in self.steps))
        object.__setattr__(self, "net_permutation", net)

    def final_hamiltonian(self) -> np.ndarray:
        """Fully activated Hamiltonian in the original basis."""
        basis = self.base.eigenvectors
        h = (basis * self.base.eigenvalues) @ basis.conj().T
        for act, _ in self.steps:
            v = basis @ act.v
            h = h + act.mu_final * np.outer(v, v.conj())
            basis = basis @ eigensystem_at_mu(act, act.mu_final).eigenvectors
        return h


def build_plan(base: SpectralDecomposition, activations: Sequence[RankOneActivation], **kw) -> ActivationPlan:
    steps = [(act, predict_step(act, **kw)) for act in activations]
    return ActivationPlan(base, tuple(steps))


def edge_case_plan(d, steps: Sequence[Tuple[int, float, float]], **kw) -> ActivationPlan:
    """Plan from ``(i, epsilon, mu_final)`` triples applied in order.

    Each step's base spectrum is the spectrum left by the previous step, and
    its edge-case vector lives in that step's eigenbasis.
    """
    d = np.asarray(d, dtype=np.float64)
    base = SpectralDecomposition(d, np.eye(d.size), nondegenerate=True)
    acts = []
    cur = d
    for i, eps, mu in steps:
        act = edge_case_activation(cur, EdgeCaseConfig(i, eps, d.size), mu)
        acts.append(act)
        cur = eigensystem_at_mu(act, mu).eigenvalues
    return build_plan(base, acts, **kw)


def permutation_of_plan(plan: ActivationPlan) -> Tuple[int, ...]:
    return plan.net_permutation


def plan_to_json(plan: ActivationPlan) -> str:
    doc = {
        "base_spectrum": [float(x) for x in plan.base.eigenvalues],
        "steps": [
            {
                "d": [float(x) for x in act.d],
                "v": [[float(z.real), float(z.imag)] for z in act.v],
                "mu_final": act.mu_final,
                "cycles": cycle_notation(order),
            }
            for act, order in plan.steps
        ],
        "net_cycles": cycle_notation(plan.net_permutation),
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def plan_from_json(text: str) -> ActivationPlan:
    doc = json.loads(text)
    d = np.asarray(doc["base_spectrum"], dtype=np.float64)
    base = SpectralDecomposition(d, np.eye(d.size), nondegenerate=True)
    steps = []
    for s in doc["steps"]:
        v = np.array([complex(re, im) for re, im in s["v"]])
        steps.append((RankOneActivation(s["d"], v, s["mu_final"]), parse_cycles(s["cycles"], d.size)))
    return ActivationPlan(base, tuple(steps))


# -- interaction decomposition --------------------------------------------


class InteractionTerm(NamedTuple):
    weight: float
    vector: np.ndarray
    mu_final: float


def decompose_interaction(h_int, g_final: float, ordering: str = "descending") -> List[InteractionTerm]:
    """Spectral projectors of ``h_int`` with couplings ``g_final * lambda``.

    ``ordering`` is ``"descending"`` (by ``|lambda|``), ``"ascending"`` or
    ``"given"`` (eigendecomposition order). A zero operator yields no terms.
    """
    h = as_hermitian(h_int)
    if not np.any(h):
        return []
    dec = eigendecompose(h)
    lam = dec.eigenvalues
    if ordering == "descending":
        idx = np.argsort(-np.abs(lam), kind="stable")
    elif ordering == "ascending":
        idx = np.argsort(np.abs(lam), kind="stable")
    elif ordering == "given":
        idx = np.arange(lam.size)
    else:
        raise ValidationError(f"unknown ordering {ordering!r}")
    return [InteractionTerm(float(lam[k]), dec.eigenvectors[:, k].copy(), float(g_final * lam[k])) for k in idx]


def sequential_activations(h0, terms: Sequence[InteractionTerm]) -> List[RankOneActivation]:
    """Express each term in the eigenbasis left by all earlier terms."""
    dec = eigendecompose(h0)
    if np.any(np.diff(dec.eigenvalues) <= 0):
        raise ValidationError("base Hamiltonian is degenerate (see jitter_spectrum)")
    d, basis = dec.eigenvalues, dec.eigenvectors
    out = []
    for term in terms:
        act = RankOneActivation.normalized(d, basis.conj().T @ term.vector, term.mu_final)
        out.append(act)
        es = eigensystem_at_mu(act, act.mu_final)
        d, basis = es.eigenvalues, basis @ es.eigenvectors
    return out


# -- gap bounds -----------------------------------------------------------


def min_gap_bound(d, epsilon: float) -> float:
    d = np.asarray(d, dtype=np.float64)
    if d.size < 2:
        return math.inf
    c0 = float(np.min(np.diff(d)) / 2.0)
    return c0 * float(epsilon) ** 2


class ConvergenceConstants(NamedTuple):
    C1: float
    C2: float


def epsilon_convergence_constants(d, i: int, k: int, mu: Optional[float] = None) -> ConvergenceConstants:
    """Constants bounding how close eigenvalues sit to base levels.

    ``C1`` bounds ``d_{k+1} - s_k`` past the critical coupling (large-``mu``
    form). ``C2`` bounds ``s_k - d_k`` before it and depends on ``mu``; without
    ``mu`` it is evaluated at the midpoint of its admissible window.
    """
    d = np.asarray(d, dtype=np.float64)
    if not 0 <= i <= k < d.size - 1:
        raise ValidationError("need 0 <= i <= k < N-1")
    gap = d[k + 1] - d[k]
    z = float(np.sum(1.0 / (d[k + 2 :] - d[k + 1])))
    c1 = 2.0 * (1.0 + gap * z) * (d[k + 1] - d[i])
    span = d[k] - d[i]
    if span <= 0:
        return ConvergenceConstants(c1, math.nan)
    if mu is None:
        mu = span / 2.0
    if not 0.0 <= mu < span:
        raise ValidationError(f"C2 needs 0 <= mu < {span}")
    return ConvergenceConstants(c1, float(mu * span / (span - mu)))


def c1_at(d, i: int, k: int, mu: float, weight: float) -> float:
    """``mu``-dependent form of the ``C1`` bound, valid for every ``mu`` past critical."""
    d = np.asarray(d, dtype=np.float64)
    gap = d[k + 1] - d[k]
    z = float(np.sum(1.0 / (d[k + 2 :] - d[k + 1])))
    span = d[k + 1] - d[i]
    denom = weight * mu - span
    if denom <= 0:
        raise ValidationError("mu is not past the critical coupling")
    return float((1.0 + gap * z) * span * mu / denom)


@dataclass(frozen=True)
class GapScan:
    min_gap: float
    mu_at_min: float
    pair: int
    bound: float
    mus: np.ndarray
    gaps: np.ndarray


def _zoom(act, center, half, pair, floor, points=201, rounds=80):
    best_mu, best_gap = center, math.inf
    for _ in range(rounds):
        lo = max(center - half, 0.0)
        mus = np.linspace(lo, center + half, points)
        mus = mus[mus > 0]
        if mus.size == 0:
            break
        gaps = np.diff(eigenvalues_on_grid(act, mus), axis=1)[:, pair]
        j = int(np.argmin(gaps))
        if gaps[j] < best_gap:
            best_mu, best_gap = float(mus[j]), float(gaps[j])
        step = (mus[-1] - mus[0]) / max(mus.size - 1, 1)
        if step <= floor:
            break
        center, half = float(mus[j]), 2.0 * step
    return best_mu, best_gap


def scan_min_gap(d, cfg: EdgeCaseConfig, mu_max: Optional[float] = None) -> GapScan:
    """Smallest adjacent gap of ``D + mu |v><v|`` over ``mu`` in ``(0, mu_max]``.

    A uniform grid with step ``spread/1000`` is refined near every predicted
    critical coupling and every coarse local minimum until the step is at most
    ``eps^2 / 10``.
    """
    d = np.asarray(d, dtype=np.float64)
    act = edge_case_activation(d, cfg)
    weight = float(act.weights[cfg.i])
    ladder = [(d[j] - d[cfg.i]) / weight for j in range(cfg.i + 1, cfg.dim)]
    spread = float(d[-1] - d[0]) or 1.0
    if mu_max is None:
        mu_max = 2.0 * (ladder[-1] if ladder else spread) + spread
    step = spread / 1000.0
    mus = np.arange(1, int(math.ceil(mu_max / step)) + 1) * step
    gaps = np.diff(eigenvalues_on_grid(act, mus), axis=1)
    floor = max(cfg.epsilon**2 / 10.0, 1e-15 * max(1.0, mu_max))
    best = (math.inf, 0.0, -1)
    for pair in range(cfg.dim - 1):
        g = gaps[:, pair]
        centers = {float(mus[int(np.argmin(g))])}
        inner = np.flatnonzero((g[1:-1] < g[:-2]) & (g[1:-1] <= g[2:])) + 1
        inner = inner[np.argsort(g[inner])][:4]
        centers.update(float(mus[j]) for j in inner)
        if pair >= cfg.i:
            centers.add(ladder[pair - cfg.i])
        for c in sorted(centers):
            mu_b, gap_b = _zoom(act, c, 2.0 * step, pair, floor)
            if gap_b < best[0]:
                best = (gap_b, mu_b, pair)
        j = int(np.argmin(g))
        if g[j] < best[0]:
            best = (float(g[j]), float(mus[j]), pair)
    return GapScan(best[0], best[1], best[2], min_gap_bound(d, cfg.epsilon), mus, gaps)


def gap_slope(epsilons, gaps) -> float:
    """Least-squares slope of ``log(gap)`` against ``log(eps)``."""
    x = np.log(np.asarray(epsilons, dtype=np.float64))
    y = np.log(np.asarray(gaps, dtype=np.float64))
    return float(np.polyfit(x, y, 1)[0])
