import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from adiabent.entanglement import (
    BipartiteActivation,
    DensityOperator,
    TransferExperiment,
    TripartiteState,
    TwoBranchState,
    branch_matrix,
    classify,
    coherent_info_complement,
    coherent_info_direct,
    generalized_purity_term,
    partial_trace,
    purity,
    purity_closed_form,
    renyi2,
    renyi_coherent_info,
    run_transfer_experiment,
    von_neumann,
)
from adiabent.errors import AmbiguousRegionError, NumericalError, PoleError, ValidationError
from adiabent.spectral import eigenvalues_at_mu

HALF = 1 / math.sqrt(2)


def _random_branches(rng, n, m):
    z = rng.normal(size=(n * m, 2)) + 1j * rng.normal(size=(n * m, 2))
    q, _ = np.linalg.qr(z)
    return q[:, 0].reshape(n, m), q[:, 1].reshape(n, m)


def _random_state(rng, dims):
    z = rng.normal(size=dims) + 1j * rng.normal(size=dims)
    return TripartiteState(z / np.linalg.norm(z))


def _initial(n=2, m=2):
    ci = np.zeros((n, m), complex)
    cj = np.zeros((n, m), complex)
    ci[0, 0] = cj[1, 0] = 1.0
    return TwoBranchState(HALF, HALF, ci, cj, (0, 1), n)


# -- states and reductions ------------------------------------------------


def test_state_validation():
    with pytest.raises(ValidationError):
        TripartiteState(np.ones((2, 2, 2)))
    with pytest.raises(ValidationError):
        TripartiteState(np.ones((2, 2)) / 2)
    with pytest.raises(ValidationError):
        DensityOperator(np.diag([0.6, 0.6]))
    with pytest.raises(ValidationError):
        DensityOperator(np.array([[0.5, 1.0], [0.0, 0.5]]))
    with pytest.raises(ValidationError):
        DensityOperator(np.diag([1.5, -0.5]))


def test_partial_trace_product_state():
    amp = np.zeros((2, 3, 2), complex)
    amp[1, 2, 0] = 1.0
    st_ = TripartiteState(amp)
    for keep in (("A",), ("B",), ("At", "B"), ("Ã",)):
        assert purity(partial_trace(st_, keep)) == pytest.approx(1.0, abs=1e-15)


def test_partial_trace_bell_branch():
    st_ = _initial().to_tripartite()
    rho = partial_trace(st_, ("A",))
    assert np.allclose(rho.matrix, np.eye(2) / 2)
    assert purity(rho) == pytest.approx(0.5)


def test_partial_trace_errors(rng):
    st_ = _random_state(rng, (2, 2, 2))
    with pytest.raises(ValidationError):
        partial_trace(st_, ())
    with pytest.raises(ValidationError):
        partial_trace(st_, ("C",))


@given(seed=st.integers(0, 2**32 - 1), dims=st.tuples(st.integers(1, 3), st.integers(1, 3), st.integers(1, 3)))
def test_complementary_purities(seed, dims):
    st_ = _random_state(np.random.default_rng(seed), dims)
    for keep, rest in ((("At", "A"), ("B",)), (("A",), ("At", "B")), (("At",), ("A", "B"))):
        assert purity(partial_trace(st_, keep)) == pytest.approx(purity(partial_trace(st_, rest)), abs=1e-12)


def test_density_partial_trace_matches_state(rng):
    st_ = _random_state(rng, (2, 3, 2))
    rho = DensityOperator.pure(st_.vector, st_.dims)
    for keep in (("A",), ("At", "B"), ("B",)):
        assert np.allclose(partial_trace(rho, keep).matrix, partial_trace(st_, keep).matrix, atol=1e-14)


# -- entropies ------------------------------------------------------------


def test_entropy_examples():
    pure = DensityOperator.pure([1.0, 0.0])
    assert renyi2(pure) == pytest.approx(0.0, abs=1e-15)
    assert von_neumann(pure) == pytest.approx(0.0, abs=1e-15)
    mixed = DensityOperator(np.eye(2) / 2)
    assert renyi2(mixed) == pytest.approx(math.log(2))
    assert von_neumann(mixed) == pytest.approx(math.log(2))
    assert purity(DensityOperator(np.eye(5) / 5)) == pytest.approx(0.2)


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 6))
def test_renyi_below_von_neumann(seed, n):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    rho = a @ a.conj().T
    rho = DensityOperator(rho / np.trace(rho).real)
    assert 1 / n - 1e-12 <= purity(rho) <= 1 + 1e-12
    assert renyi2(rho) <= von_neumann(rho) + 1e-12


# -- coherent information -------------------------------------------------


def test_initial_values_exact():
    init = _initial()
    assert coherent_info_direct(init) == pytest.approx(0.5, abs=1e-12)
    assert coherent_info_complement(init) == pytest.approx(-0.5, abs=1e-12)
    assert renyi_coherent_info(init, "direct") == pytest.approx(math.log(2), abs=1e-12)


def test_ideal_transfer_values():
    ci = np.zeros((2, 2), complex)
    cj = np.zeros((2, 2), complex)
    ci[0, 1] = cj[0, 0] = 1.0
    final = TwoBranchState(HALF, HALF, ci, cj, (0, 1), 2)
    assert coherent_info_direct(final) == pytest.approx(-0.5, abs=1e-12)
    assert coherent_info_complement(final) == pytest.approx(0.5, abs=1e-12)


def test_product_state_renyi_zero():
    amp = np.zeros((2, 2, 2), complex)
    amp[0, 0, 0] = 1.0
    assert renyi_coherent_info(TripartiteState(amp)) == pytest.approx(0.0, abs=1e-15)


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 4), m=st.integers(2, 4), p=st.floats(0.05, 0.95))
def test_closed_forms_equal_pipeline(seed, n, m, p):
    rng = np.random.default_rng(seed)
    ci, cj = _random_branches(rng, n, m)
    state = TwoBranchState(math.sqrt(p), math.sqrt(1 - p) * np.exp(0.3j), ci, cj, (0, 2), 3)
    tri = state.to_tripartite()
    # check=True already raises on disagreement; compare explicitly too
    assert abs(coherent_info_direct(state) - coherent_info_direct(tri)) <= 1e-10
    assert abs(coherent_info_complement(state) - coherent_info_complement(tri)) <= 1e-10
    for ch, f in (("direct", coherent_info_direct), ("complement", coherent_info_complement)):
        pi, ri = f(state), renyi_coherent_info(state, ch)
        assert (abs(pi) <= 1e-12 and abs(ri) <= 1e-12) or np.sign(pi) == np.sign(ri)


@given(seed=st.integers(0, 2**32 - 1))
def test_half_weights_bounded(seed):
    ci, cj = _random_branches(np.random.default_rng(seed), 3, 2)
    state = TwoBranchState(HALF, HALF, ci, cj)
    for f in (coherent_info_direct, coherent_info_complement):
        assert -0.5 - 1e-12 <= f(state) <= 0.5 + 1e-12


def test_phase_invariance(rng):
    ci, cj = _random_branches(rng, 2, 3)
    a = TwoBranchState(HALF, HALF, ci, cj)
    b = TwoBranchState(HALF * 1j, HALF * np.exp(2.1j), ci * np.exp(0.7j), cj * np.exp(-1.3j))
    assert coherent_info_direct(a) == pytest.approx(coherent_info_direct(b), abs=1e-13)
    assert coherent_info_complement(a) == pytest.approx(coherent_info_complement(b), abs=1e-13)


def test_branch_validation():
    c = np.zeros((2, 2), complex)
    c[0, 0] = 1.0
    with pytest.raises(ValidationError):
        TwoBranchState(HALF, HALF, c, c)
    d = np.zeros((2, 2), complex)
    d[1, 1] = 1.0
    with pytest.raises(ValidationError):
        TwoBranchState(HALF, HALF, c, d, (1, 1))
    with pytest.raises(ValidationError):
        TwoBranchState(1.0, 1.0, c, d)
    with pytest.raises(ValidationError):
        renyi_coherent_info(TwoBranchState(HALF, HALF, c, d), "sideways")


def test_dual_path_mismatch_raises(monkeypatch):
    import adiabent.entanglement as ent

    monkeypatch.setattr(ent, "_closed_pi", lambda *a, **k: 0.123)
    with pytest.raises(NumericalError):
        coherent_info_direct(_initial())
    assert coherent_info_direct(_initial(), check=False) == 0.123


# -- closed forms on A (x) B ----------------------------------------------


def _bact(rng, n=2, m=2):
    a = np.sort(rng.uniform(0, 5, n))
    b = np.sort(rng.uniform(0, 3, m))
    v = rng.normal(size=(n, m)) + 1j * rng.normal(size=(n, m))
    return BipartiteActivation(a, b, v / np.linalg.norm(v))


def _generic_purity(vec, n, m):
    st_ = TripartiteState(vec.reshape(1, n, m))
    return purity(partial_trace(st_, ("A",)))


@given(seed=st.integers(0, 2**32 - 1), mu=st.floats(0.1, 20.0))
def test_purity_closed_form_dual_path(seed, mu):
    rng = np.random.default_rng(seed)
    bact = _bact(rng, 2, 3)
    act = bact.activation()
    for s in eigenvalues_at_mu(act, mu):
        vec = branch_matrix(s, bact).reshape(-1)
        assert abs(purity_closed_form(s, bact) - _generic_purity(vec, 2, 3)) <= 1e-10


def test_purity_closed_form_concentrated_vector():
    v = np.zeros((2, 2))
    v[1, 0] = 1.0
    bact = BipartiteActivation([0.0, 3.0], [0.0, 1.0], v)
    assert purity_closed_form(5.0, bact) == pytest.approx(1.0, abs=1e-15)


def test_purity_closed_form_near_critical():
    eps = 1e-3
    v = np.full((2, 2), eps)
    v[0, 0] = 1 - 3 * eps**2
    bact = BipartiteActivation([5.0, 12.0], [0.0, 5.0], v / np.linalg.norm(v))
    act = bact.activation()
    w = act.weights[0]
    s = eigenvalues_at_mu(act, (10.0 - 5.0) / w * 0.98)[0]
    assert purity_closed_form(s, bact) >= 0.999


@given(seed=st.integers(0, 2**32 - 1), mu=st.floats(0.1, 20.0))
def test_cross_term_dual_path(seed, mu):
    rng = np.random.default_rng(seed)
    bact = _bact(rng, 2, 2)
    s = eigenvalues_at_mu(bact.activation(), mu)
    picks = [s[0], s[2], s[2], s[0]]
    vecs = [branch_matrix(x, bact) for x in picks]
    for traced in ("B", "A"):
        cs = vecs if traced == "B" else [c.T for c in vecs]
        r1 = cs[0] @ cs[1].conj().T
        r2 = cs[2] @ cs[3].conj().T
        assert abs(generalized_purity_term(*picks, bact, traced) - np.trace(r1 @ r2)) <= 1e-10
    assert generalized_purity_term(s[1], s[1], s[1], s[1], bact).real == pytest.approx(purity_closed_form(s[1], bact), abs=1e-12)


def test_cross_term_disjoint_support_vanishes():
    ci = np.zeros((2, 2), complex)
    cj = np.zeros((2, 2), complex)
    ci[0, 0] = 1.0
    cj[1, 1] = 1.0
    from adiabent import kernels

    assert abs(kernels.four_index_sum(ci, cj, cj, ci)) == 0.0


def test_pole_and_degeneracy_errors():
    v = np.full((2, 2), 0.5)
    bact = BipartiteActivation([0.0, 3.0], [0.0, 1.0], v)
    with pytest.raises(PoleError):
        branch_matrix(1.0, bact)
    with pytest.raises(ValidationError):
        BipartiteActivation([0.0, 1.0], [0.0, 1.0], v)
    with pytest.raises(ValidationError):
        generalized_purity_term(0.5, 0.5, 0.5, 0.5, bact, "C")


# -- transfer experiment --------------------------------------------------


def _exp(eps, mu):
    return TransferExperiment((5.0, 12.0), (0.0, 5.0), 0, 1, 0, eps, mu)


def test_intervals():
    lo, hi = _exp(0.02, 9.5).intervals("raw")
    assert lo == pytest.approx(7.0 / 0.9988**2, rel=1e-14)
    assert hi == pytest.approx(12.0 / 0.9988**2, rel=1e-14)
    assert lo == pytest.approx(7.017, abs=1e-3) and hi == pytest.approx(12.029, abs=1e-3)


def test_transfer_regime():
    rep = run_transfer_experiment(_exp(0.02, 9.5))
    assert rep.classification == rep.expected == "transferred"
    assert rep.pi_complement[1] >= 0.45 and rep.pi_direct[1] <= -0.45
    assert rep.limit_labels == ((0, 1), (0, 0))


def test_preserve_regime():
    rep = run_transfer_experiment(_exp(0.02, 14.0))
    assert rep.classification == rep.expected == "preserved"
    assert rep.pi_direct[1] >= 0.45
    assert rep.limit_labels == ((0, 1), (1, 1))


def test_exact_eigenvector_unchanged():
    for mu in (4.0, 9.5, 14.0):
        rep = run_transfer_experiment(_exp(0.0, mu))
        assert rep.classification == "unchanged"
        assert rep.pi_direct[1] == pytest.approx(0.5, abs=1e-12)


def test_discontinuity_at_zero():
    assert run_transfer_experiment(_exp(1e-4, 9.5)).classification == "transferred"
    assert run_transfer_experiment(_exp(0.0, 9.5)).classification == "unchanged"


def test_epsilon_ladder_monotone():
    ladder = [0.1, 0.05, 0.02, 0.01, 0.005]
    pic = [run_transfer_experiment(_exp(e, 9.5)).pi_complement[1] for e in ladder]
    assert all(b > a for a, b in zip(pic, pic[1:]))
    assert all(x < 0.5 for x in pic)


def test_guard_band_is_ambiguous():
    exp = _exp(0.02, 0.0)
    lo, _ = exp.intervals()
    with pytest.raises(AmbiguousRegionError):
        run_transfer_experiment(_exp(0.02, lo * (1 + 1e-6)))


def test_experiment_validation():
    with pytest.raises(ValidationError):
        TransferExperiment((5.0, 12.0), (0.0, 5.0), 0, 0, 0, 0.02, 9.5)
    with pytest.raises(ValidationError):
        TransferExperiment((5.0, 10.0), (0.0, 5.0), 0, 1, 0, 0.02, 9.5)
    with pytest.raises(ValidationError):
        run_transfer_experiment(_exp(0.02, 9.5), mode="guess")


def test_classify_rules():
    assert classify(-0.49, 0.49, False) == "transferred"
    assert classify(0.49, -0.49, False) == "preserved"
    assert classify(0.2, -0.2, False) == "partial"
    assert classify(0.5, -0.5, True) == "unchanged"


def test_integrate_mode_agrees_short_schedule():
    from adiabent.dynamics import Schedule

    rep = run_transfer_experiment(_exp(0.05, 9.5), mode="integrate", time_factor=1.0)
    pred = run_transfer_experiment(_exp(0.05, 9.5))
    assert min(rep.fidelity) >= 0.99
    assert rep.pi_direct[1] == pytest.approx(pred.pi_direct[1], abs=2e-2)
    rep2 = run_transfer_experiment(_exp(0.05, 9.5), mode="integrate", schedule=Schedule.linear(1.0, 9.5), steps=200)
    assert rep2.t_final == 1.0
