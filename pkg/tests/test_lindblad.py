import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from qfluct.chainstate import ProductState, expect
from qfluct.errors import DomainError, LocalityViolation, ResourceError
from qfluct.fluct import ObservableSet, local_weyl
from qfluct.harness import scenario_a, scenario_b
from qfluct.lindblad import (
    CouplingProfile,
    LindbladSpec,
    MicroDynamics,
    apply_generator,
    check_locality,
    generator_action_residual,
    generator_superoperator,
    invariance_probe,
    kossakowski_check,
    micro_evolve,
    micro_evolve_factorized,
    rn_commutator_norm,
    rn_operator,
    rn_statistics,
    s_operator,
    s_operator_moments,
    single_site_propagator,
)
from qfluct.opcore import ChainOperator, ProductOperator, pauli, spin1

from conftest import random_density, random_hermitian

s1, s2, s3 = pauli()


def _random_spec(rng, form, J):
    h = random_hermitian(rng, 2)
    kraus = [rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)) for _ in range(2)]
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    return LindbladSpec(h, kraus, a @ a.conj().T, J, form=form)


def test_coupling_profiles():
    g = CouplingProfile.geometric(0.5, 0.3)
    assert g(0) == 0.5 and g(-2) == pytest.approx(0.5 * 0.09)
    assert g.l1_norm == pytest.approx(0.5 * (1 + 2 * 0.3 / 0.7), rel=1e-12)
    assert CouplingProfile.onsite(1.0).is_onsite
    T = g.toeplitz(4)
    assert np.allclose(T, T.conj().T)
    assert len(list(CouplingProfile.onsite(1.0).pairs(5))) == 5
    with pytest.raises(DomainError):
        CouplingProfile.custom({1: 1j})
    with pytest.raises(DomainError):
        CouplingProfile.geometric(1.0, 1.0)


def test_spec_validation():
    J = CouplingProfile.onsite(1.0)
    with pytest.raises(DomainError):
        LindbladSpec(s3, [s3], [[-1.0]], J)
    with pytest.raises(DomainError):
        LindbladSpec(s3, [s3], [[1.0, 0], [0, 1]], J)
    with pytest.raises(DomainError):
        LindbladSpec(s3, [s3], [[1.0]], J, form="other")
    with pytest.raises(DomainError):
        LindbladSpec(s3, [s3], [[1.0]], CouplingProfile.custom({1: 1, -1: 1}))
    spec = LindbladSpec(s3, [s3], [[1.0]], J)
    assert spec.replace(form="double_commutator").form == "double_commutator"


@pytest.mark.parametrize("form", ["standard", "double_commutator"])
@pytest.mark.parametrize("J", [CouplingProfile.onsite(0.7), CouplingProfile.geometric(0.6, 0.4)])
def test_superoperator_matches_blockwise_application(rng, form, J):
    spec = _random_spec(rng, form, J)
    n = 3
    sites = tuple(range(n))
    X = ChainOperator(2, {(0, 2): random_hermitian(rng, 4), (1,): random_hermitian(rng, 2)})
    L = generator_superoperator(spec, n).toarray()
    dense = (L @ X.dense(sites).reshape(-1)).reshape(8, 8)
    assert np.allclose(apply_generator(spec, n, X).dense(sites), dense)


def test_generator_parts_add_up(rng):
    spec = _random_spec(rng, "standard", CouplingProfile.geometric(0.5, 0.3))
    X = ChainOperator.site(random_hermitian(rng, 2), 1)
    full = apply_generator(spec, 3, X)
    parts = apply_generator(spec, 3, X, "hamiltonian") + apply_generator(spec, 3, X, "dissipator")
    assert full.allclose(parts)


def test_double_commutator_equals_standard_for_hermitian_kraus(rng):
    J = CouplingProfile.onsite(1.3)
    a = random_hermitian(rng, 2)
    std = LindbladSpec(s3, [a], [[1.0]], J)
    dc = std.replace(form="double_commutator")
    X = ChainOperator.site(random_hermitian(rng, 2), 0)
    assert apply_generator(std, 2, X).allclose(apply_generator(dc, 2, X))


def test_generator_is_unital(rng):
    spec = _random_spec(rng, "standard", CouplingProfile.geometric(0.5, 0.3))
    L = generator_superoperator(spec, 2).toarray()
    assert np.allclose(L @ np.eye(4).reshape(-1), 0)


def test_support_outside_chain():
    spec = scenario_b().spec
    with pytest.raises(DomainError):
        apply_generator(spec, 3, ChainOperator.site(s1, 5))


def test_check_locality_spin1():
    m = scenario_a(1.0, 2.0, 0.5)
    red = check_locality(m.spec, m.chi)
    assert np.allclose(red.H_mat, [[0, -2], [2, 0]], atol=1e-13)
    assert np.allclose(red.D_mat, -0.25 * np.eye(2), atol=1e-13)


def test_check_locality_qubit_geometric():
    m = scenario_b(lam=0.5, q=0.3)
    red = check_locality(m.spec, m.chi, n_sites=5)
    assert np.allclose(red.D_mat, -2 * 0.5 * np.eye(2), atol=1e-13)


def test_check_locality_violation():
    state = ProductState(np.eye(2) / 2)
    chi = ObservableSet.bind([s1], state)
    spec = LindbladSpec(s3, [s3], [[1.0]], CouplingProfile.onsite(1.0))
    with pytest.raises(LocalityViolation) as info:
        check_locality(spec, chi)
    assert info.value.residual > 1


def test_kossakowski():
    good = scenario_b().spec
    assert kossakowski_check(good, 32).passed
    bad = good.replace(J=CouplingProfile.custom({0: 0.5, 1: 0.5, -1: 0.5}))
    rep = kossakowski_check(bad, 32)
    assert not rep.passed and rep.J_min_eig < 0


def test_invariance_probe():
    m = scenario_a()
    assert invariance_probe(m.spec, m.state, 2) < 1e-14
    other = ProductState(np.diag([0.5, 0.3, 0.2]).astype(complex))
    assert invariance_probe(m.spec.replace(h=spin1()[0]), other, 2) > 1e-3
    with pytest.raises(ResourceError):
        invariance_probe(m.spec, m.state, 5)


def test_micro_evolve_dense_oracle(rng):
    spec = scenario_b().spec
    X = ChainOperator.site(s1, 1)
    L = generator_superoperator(spec, 3).toarray()
    ref = (expm(0.7 * L) @ X.dense((0, 1, 2)).reshape(-1)).reshape(8, 8)
    assert np.allclose(micro_evolve(spec, 3, X, 0.7).dense((0, 1, 2)), ref)
    with pytest.raises(DomainError):
        micro_evolve(spec, 3, X, -0.1)


def test_micro_dynamics_krylov_branch():
    spec = scenario_b().spec
    X = ChainOperator.site(s1, 1)
    big = MicroDynamics(spec, 3, dense_cap=0)
    small = MicroDynamics(spec, 3)
    assert np.allclose(big.evolve(X, 0.4).dense(), small.evolve(X, 0.4).dense(), atol=1e-12)


@pytest.mark.parametrize("t", [0.1, 1.0])
def test_factorized_matches_dense(t):
    m = scenario_a()
    W = local_weyl(m.chi, (0.4, -0.3), 2)
    fact = micro_evolve_factorized(m.spec, W, t).to_chain().dense()
    dense = micro_evolve(m.spec, 2, W.to_chain(), t).dense((0, 1))
    assert np.allclose(fact, dense, atol=1e-12)


def test_factorized_needs_onsite():
    spec = scenario_b().spec
    with pytest.raises(DomainError):
        single_site_propagator(spec, 1.0)
    with pytest.raises(DomainError):
        micro_evolve_factorized(spec, ProductOperator.uniform(s1, 2), 1.0, propagator=np.eye(4))


def test_s_operator_mean_spin1():
    m = scenario_a()
    mean, second = s_operator_moments(m.spec, m.chi, m.state, (1.0, 0.0), 3)
    Sigma = (1 + np.cosh(1)) / (1 + 2 * np.cosh(1))
    assert mean == pytest.approx(-0.5 * Sigma, abs=1e-12)
    assert second > mean**2
    assert s_operator(m.spec, m.chi, (0.0, 0.0), 3).prune(1e-14).blocks == {}


def _rn_dense_variance(state, a, b, J, n):
    sites = tuple(range(n))
    R = rn_operator(a, b, J, n).dense(sites)
    al, be = state.site_mean(a), state.site_mean(b)
    ab = state.site_mean(a @ b)
    off = sum(v for q, v in J.values.items() if q != 0)
    Rlim = (J(0) * ab + al * be * off) * np.eye(len(R))
    dR = R - Rlim
    return np.trace(state.density(n) @ dR.conj().T @ dR).real


@given(st.integers(0, 10_000))
def test_rn_statistics_matches_dense(seed):
    rng = np.random.default_rng(seed)
    state = ProductState(random_density(rng, 2))
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    b = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    J = CouplingProfile.custom({0: 0.8, 1: 0.3 + 0.2j, -1: 0.3 - 0.2j, 2: 0.1j, -2: -0.1j})
    for n in (1, 2, 4, 5):
        row = rn_statistics(state, a, b, J, [n])[0]
        assert row.variance == pytest.approx(_rn_dense_variance(state, a, b, J, n), rel=1e-9, abs=1e-12)
        mean = expect(state, rn_operator(a, b, J, n))
        assert np.isclose(row.mean, mean)


def test_rn_nearest_neighbour_pair_count():
    state = ProductState(np.eye(2) / 2)
    J = CouplingProfile.custom({1: 1.0, -1: 1.0})
    for row in rn_statistics(state, s3, s3, J, (10, 100, 1000)):
        n = row.n_sites
        assert row.variance == pytest.approx(4 * (n - 1) / n**2, rel=1e-12)


def test_rn_onsite_pauli_vanishes():
    state = ProductState(np.eye(2) / 2)
    rows = rn_statistics(state, s3, s3, CouplingProfile.onsite(1.0), (1, 10, 100))
    assert all(abs(r.variance) < 1e-15 for r in rows)
    with pytest.raises(DomainError):
        rn_statistics(state, s3, s3, CouplingProfile.onsite(1.0), (0,))


def test_rn_commutator_zero_for_commuting_case():
    m = scenario_b()
    assert rn_commutator_norm(m.chi, (0.0, 0.0), s3, s3, CouplingProfile.onsite(1.0), 3) == 0.0


def test_generator_action_residual_zero_vector():
    m = scenario_b()
    assert generator_action_residual(m.spec, m.chi, (0.0, 0.0), 3) < 1e-14
    with pytest.raises(ResourceError):
        generator_action_residual(m.spec, m.chi, (1.0, 0.0), 13)
