import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from abl_lab import complexla as la
from abl_lab import qcore
from abl_lab.randomstream import stream, uniforms

from .conftest import SIGMA_X, X_MINUS, X_PLUS, Y_PLUS, Z_MINUS, Z_PLUS

seeds = st.integers(0, 2**32 - 1)


def test_pauli_labels_and_vectors(pauli):
    assert pauli["x"].labels == ("x-", "x+")
    assert pauli["z"].labels == ("z-", "z+")
    np.testing.assert_allclose(pauli["x"].eigenvector("x+"), X_PLUS, atol=1e-14)
    np.testing.assert_allclose(pauli["y"].eigenvector("y+"), Y_PLUS, atol=1e-14)
    np.testing.assert_allclose(pauli["z"].eigenvector("z-"), Z_MINUS, atol=1e-14)


def test_lookup_by_eigenvalue(pauli):
    assert pauli["z"].outcome(1).label == "z+"
    assert pauli["z"].outcome("-1").label == "z-"
    with pytest.raises(KeyError):
        pauli["z"].outcome("q")


def test_auto_labels_signed():
    obs = qcore.observable_from_operator(SIGMA_X)
    assert obs.labels == ("-1", "+1")


def test_identity_single_outcome():
    obs = qcore.builtin_observable("identity", 3)
    assert obs.labels == ("1",)
    assert obs.outcomes[0].rank == 3
    assert not obs.complete


def test_degenerate_eigenvalues_merge():
    obs = qcore.observable_from_operator(np.diag([1.0, 1.0, -1.0]))
    assert [o.rank for o in obs.outcomes] == [1, 2]
    obs.check_pvm()


def test_rejects_non_hermitian_and_wrong_dim():
    with pytest.raises(la.NotSelfAdjointError):
        qcore.observable_from_operator(np.array([[0, 1], [0, 0]]))
    with pytest.raises(qcore.InvalidObservableError):
        qcore.builtin_observable("pauli_x", 3)


def test_state_validation():
    with pytest.raises(qcore.InvalidStateError):
        qcore.pure_state([1, 1])
    s = qcore.pure_state([1, 1], normalize=True)
    assert abs(la.norm(s.vector) - 1) < 1e-15
    with pytest.raises(qcore.InvalidStateError):
        qcore.mixed_state(np.diag([1.2, -0.2]))


def test_born_and_collapse_spin(pauli):
    psi = qcore.pure_state(Z_PLUS)
    for lab in pauli["x"].labels:
        assert abs(qcore.born_probability(psi, pauli["x"].projector(lab)) - 0.5) < 1e-15
    after = qcore.collapse(psi, pauli["x"].projector("x+"))
    np.testing.assert_allclose(after.vector, X_PLUS, atol=1e-15)
    after = qcore.collapse(psi, pauli["x"].projector("x-"))
    np.testing.assert_allclose(after.vector, X_MINUS, atol=1e-15)


def test_collapse_impossible(pauli):
    with pytest.raises(qcore.ImpossibleOutcomeError):
        qcore.collapse(qcore.pure_state(Z_PLUS), pauli["z"].projector("z-"))


def test_sampling_frequency(pauli):
    psi = qcore.pure_state(Z_PLUS)
    n = 100_000
    probs = qcore.outcome_probabilities(psi, pauli["x"])
    choice = qcore.inverse_cdf(np.broadcast_to(probs, (n, 2)), uniforms(5, np.arange(n), 0))
    assert abs(np.mean(choice == 1) - 0.5) <= 0.005


def test_measure_sample_consumes_one_uniform(pauli):
    rs = stream(1, 2)
    qcore.measure_sample(qcore.pure_state(Z_PLUS), pauli["x"], rs)
    assert rs.counter == 1


def test_repeated_measurement_is_stable(pauli):
    psi = qcore.pure_state(Y_PLUS)
    rs = stream(11, 0)
    lab, psi = qcore.measure_sample(psi, pauli["x"], rs)
    for _ in range(20):
        again, psi = qcore.measure_sample(psi, pauli["x"], rs)
        assert again == lab


def test_inverse_cdf_floor_and_overflow():
    probs = np.array([[0.5, 1e-16, 0.5], [0.3, 0.7, 0.0]])
    assert qcore.inverse_cdf(probs, np.array([0.5, 0.2])).tolist() == [2, 0]
    # u above the rounded total lands on the last admissible outcome
    assert qcore.inverse_cdf(np.array([[0.3, 0.7 - 1e-13, 0.0]]), np.array([1 - 1e-15])).tolist() == [1]


def _rand_obs(rng, dim):
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return qcore.observable_from_operator(z + z.conj().T)


def _rand_psi(rng, dim):
    return qcore.pure_state(rng.standard_normal(dim) + 1j * rng.standard_normal(dim), normalize=True)


@settings(max_examples=100)
@given(seeds, st.integers(2, 5))
def test_born_sums_to_one_and_collapse_idempotent(seed, dim):
    rng = np.random.default_rng(seed)
    obs, psi = _rand_obs(rng, dim), _rand_psi(rng, dim)
    probs = qcore.outcome_probabilities(psi, obs)
    assert abs(probs.sum() - 1) <= 1e-12
    k = int(np.argmax(probs))
    proj = obs.outcomes[k].projector
    once = qcore.collapse(psi, proj)
    assert abs(qcore.born_probability(once, proj) - 1) <= 1e-12
    twice = qcore.collapse(once, proj)
    np.testing.assert_allclose(twice.vector, once.vector, atol=1e-12)


@settings(max_examples=100)
@given(seeds, st.integers(2, 5))
def test_pure_and_density_paths_agree(seed, dim):
    rng = np.random.default_rng(seed)
    obs, psi = _rand_obs(rng, dim), _rand_psi(rng, dim)
    rho = qcore.mixed_state(la.outer(psi.vector))
    np.testing.assert_allclose(
        qcore.outcome_probabilities(psi, obs), qcore.outcome_probabilities(rho, obs), atol=1e-12
    )
    k = int(np.argmax(qcore.outcome_probabilities(psi, obs)))
    proj = obs.outcomes[k].projector
    np.testing.assert_allclose(
        la.outer(qcore.collapse(psi, proj).vector), qcore.collapse(rho, proj).density, atol=1e-12
    )


@settings(max_examples=50)
@given(seeds, st.integers(2, 5))
def test_random_observable_pvm(seed, dim):
    rng = np.random.default_rng(seed)
    obs = _rand_obs(rng, dim)
    obs.check_pvm()
    recon = sum(o.value * o.projector for o in obs.outcomes)
    assert np.abs(recon - obs.operator).max() <= 1e-9


def test_born_maximally_mixed(pauli):
    rho = qcore.mixed_state(np.eye(2) / 2)
    for obs in pauli.values():
        for o in obs.outcomes:
            assert abs(qcore.born_probability(rho, o.projector) - 0.5) <= 1e-15


def test_collapse_fixed_point_and_deterministic_branch(pauli):
    psi = qcore.pure_state(Z_PLUS)
    np.testing.assert_allclose(qcore.collapse(psi, pauli["z"].projector("z+")).vector, Z_PLUS, atol=1e-15)
    auto_z = qcore.observable_from_operator(np.diag([1.0, -1.0]))
    for i in range(50):
        lab, after = qcore.measure_sample(psi, auto_z, stream(i, i))
        assert lab == "+1"
        np.testing.assert_allclose(after.vector, Z_PLUS, atol=1e-15)


def test_measure_sample_reproducible(pauli):
    psi = qcore.pure_state(Z_PLUS)
    draws = [qcore.measure_sample(psi, pauli["x"], stream(77, 3))[0] for _ in range(3)]
    assert len(set(draws)) == 1
