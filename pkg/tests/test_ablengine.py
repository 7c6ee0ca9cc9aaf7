import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from abl_lab import ablengine as ae
from abl_lab import qcore
from abl_lab.verification import random_protocol, random_pure_state

from .conftest import SQ2, X_PLUS, Z_PLUS

seeds = st.integers(0, 2**32 - 1)


def amplitude_oracle(p):
    """ABL distribution from products of eigenvector overlaps (rank-one outcomes only)."""
    a = p.pre.eigenvector(p.pre_label)
    b = p.post.eigenvector(p.post_label)
    weights = {}
    for seq in itertools.product(*(c.labels for c in p.intermediates)):
        amp, prev = 1.0 + 0j, a
        for c, lab in zip(p.intermediates, seq):
            v = c.eigenvector(lab)
            amp *= np.vdot(v, prev)
            prev = v
        amp *= np.vdot(b, prev)
        weights[seq] = abs(amp) ** 2
    total = sum(weights.values())
    return {s: w / total for s, w in weights.items()}


def test_spin_example_quarter(spin_protocol):
    dist = ae.abl_distribution(spin_protocol)
    assert len(dist) == 4
    for v in dist.values():
        assert abs(v - 0.25) <= 1e-12


def test_spin_example_hand_computed(spin_protocol):
    # <z-|y><y|x><x|z+> has modulus (1/sqrt2)^3 for every (x, y) pair
    h = ae.abl_normalization(spin_protocol)
    assert abs(h - 4 * SQ2**6) <= 1e-15
    assert abs(ae.overall_probability(spin_protocol) - 0.5) <= 1e-15
    assert abs(ae.joint_probability(spin_protocol, ("x+", "y-")) - 0.125) <= 1e-15


def test_amplitude_oracle_on_spin(spin_protocol):
    oracle = amplitude_oracle(spin_protocol)
    dist = ae.abl_distribution(spin_protocol)
    for s in dist:
        assert abs(dist[s] - oracle[s]) <= 1e-12


def test_single_intermediate_by_hand(pauli):
    # pre z+, measure x, post y+: |<y+|x><x|z+>|^2 = 1/4 for both x outcomes
    p = ae.Protocol(pauli["z"], "z+", (pauli["x"],), pauli["y"], "y+")
    d = ae.abl_distribution(p)
    assert abs(d[("x+",)] - 0.5) <= 1e-15 and abs(d[("x-",)] - 0.5) <= 1e-15


def test_n_zero_joint(pauli):
    psi = qcore.pure_state([0.6, 0.8j])
    p = ae.Protocol(pauli["z"], "z+", (), pauli["x"], "x+", psi)
    # |<x+|z+>|^2 |<z+|psi>|^2 = 0.5 * 0.36
    assert abs(ae.joint_probability(p, ()) - 0.18) <= 1e-15
    assert ae.abl_distribution(p) == {(): 1.0}


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(2, 4), st.integers(0, 3))
def test_matches_amplitude_oracle(seed, dim, n):
    p = random_protocol(dim, n, np.random.default_rng(seed))
    dist = ae.abl_distribution(p)
    oracle = amplitude_oracle(p)
    assert max(abs(dist[s] - oracle[s]) for s in dist) <= 1e-10


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(2, 4), st.integers(1, 3))
def test_invariants(seed, dim, n):
    rng = np.random.default_rng(seed)
    p = random_protocol(dim, n, rng)
    dist = ae.abl_distribution(p)
    assert abs(sum(dist.values()) - 1) <= 1e-10
    assert all(v >= 0 for v in dist.values())
    # conditional with psi = |a> is ABL
    cond = ae.conditional_distribution(p)
    assert max(abs(cond[s] - dist[s]) for s in dist) <= 1e-10
    # same number as the original-notation formula
    for s in list(dist)[:5]:
        assert abs(ae.abl_probability_original_notation(p, s) - dist[s]) <= 1e-10
    # reverse-ordering symmetry
    rev = ae.abl_distribution(ae.reverse_protocol(p))
    assert max(abs(dist[s] - rev[tuple(reversed(s))]) for s in dist) <= 1e-10


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(2, 4), st.integers(1, 2))
def test_marginalisation_bayes_and_psi_independence(seed, dim, n):
    rng = np.random.default_rng(seed)
    p = random_protocol(dim, n, rng)
    pa = p.pre.projector(p.pre_label)
    psis = []
    while len(psis) < 2:
        s = random_pure_state(dim, rng)
        if qcore.born_probability(s, pa) > 1e-3:
            psis.append(s)
    q = p.with_initial_state(psis[0])
    overall = ae.overall_probability(q)
    joints = {s: ae.joint_probability(q, s) for s in ae.all_sequences(q)}
    assert abs(sum(joints.values()) - overall) <= 1e-12
    cond = ae.conditional_distribution(q)
    assert max(abs(cond[s] * overall - joints[s]) for s in joints) <= 1e-12
    other = ae.conditional_distribution(p.with_initial_state(psis[1]))
    assert max(abs(cond[s] - other[s]) for s in cond) <= 1e-10


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(2, 4), st.integers(0, 3))
def test_reverse_is_involution(seed, dim, n):
    p = random_protocol(dim, n, np.random.default_rng(seed))
    assert ae.protocols_equal(ae.reverse_protocol(ae.reverse_protocol(p)), p)


def test_marginal_distribution_spin(spin_protocol):
    m = ae.marginal_distribution(spin_protocol)
    for v in m.values():
        assert abs(v - 0.25) <= 1e-15


def test_degenerate_observable_rejected(pauli):
    deg = qcore.observable_from_operator(np.diag([1.0, 1.0, -1.0]), name="D")
    z3 = qcore.observable_from_operator(np.diag([1.0, 2.0, 3.0]), name="Z3")
    with pytest.raises(ae.ProtocolError, match="not complete"):
        ae.Protocol(z3, "+1", (deg,), z3, "+3")


def test_dimension_mismatch_rejected(pauli):
    z3 = qcore.observable_from_operator(np.diag([1.0, 2.0, 3.0]))
    with pytest.raises(ae.ProtocolError):
        ae.Protocol(pauli["z"], "z+", (z3,), pauli["z"], "z+")


def test_unknown_label_rejected(pauli, spin_protocol):
    with pytest.raises(ae.ProtocolError):
        ae.Protocol(pauli["z"], "up", (), pauli["z"], "z+")
    with pytest.raises(ae.ProtocolError):
        ae.abl_probability(spin_protocol, ("x+",))


def test_impossible_postselection(pauli):
    p = ae.Protocol(pauli["z"], "z+", (pauli["z"],), pauli["z"], "z-")
    assert ae.abl_normalization(p) == 0.0
    with pytest.raises(ae.ImpossiblePostSelection):
        ae.abl_distribution(p)
    with pytest.raises(ae.ImpossiblePostSelection):
        ae.conditional_distribution(p)


def test_aad_mid_outcome_certain(aad_xx, aad_zz):
    assert abs(ae.abl_probability(aad_xx, ("x+",)) - 1.0) <= 1e-15
    assert abs(ae.abl_probability(aad_zz, ("z+",)) - 1.0) <= 1e-15


def test_aad_compare(pauli):
    A, B, C = pauli["z"], pauli["x"], pauli["y"]
    r = ae.aad_compare(2, A, B, C, "z+", "x+")
    assert [b.ensemble.split(" = ")[0] for b in r.branches] == ["(A, C, B)", "(A, A, B)", "(A, B, B)"]
    acb, aab, abb = r.branches
    assert abs(aab.conditional["z+"] - 1) <= 1e-15
    assert abs(abb.conditional["x+"] - 1) <= 1e-15
    assert abs(acb.conditional["y+"] - 0.5) <= 1e-15
    # unculled: each middle outcome happens half the time from z+
    assert abs(abb.marginal_without_postselection["x+"] - 0.5) <= 1e-15
    assert abs(abb.without_postselection["x+"] - 0.5) <= 1e-15
    assert abs(aab.without_postselection["z+"] - 0.5) <= 1e-15
    d = r.to_dict()
    assert d["distinct_ensembles"] is True and len(d["flags"]) == 3


def test_aad_records_impossible_branch(pauli):
    A = pauli["z"]
    r = ae.aad_compare(2, A, A, pauli["x"], "z+", "z-")
    # (A, A, B) with a = z+, b = z-: the middle z measurement pins the state to z+
    aab = r.branches[1]
    assert aab.conditional is None and aab.error
    assert r.branches[0].conditional is not None


def test_robertson_spin_equality(pauli):
    r = ae.robertson_check(pauli["x"], pauli["y"], qcore.pure_state(Z_PLUS))
    assert abs(r.delta_c - 1) <= 1e-12 and abs(r.delta_d - 1) <= 1e-12
    assert abs(r.product - r.bound) <= 1e-10 and abs(r.bound - 1) <= 1e-12
    assert r.satisfied


def test_robertson_eigenstate_zero(pauli):
    r = ae.robertson_check(pauli["x"], pauli["z"], qcore.pure_state(X_PLUS))
    assert r.delta_c <= 1e-12 and r.bound <= 1e-12 and r.satisfied


def test_original_notation_spin(spin_protocol):
    for s in ae.all_sequences(spin_protocol):
        assert abs(ae.abl_probability_original_notation(spin_protocol, s) - 0.25) <= 1e-12


def test_robertson_commuting(pauli):
    r = ae.robertson_check(pauli["y"], pauli["y"], qcore.pure_state(X_PLUS))
    assert r.bound <= 1e-15 and r.satisfied


def test_overall_orthogonal_state(pauli, spin_protocol):
    q = spin_protocol.with_initial_state(qcore.pure_state([0, 1]))
    assert ae.overall_probability(q) <= 1e-15
    with pytest.raises(ae.ImpossiblePostSelection):
        ae.conditional_distribution(q)


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(2, 3), st.integers(0, 2))
def test_overall_sums_to_one_over_pre_and_post(seed, dim, n):
    rng = np.random.default_rng(seed)
    p = random_protocol(dim, n, rng)
    psi = random_pure_state(dim, rng)
    total = sum(
        ae.overall_probability(ae.Protocol(p.pre, a, p.intermediates, p.post, b, psi))
        for a in p.pre.labels
        for b in p.post.labels
    )
    assert abs(total - 1) <= 1e-12


def test_reverse_structure_and_default_state(spin_protocol):
    q = spin_protocol.with_initial_state(qcore.pure_state([0.6, 0.8]))
    r = ae.reverse_protocol(q)
    assert (r.pre_label, r.post_label) == ("z-", "z+")
    assert [c.name for c in r.intermediates] == ["pauli_y", "pauli_x"]
    assert r.initial_state is None
