"""Randomised invariant sweeps over small protocols.

Each check returns the largest deviation it saw; a sweep passes when every
deviation is within its tolerance. Instances are drawn from a numpy
``Generator`` seeded per instance, so a failing instance can be regenerated
from ``(seed, index)`` alone and is also written out as a protocol file.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import ablengine as ae
from . import complexla as la
from . import fullchain, qcore
from .ablengine import Protocol

TOLERANCES = {
    "normalization": 1e-10,
    "reverse_ordering_symmetry": 1e-10,
    "oracle_conditional": 1e-10,
    "oracle_abl": 1e-10,
    "marginalization": 1e-12,
    "bayes": 1e-12,
    "psi_independence": 1e-10,
    "robertson": 1e-10,
}


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return 0.5 * (z + la.dagger(z))


def random_observable(dim: int, rng: np.random.Generator, name: str = "") -> qcore.Observable:
    """Complete observable: Haar-random eigenbasis, well-separated eigenvalues."""
    u = random_unitary(dim, rng)
    values = np.arange(dim, dtype=float) + rng.uniform(-0.25, 0.25, size=dim)
    op = u @ np.diag(values) @ la.dagger(u)
    return qcore.observable_from_operator(0.5 * (op + la.dagger(op)), name=name)


def random_pure_state(dim: int, rng: np.random.Generator) -> qcore.QuantumState:
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return qcore.pure_state(v, normalize=True)


def random_mixed_state(dim: int, rng: np.random.Generator) -> qcore.QuantumState:
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = g @ la.dagger(g)
    return qcore.mixed_state(rho / la.trace(rho).real)


def random_protocol(dim: int, n: int, rng: np.random.Generator) -> Protocol:
    """Random complete observables with a pre/post pair of non-negligible weight."""
    for _ in range(100):
        a_obs = random_observable(dim, rng, "A")
        cs = tuple(random_observable(dim, rng, f"C{k + 1}") for k in range(n))
        b_obs = random_observable(dim, rng, "B")
        a = a_obs.labels[rng.integers(dim)]
        b = b_obs.labels[rng.integers(dim)]
        p = Protocol(a_obs, a, cs, b_obs, b)
        if ae.abl_normalization(p) > 1e-6:
            return p
    raise RuntimeError("could not draw a protocol with a possible post-selection")


def random_overlapping_state(p: Protocol, rng: np.random.Generator, floor: float = 1e-3) -> qcore.QuantumState:
    """Random pure state with ``|<a|psi>|^2`` above ``floor``."""
    pa = p.pre.projector(p.pre_label)
    while True:
        st = random_pure_state(p.dim, rng)
        if qcore.born_probability(st, pa) > floor:
            return st


# -- individual checks ----------------------------------------------------------


def check_normalization(p: Protocol) -> float:
    return abs(sum(ae.abl_distribution(p).values()) - 1.0)


def check_reverse_symmetry(p: Protocol) -> float:
    fwd = ae.abl_distribution(p)
    rev = ae.abl_distribution(ae.reverse_protocol(p))
    return max(abs(v - rev[tuple(reversed(s))]) for s, v in fwd.items())


def check_oracle(p: Protocol, psi: qcore.QuantumState) -> tuple[float, float]:
    """(oracle vs conditional with random psi, oracle vs ABL with psi = |a>)."""
    q = p.with_initial_state(psi)
    oracle = fullchain.oracle_conditional(q)
    cond = ae.conditional_distribution(q)
    d_cond = max(abs(oracle[s] - cond[s]) for s in cond)
    oracle_a = fullchain.oracle_conditional(p.with_initial_state(None))
    abl = ae.abl_distribution(p)
    d_abl = max(abs(oracle_a[s] - abl[s]) for s in abl)
    return d_cond, d_abl


def check_marginalization_and_bayes(p: Protocol) -> tuple[float, float]:
    overall = ae.overall_probability(p)
    joints = {s: ae.joint_probability(p, s) for s in ae.all_sequences(p)}
    d_marg = abs(sum(joints.values()) - overall)
    cond = ae.conditional_distribution(p)
    d_bayes = max(abs(cond[s] * overall - joints[s]) for s in joints)
    return d_marg, d_bayes


def check_psi_independence(p: Protocol, psi1, psi2) -> float:
    c1 = ae.conditional_distribution(p.with_initial_state(psi1))
    c2 = ae.conditional_distribution(p.with_initial_state(psi2))
    return max(abs(c1[s] - c2[s]) for s in c1)


def robertson_violation(C, D, state) -> float:
    r = ae.robertson_check(C, D, state)
    return max(0.0, r.bound - r.product)


# -- sweep driver ---------------------------------------------------------------


@dataclass
class Failure:
    check: str
    index: int
    deviation: float
    protocol: Optional[Protocol] = None


@dataclass
class SweepResult:
    instances: int
    max_dev: dict[str, float] = field(default_factory=lambda: {k: 0.0 for k in TOLERANCES})
    failures: list[Failure] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def record(self, check: str, index: int, dev: float, p: Optional[Protocol] = None):
        self.max_dev[check] = max(self.max_dev[check], dev)
        if not dev <= TOLERANCES[check]:
            self.failures.append(Failure(check, index, dev, p))


def instance_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(index)])


def run_sweep(
    instances: int = 200,
    dims: Sequence[int] = (2, 3),
    max_n: int = 2,
    seed: int = 0,
    robertson_dims: Sequence[int] = (2, 3, 4, 5, 6),
    progress: Optional[Callable[[int], None]] = None,
) -> SweepResult:
    """Every invariant on ``instances`` random protocols with ``n`` in ``1..max_n``."""
    out = SweepResult(instances)
    for i in range(instances):
        rng = instance_rng(seed, i)
        dim = int(rng.choice(list(dims)))
        n = int(rng.integers(1, max_n + 1)) if max_n >= 1 else 0
        p = random_protocol(dim, n, rng)
        out.record("normalization", i, check_normalization(p), p)
        out.record("reverse_ordering_symmetry", i, check_reverse_symmetry(p), p)
        psi1 = random_overlapping_state(p, rng)
        psi2 = random_overlapping_state(p, rng)
        d_cond, d_abl = check_oracle(p, psi1)
        out.record("oracle_conditional", i, d_cond, p.with_initial_state(psi1))
        out.record("oracle_abl", i, d_abl, p)
        d_marg, d_bayes = check_marginalization_and_bayes(p.with_initial_state(psi1))
        out.record("marginalization", i, d_marg, p.with_initial_state(psi1))
        out.record("bayes", i, d_bayes, p.with_initial_state(psi1))
        out.record("psi_independence", i, check_psi_independence(p, psi1, psi2), p)
        rdim = int(rng.choice(list(robertson_dims)))
        C = qcore.observable_from_operator(random_hermitian(rdim, rng), name="C")
        D = qcore.observable_from_operator(random_hermitian(rdim, rng), name="D")
        st = random_pure_state(rdim, rng) if rng.random() < 0.5 else random_mixed_state(rdim, rng)
        out.record("robertson", i, robertson_violation(C, D, st))
        if progress is not None:
            progress(i)
    return out
