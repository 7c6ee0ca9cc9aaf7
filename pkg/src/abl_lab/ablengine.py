"""Closed-form probabilities for pre- and post-selected measurement sequences.

A protocol measures ``A, C_1, ..., C_n, B`` in that order and keeps the trials
whose first outcome is ``a`` and last outcome is ``b``. All weights below are
traces of projector chains::

    w(seq | X) = tr(P_b K X K^dagger),   K = P_{c_n} ... P_{c_1}

with ``X = P_a`` for the ABL rule and ``X = P_a rho P_a`` for the
state-dependent joint probability.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

from . import complexla as la
from . import qcore
from .qcore import Observable, QuantumState

IMPOSSIBLE_TOL = 1e-14
MAX_SEQUENCES = 10**7
ROBERTSON_SLACK = 1e-10

OutcomeSequence = tuple[str, ...]


class ImpossiblePostSelection(ValueError):
    """The pre/post-selected pair (a, b) has zero probability."""


class ProtocolError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Protocol:
    """Ordered measurement list ``(A, C_1, ..., C_n, B)`` with selected outcomes ``a`` and ``b``.

    ``initial_state`` defaults to the eigenvector of the pre-selected outcome.
    Every observable must be complete (all outcome projectors rank one).
    """

    pre: Observable
    pre_label: str
    intermediates: tuple[Observable, ...]
    post: Observable
    post_label: str
    initial_state: Optional[QuantumState] = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "intermediates", tuple(self.intermediates))
        dim = self.pre.dim
        for obs in self.observables:
            if obs.dim != dim:
                raise ProtocolError(f"observable {obs.name!r} has dim {obs.dim}, protocol has dim {dim}")
            if not obs.complete:
                ranks = [o.rank for o in obs.outcomes]
                raise ProtocolError(
                    f"observable {obs.name!r} is not complete (outcome ranks {ranks}); "
                    "sequential pre/post-selection here requires rank-one outcomes"
                )
        try:
            object.__setattr__(self, "pre_label", self.pre.outcome(self.pre_label).label)
            object.__setattr__(self, "post_label", self.post.outcome(self.post_label).label)
        except KeyError as exc:
            raise ProtocolError(str(exc.args[0])) from None
        if self.initial_state is not None and self.initial_state.dim != dim:
            raise ProtocolError(f"initial state has dim {self.initial_state.dim}, protocol has dim {dim}")
        if sequence_count(self) > MAX_SEQUENCES:
            raise ProtocolError(f"protocol has more than {MAX_SEQUENCES} intermediate outcome sequences")

    @property
    def dim(self) -> int:
        return self.pre.dim

    @property
    def n(self) -> int:
        return len(self.intermediates)

    @property
    def observables(self) -> tuple[Observable, ...]:
        return (self.pre, *self.intermediates, self.post)

    @property
    def state(self) -> QuantumState:
        """The prepared state: ``initial_state`` or the default ``|a>``."""
        if self.initial_state is not None:
            return self.initial_state
        return qcore.basis_state(self.pre, self.pre_label)

    def with_initial_state(self, state) -> "Protocol":
        st = None if state is None else qcore.as_state(state)
        return Protocol(self.pre, self.pre_label, self.intermediates, self.post, self.post_label, st)

    def describe(self) -> str:
        names = [self.pre.name, *(c.name for c in self.intermediates), self.post.name]
        return f"({', '.join(names)}) pre={self.pre_label} post={self.post_label}"


def sequence_count(p: Protocol) -> int:
    return math.prod(len(c.outcomes) for c in p.intermediates)


def all_sequences(p: Protocol) -> Iterator[OutcomeSequence]:
    """Every intermediate outcome sequence, lexicographic in stored outcome order."""
    return itertools.product(*(c.labels for c in p.intermediates))


def validate_sequence(p: Protocol, seq: Sequence) -> OutcomeSequence:
    seq = tuple(seq)
    if len(seq) != p.n:
        raise ProtocolError(f"sequence has {len(seq)} labels, protocol has {p.n} intermediate observables")
    try:
        return tuple(c.outcome(s).label for c, s in zip(p.intermediates, seq))
    except KeyError as exc:
        raise ProtocolError(str(exc.args[0])) from None


def _chain(p: Protocol, seq: OutcomeSequence) -> np.ndarray:
    k = la.identity(p.dim)
    for obs, label in zip(p.intermediates, seq):
        k = obs.projector(label) @ k
    return k


def _weight(p: Protocol, seq: OutcomeSequence, middle: np.ndarray) -> float:
    k = _chain(p, seq)
    return la.trace(p.post.projector(p.post_label) @ k @ middle @ la.dagger(k)).real


def _abl_middle(p: Protocol) -> np.ndarray:
    return p.pre.projector(p.pre_label)


def _state_middle(p: Protocol) -> np.ndarray:
    pa = p.pre.projector(p.pre_label)
    return pa @ p.state.density_matrix() @ pa


def _weights(p: Protocol, middle: np.ndarray) -> dict[OutcomeSequence, float]:
    return {seq: _weight(p, seq, middle) for seq in all_sequences(p)}


def abl_weights(p: Protocol) -> dict[OutcomeSequence, float]:
    """Unnormalised ABL weights ``tr(P_b K P_a K^dagger)``.

    For rank-one ``P_a`` each weight is the probability of ``seq`` followed by
    ``b`` for a system that has just yielded ``a``, so they are also the
    un-post-selected frequencies ``N_{a seq b} / N_a``.
    """
    return {s: max(v, 0.0) for s, v in _weights(p, _abl_middle(p)).items()}


def marginal_distribution(p: Protocol) -> dict[OutcomeSequence, float]:
    """``p(seq | a)`` with the final measurement ignored entirely."""
    pa = _abl_middle(p)
    out = {}
    for seq in all_sequences(p):
        k = _chain(p, seq)
        out[seq] = max(la.trace(k @ pa @ la.dagger(k)).real, 0.0)
    return out


def abl_normalization(p: Protocol) -> float:
    """Sum over all sequences of ``tr(P_b K P_a K^dagger)``; ``H(a, b)`` in ABL's notation."""
    return sum(_weights(p, _abl_middle(p)).values())


def abl_distribution(p: Protocol) -> dict[OutcomeSequence, float]:
    """ABL conditional probability for every intermediate outcome sequence."""
    w = _weights(p, _abl_middle(p))
    total = sum(w.values())
    if total <= IMPOSSIBLE_TOL:
        raise ImpossiblePostSelection(
            f"impossible post-selection: H(a={p.pre_label}, b={p.post_label}) = {total:.3g}"
        )
    return {seq: max(v, 0.0) / total for seq, v in w.items()}


def abl_probability(p: Protocol, seq: Sequence) -> float:
    seq = validate_sequence(p, seq)
    return abl_distribution(p)[seq]


def abl_probability_original_notation(p: Protocol, seq: Sequence) -> float:
    """Same ABL value written as ``tr(P_a P_c1 ... P_cn P_b P_cn ... P_c1) / H(a, b)``."""
    seq = validate_sequence(p, seq)
    pa, pb = p.pre.projector(p.pre_label), p.post.projector(p.post_label)

    def term(s):
        rev = la.identity(p.dim)
        for obs, label in zip(p.intermediates, s):
            rev = rev @ obs.projector(label)
        return la.trace(pa @ rev @ pb @ la.dagger(rev)).real

    h = sum(term(s) for s in all_sequences(p))
    if h <= IMPOSSIBLE_TOL:
        raise ImpossiblePostSelection(f"impossible post-selection: H(a, b) = {h:.3g}")
    return term(seq) / h


def joint_probability(p: Protocol, seq: Sequence) -> float:
    """Probability of observing ``a``, then ``seq``, then ``b`` from the prepared state."""
    seq = validate_sequence(p, seq)
    return max(_weight(p, seq, _state_middle(p)), 0.0)


def overall_probability(p: Protocol) -> float:
    """Probability of the pre/post pair ``(a, b)``, summed over intermediate sequences."""
    return sum(max(v, 0.0) for v in _weights(p, _state_middle(p)).values())


def conditional_distribution(p: Protocol) -> dict[OutcomeSequence, float]:
    w = {s: max(v, 0.0) for s, v in _weights(p, _state_middle(p)).items()}
    total = sum(w.values())
    if total <= IMPOSSIBLE_TOL:
        raise ImpossiblePostSelection(
            f"impossible post-selection: p(a={p.pre_label}, b={p.post_label}) = {total:.3g}"
        )
    return {s: v / total for s, v in w.items()}


def conditional_probability(p: Protocol, seq: Sequence) -> float:
    """Joint over overall probability (Bayes), for the prepared state."""
    seq = validate_sequence(p, seq)
    return conditional_distribution(p)[seq]


def reverse_protocol(p: Protocol) -> Protocol:
    """Swap pre- and post-selection and reverse the intermediates.

    This is reverse-ordering of the measurement list, not a time reversal of
    the protocol. The initial state resets to the new pre-selected eigenvector.
    """
    return Protocol(p.post, p.post_label, tuple(reversed(p.intermediates)), p.pre, p.pre_label)


def protocols_equal(p: Protocol, q: Protocol, tol: float = 0.0) -> bool:
    """Structural equality: same observables (operators and labels), outcomes and state."""

    def same_obs(x: Observable, y: Observable) -> bool:
        return (
            x.name == y.name
            and x.labels == y.labels
            and x.operator.shape == y.operator.shape
            and bool(np.max(np.abs(x.operator - y.operator)) <= tol)
        )

    if p.n != q.n or p.pre_label != q.pre_label or p.post_label != q.post_label:
        return False
    if not all(same_obs(x, y) for x, y in zip(p.observables, q.observables)):
        return False
    if (p.initial_state is None) != (q.initial_state is None):
        return False
    if p.initial_state is not None:
        a, b = p.initial_state.density_matrix(), q.initial_state.density_matrix()
        return bool(np.max(np.abs(a - b)) <= max(tol, 1e-15))
    return True


# -- the three AAD ensembles --------------------------------------------------


@dataclass
class AADBranch:
    """One of the three distinct ensembles ``(A, X, B)``."""

    ensemble: str
    middle: str
    conditional: Optional[dict[str, float]]
    without_postselection: dict[str, float]
    marginal_without_postselection: dict[str, float]
    designated: Optional[str] = None
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "ensemble": self.ensemble,
            "middle_observable": self.middle,
            "designated_outcome": self.designated,
            "conditional": self.conditional,
            "joint_without_postselection": self.without_postselection,
            "marginal_without_postselection": self.marginal_without_postselection,
            "error": self.error,
        }


@dataclass
class AADReport:
    pre: str
    post: str
    branches: list[AADBranch]
    flags: list[str]

    def branch(self, ensemble: str) -> AADBranch:
        for b in self.branches:
            if b.ensemble == ensemble:
                return b
        raise KeyError(ensemble)

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "pre": self.pre,
            "post": self.post,
            "distinct_ensembles": True,
            "branches": [b.to_dict() for b in self.branches],
            "flags": list(self.flags),
        }


def aad_compare(dim: int, A: Observable, B: Observable, C: Observable, a, b) -> AADReport:
    """Evaluate the protocols ``(A, C, B)``, ``(A, A, B)`` and ``(A, B, B)`` separately.

    Each branch gives the post-selected conditional distribution of its middle
    outcome and, as the unculled control, ``p(middle, b | a)`` and the plain
    marginal ``p(middle | a)``. The branches are separate physical ensembles
    and are never merged; an impossible post-selection is recorded on the
    branch rather than raised.
    """
    for obs in (A, B, C):
        if obs.dim != dim:
            raise ProtocolError(f"observable {obs.name!r} has dim {obs.dim}, expected {dim}")
    a_label, b_label = A.outcome(a).label, B.outcome(b).label
    specs = [
        (f"(A, C, B) = ({A.name}, {C.name}, {B.name})", C, None),
        (f"(A, A, B) = ({A.name}, {A.name}, {B.name})", A, a_label),
        (f"(A, B, B) = ({A.name}, {B.name}, {B.name})", B, b_label),
    ]
    branches = []
    for ensemble, middle, designated in specs:
        p = Protocol(A, a_label, (middle,), B, b_label)
        psi_a = qcore.basis_state(A, a_label)
        joint = {}
        marginal = {}
        for o in middle.outcomes:
            # plain Born chain from |a>: P(middle) then P(b | middle)
            pm = qcore.born_probability(psi_a, o.projector)
            marginal[o.label] = pm
            if pm > 0.0:
                after = qcore.collapse(psi_a, o.projector)
                joint[o.label] = pm * qcore.born_probability(after, p.post.projector(b_label))
            else:
                joint[o.label] = 0.0
        try:
            cond = {seq[0]: v for seq, v in abl_distribution(p).items()}
            err = None
        except ImpossiblePostSelection as exc:
            cond, err = None, str(exc)
        branches.append(AADBranch(ensemble, middle.name, cond, joint, marginal, designated, err))
    flags = [
        f"{x.ensemble.split(' = ')[0]} vs {y.ensemble.split(' = ')[0]}: distinct ensembles, not jointly interpretable"
        for x, y in itertools.combinations(branches, 2)
    ]
    return AADReport(a_label, b_label, branches, flags)


# -- uncertainty bound --------------------------------------------------------


@dataclass(frozen=True)
class RobertsonResult:
    delta_c: float
    delta_d: float
    bound: float
    satisfied: bool

    @property
    def product(self) -> float:
        return self.delta_c * self.delta_d


def _spread(obs: Observable, state: QuantumState) -> float:
    probs = qcore.outcome_probabilities(state, obs)
    values = np.array([o.value for o in obs.outcomes])
    mean = float(probs @ values)
    var = float(probs @ (values - mean) ** 2)
    return math.sqrt(max(var, 0.0))


def robertson_check(C: Observable, D: Observable, state) -> RobertsonResult:
    """Spreads of the Born outcome distributions of ``C`` and ``D`` against
    ``|tr([C, D] rho)| / 2``."""
    state = qcore.as_state(state)
    if C.dim != D.dim or C.dim != state.dim:
        raise la.DimensionError(f"dimension mismatch: C={C.dim}, D={D.dim}, state={state.dim}")
    dc, dd = _spread(C, state), _spread(D, state)
    comm = C.operator @ D.operator - D.operator @ C.operator
    bound = 0.5 * abs(la.trace(comm @ state.density_matrix()))
    return RobertsonResult(dc, dd, bound, dc * dd >= bound - ROBERTSON_SLACK)
