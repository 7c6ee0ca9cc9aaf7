"""Textbook quantum kernel: states, observables as PVMs, Born rule, collapse."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import complexla as la
from .randomstream import RandomStream, stream, uniforms  # noqa: F401  (re-exported)

STATE_TOL = 1e-10
PVM_TOL = 1e-9
DEGENERACY_TOL = 1e-8
NEGATIVE_PROB_TOL = 1e-12
# Born weights at or below this are round-off; sampling never selects them.
SAMPLING_FLOOR = 1e-14


class ImpossibleOutcomeError(ValueError):
    """Collapse requested onto an outcome of zero probability."""


class InvalidStateError(ValueError):
    pass


class InvalidObservableError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class QuantumState:
    """A unit state vector (``kind='pure'``) or a density matrix (``kind='mixed'``).

    Build with :func:`pure_state` / :func:`mixed_state`, which check the
    invariants; the constructor itself trusts its arguments.
    """

    kind: str
    vector: Optional[np.ndarray] = None
    density: Optional[np.ndarray] = None

    @property
    def dim(self) -> int:
        return (self.vector if self.kind == "pure" else self.density).shape[0]

    def density_matrix(self) -> np.ndarray:
        if self.kind == "pure":
            return la.outer(self.vector)
        return self.density.copy()

    def __repr__(self):
        return f"QuantumState(kind={self.kind!r}, dim={self.dim})"


def pure_state(vector, tol: float = STATE_TOL, normalize: bool = False) -> QuantumState:
    v = la.as_vector(vector).copy()
    n = la.norm(v)
    if normalize:
        if n == 0.0:
            raise InvalidStateError("cannot normalise the zero vector")
        v = v / n
    elif abs(n - 1.0) > tol:
        raise InvalidStateError(f"state vector has norm {n}, expected 1")
    v.setflags(write=False)
    return QuantumState("pure", vector=v)


def mixed_state(density, tol: float = STATE_TOL) -> QuantumState:
    rho = la.as_operator(density).copy()
    if not la.is_self_adjoint(rho, tol):
        raise InvalidStateError("density matrix is not self-adjoint")
    if not la.is_positive_semidefinite(rho, tol):
        raise InvalidStateError("density matrix is not positive semidefinite")
    if not la.is_unit_trace(rho, tol):
        raise InvalidStateError(f"density matrix has trace {la.trace(rho)}, expected 1")
    rho.setflags(write=False)
    return QuantumState("mixed", density=rho)


def as_state(x) -> QuantumState:
    """Accept a QuantumState, a unit vector, or a density matrix."""
    if isinstance(x, QuantumState):
        return x
    arr = np.asarray(x)
    return pure_state(arr) if arr.ndim == 1 else mixed_state(arr)


@dataclass(frozen=True)
class Outcome:
    label: str
    value: float
    projector: np.ndarray = field(repr=False, compare=False)

    @property
    def rank(self) -> int:
        return int(round(la.trace(self.projector).real))


@dataclass(frozen=True, eq=False)
class Observable:
    """Self-adjoint operator together with its spectral PVM.

    Outcomes are ordered by ascending eigenvalue; that order is also the
    inverse-CDF order used when sampling.
    """

    name: str
    operator: np.ndarray = field(repr=False)
    outcomes: tuple[Outcome, ...]

    @property
    def dim(self) -> int:
        return self.operator.shape[0]

    @property
    def complete(self) -> bool:
        return all(o.rank == 1 for o in self.outcomes)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(o.label for o in self.outcomes)

    @property
    def projectors(self) -> np.ndarray:
        """Stacked ``(K, dim, dim)`` array of outcome projectors."""
        return np.stack([o.projector for o in self.outcomes])

    def index_of(self, label) -> int:
        """Position of an outcome, looked up by label or, failing that, by eigenvalue."""
        key = str(label)
        for k, o in enumerate(self.outcomes):
            if o.label == key:
                return k
        try:
            value = float(label)
        except (TypeError, ValueError):
            value = None
        if value is not None:
            for k, o in enumerate(self.outcomes):
                if abs(o.value - value) <= DEGENERACY_TOL:
                    return k
        raise KeyError(f"observable {self.name!r} has no outcome {label!r}; outcomes are {list(self.labels)}")

    def outcome(self, label) -> Outcome:
        return self.outcomes[self.index_of(label)]

    def projector(self, label) -> np.ndarray:
        return self.outcome(label).projector

    def eigenvector(self, label) -> np.ndarray:
        """Unit vector of a rank-one outcome, phase-fixed."""
        o = self.outcome(label)
        if o.rank != 1:
            raise InvalidObservableError(f"outcome {o.label!r} of {self.name!r} is degenerate (rank {o.rank})")
        pairs = la.eigendecompose_self_adjoint(o.projector)
        return pairs[-1].vector

    def check_pvm(self, tol: float = PVM_TOL) -> None:
        """Raise unless the projectors are orthogonal, idempotent and complete."""
        projs = [o.projector for o in self.outcomes]
        d = self.dim
        for i, p in enumerate(projs):
            for j, q in enumerate(projs):
                target = p if i == j else np.zeros((d, d))
                if np.max(np.abs(p @ q - target)) > tol:
                    raise InvalidObservableError(f"projectors {i},{j} of {self.name!r} violate P_i P_j = delta_ij P_i")
        if np.max(np.abs(sum(projs) - np.eye(d))) > tol:
            raise InvalidObservableError(f"projectors of {self.name!r} do not sum to the identity")


def _label_for(value: float) -> str:
    # snap eigensolver round-off so labels read "+0", "+1", not "-6e-18"
    snapped = round(value, 9) + 0.0
    return f"{snapped:+.10g}"


def observable_from_operator(
    op,
    degeneracy_tol: float = DEGENERACY_TOL,
    labels: Optional[Sequence[str]] = None,
    name: str = "",
) -> Observable:
    """Spectral PVM of a self-adjoint operator.

    Eigenvalues within ``degeneracy_tol`` of their neighbour are merged into a
    single outcome whose projector is the sum of the rank-one projectors.
    Without ``labels`` the outcome labels are signed eigenvalue strings such as
    ``"+1"`` and ``"-1"``.
    """
    op = la.as_operator(op)
    pairs = la.eigendecompose_self_adjoint(op, tol=la.DEFAULT_TOL)
    groups = la.degenerate_groups(pairs, degeneracy_tol)
    if labels is not None and len(labels) != len(groups):
        raise InvalidObservableError(f"got {len(labels)} labels for {len(groups)} distinct eigenvalues")
    outcomes = []
    for g_index, g in enumerate(groups):
        value = float(np.mean([pairs[k].value for k in g]))
        proj = sum(la.outer(pairs[k].vector) for k in g)
        proj.setflags(write=False)
        label = str(labels[g_index]) if labels is not None else _label_for(value)
        outcomes.append(Outcome(label, value, proj))
    if len({o.label for o in outcomes}) != len(outcomes):
        raise InvalidObservableError("outcome labels must be distinct")
    frozen = op.copy()
    frozen.setflags(write=False)
    obs = Observable(name, frozen, tuple(outcomes))
    obs.check_pvm()
    return obs


PAULI = {
    "pauli_x": (np.array([[0, 1], [1, 0]], dtype=np.complex128), ("x-", "x+")),
    "pauli_y": (np.array([[0, -1j], [1j, 0]], dtype=np.complex128), ("y-", "y+")),
    "pauli_z": (np.array([[1, 0], [0, -1]], dtype=np.complex128), ("z-", "z+")),
}
BUILTINS = ("pauli_x", "pauli_y", "pauli_z", "identity")


def builtin_observable(kind: str, dim: int = 2, name: Optional[str] = None) -> Observable:
    """Named builtin: ``pauli_x``/``pauli_y``/``pauli_z`` (spin-1/2, labels like
    ``x+``/``x-``) or ``identity`` of any dimension (single outcome ``"1"``)."""
    if kind in PAULI:
        if dim != 2:
            raise InvalidObservableError(f"{kind} is only defined for dim 2, not {dim}")
        op, labels = PAULI[kind]
        return observable_from_operator(op, labels=labels, name=name or kind)
    if kind == "identity":
        return observable_from_operator(la.identity(dim), labels=("1",), name=name or kind)
    raise InvalidObservableError(f"unknown builtin observable {kind!r}; choose from {BUILTINS}")


def basis_state(obs: Observable, label) -> QuantumState:
    return pure_state(obs.eigenvector(label))


# -- Born rule and collapse ---------------------------------------------------


def _clamp_probability(p: float) -> float:
    if p < -NEGATIVE_PROB_TOL or p > 1.0 + NEGATIVE_PROB_TOL:
        raise ValueError(f"Born probability {p} outside [0, 1]; projector or state is malformed")
    return min(max(p, 0.0), 1.0)


def _check_dim(state: QuantumState, op: np.ndarray) -> None:
    if state.dim != op.shape[0]:
        raise la.DimensionError(f"state has dim {state.dim}, operator has dim {op.shape[0]}")


def born_probability(state: QuantumState, projector) -> float:
    p = la.as_operator(projector)
    _check_dim(state, p)
    if state.kind == "pure":
        amp = p @ state.vector
        raw = float(np.vdot(amp, amp).real)
    else:
        raw = la.trace(p @ state.density).real
    return _clamp_probability(raw)


def collapse(state: QuantumState, projector) -> QuantumState:
    p = la.as_operator(projector)
    _check_dim(state, p)
    prob = born_probability(state, p)
    if prob <= 0.0:
        raise ImpossibleOutcomeError("collapse onto an outcome with zero Born probability")
    if state.kind == "pure":
        v = p @ state.vector
        v = la.fix_phase(v / la.norm(v))
        v.setflags(write=False)
        return QuantumState("pure", vector=v)
    rho = p @ state.density @ p
    rho = rho / la.trace(rho).real
    rho = 0.5 * (rho + la.dagger(rho))
    rho.setflags(write=False)
    return QuantumState("mixed", density=rho)


def outcome_probabilities(state: QuantumState, obs: Observable) -> np.ndarray:
    """Born distribution over ``obs.outcomes`` in stored order."""
    _check_dim(state, obs.operator)
    if state.kind == "pure":
        probs = pure_probabilities(state.vector[None, :], obs.projectors)[0]
    else:
        probs = mixed_probabilities(state.density[None, :, :], obs.projectors)[0]
    return probs


# Batched kernels, shared by single-trial sampling and the vectorised ensemble
# so both paths see bit-identical probabilities.


def pure_probabilities(psis: np.ndarray, projectors: np.ndarray) -> np.ndarray:
    amps = np.einsum("kij,nj->nki", projectors, psis)
    raw = np.einsum("nki,nki->nk", amps.conj(), amps).real
    return _clamp_rows(raw)


def mixed_probabilities(rhos: np.ndarray, projectors: np.ndarray) -> np.ndarray:
    raw = np.einsum("kij,nji->nk", projectors, rhos).real
    return _clamp_rows(raw)


def _clamp_rows(raw: np.ndarray) -> np.ndarray:
    if raw.size and (raw.min() < -NEGATIVE_PROB_TOL or raw.max() > 1.0 + NEGATIVE_PROB_TOL):
        raise ValueError("Born probability outside [0, 1]; projector or state is malformed")
    return np.clip(raw, 0.0, 1.0)


def inverse_cdf(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Row-wise inverse-CDF choice: the first outcome whose cumulative weight exceeds ``u``.

    Weights at or below :data:`SAMPLING_FLOOR` are dropped first. If round-off
    leaves ``u`` above the final cumulative sum, the last admissible outcome is
    returned.
    """
    w = np.where(probs > SAMPLING_FLOOR, probs, 0.0)
    cdf = np.cumsum(w, axis=1)
    idx = np.argmax(u[:, None] < cdf, axis=1)
    overflow = u >= cdf[:, -1]
    if overflow.any():
        last = w.shape[1] - 1 - np.argmax(w[:, ::-1] > 0.0, axis=1)
        idx = np.where(overflow, last, idx)
    return idx


def collapse_pure_rows(psis: np.ndarray, projectors: np.ndarray, idx: np.ndarray, probs: np.ndarray) -> np.ndarray:
    chosen = projectors[idx]
    out = np.einsum("nij,nj->ni", chosen, psis)
    return out / np.sqrt(probs[np.arange(len(idx)), idx])[:, None]


def collapse_mixed_rows(rhos: np.ndarray, projectors: np.ndarray, idx: np.ndarray, probs: np.ndarray) -> np.ndarray:
    chosen = projectors[idx]
    out = np.einsum("nij,njk,nkl->nil", chosen, rhos, chosen)
    return out / probs[np.arange(len(idx)), idx][:, None, None]


def measure_sample(state: QuantumState, obs: Observable, rng: RandomStream) -> tuple[str, QuantumState]:
    """Draw one outcome of ``obs`` from the Born distribution and collapse onto it.

    Consumes exactly one uniform variate from ``rng``.
    """
    probs = outcome_probabilities(state, obs)
    u = rng.uniform()
    k = int(inverse_cdf(probs[None, :], np.array([u]))[0])
    o = obs.outcomes[k]
    return o.label, collapse(state, o.projector)
