"""Subject (x) device (x) observer model of a measurement sequence.

An independent check of the closed-form engine: the observer records ``A``,
a device records each ``C_k`` into a pointer labelled by the outcome prefix,
the observer records ``B``, and every probability is read off the resulting
total state vector with the Born rule and partial traces. Nothing here calls
into :mod:`abl_lab.ablengine`.

The total state is held as an array ``T[s, d, o]`` (subject, device,
observer); flattening it in C order gives the Kronecker layout of
:func:`abl_lab.complexla.tensor`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import complexla as la

MAX_TOTAL_DIM = 10_000
PURITY_TOL = 1e-9
ORTHONORMAL_TOL = 1e-10


class ChainTooLarge(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ChainModel:
    """Pointer bases for the device and the observer.

    ``device_index`` maps every outcome prefix ``()``, ``(c1,)``,
    ``(c1, c2)``, ... to a column of ``device_basis``; ``observer_index`` maps
    ``()``, ``(a,)`` and ``(a, b)`` to a column of ``observer_basis``.
    """

    subject_dim: int
    device_index: dict
    device_basis: np.ndarray
    observer_index: dict
    observer_basis: np.ndarray

    @property
    def device_dim(self) -> int:
        return self.device_basis.shape[0]

    @property
    def observer_dim(self) -> int:
        return self.observer_basis.shape[0]

    @property
    def dims(self) -> list[int]:
        return [self.subject_dim, self.device_dim, self.observer_dim]

    @property
    def total_dim(self) -> int:
        return self.subject_dim * self.device_dim * self.observer_dim

    def dev(self, prefix) -> np.ndarray:
        return self.device_basis[:, self.device_index[tuple(prefix)]]

    def obs(self, record) -> np.ndarray:
        return self.observer_basis[:, self.observer_index[tuple(record)]]


def _random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def build_model(p, embedding_seed: Optional[int] = None) -> ChainModel:
    """Minimal pointer bases for protocol ``p``.

    With ``embedding_seed`` the pointer vectors are the columns of random
    unitaries instead of standard basis vectors; probabilities do not depend
    on that choice.
    """
    prefixes = [()]
    level = [()]
    for c in p.intermediates:
        level = [pre + (lab,) for pre in level for lab in c.labels]
        prefixes.extend(level)
    records = [()] + [(a,) for a in p.pre.labels] + [(a, b) for a in p.pre.labels for b in p.post.labels]
    d_dev, d_obs = len(prefixes), len(records)
    total = p.dim * d_dev * d_obs
    if total > MAX_TOTAL_DIM:
        raise ChainTooLarge(f"total Hilbert dimension {total} exceeds {MAX_TOTAL_DIM}")
    if embedding_seed is None:
        dev_basis, obs_basis = la.identity(d_dev), la.identity(d_obs)
    else:
        rng = np.random.default_rng(embedding_seed)
        dev_basis, obs_basis = _random_unitary(d_dev, rng), _random_unitary(d_obs, rng)
    for basis in (dev_basis, obs_basis):
        gram = la.dagger(basis) @ basis
        if np.max(np.abs(gram - np.eye(basis.shape[0]))) > ORTHONORMAL_TOL:
            raise ValueError("pointer vectors are not orthonormal")
    return ChainModel(
        p.dim,
        {pre: i for i, pre in enumerate(prefixes)},
        dev_basis,
        {rec: i for i, rec in enumerate(records)},
        obs_basis,
    )


def _apply(t: np.ndarray, subj: np.ndarray, dev: np.ndarray, obs: np.ndarray) -> np.ndarray:
    """``(subj (x) dev (x) obs)`` acting on the state tensor."""
    return np.einsum("is,dk,ol,skl->ido", subj, dev, obs, t)


def _initial_tensor(model: ChainModel, psi: np.ndarray) -> np.ndarray:
    return np.einsum("s,d,o->sdo", psi, model.dev(()), model.obs(()))


def _initial_vector(p) -> np.ndarray:
    state = p.state
    if state.kind != "pure":
        raise ValueError("the full-chain model needs a pure initial subject state")
    return state.vector


def chain_steps(model: ChainModel, p) -> list[np.ndarray]:
    """State tensors before any measurement and after each of ``A, C_1, ..., C_n, B``."""
    eye_d = la.identity(model.device_dim)
    eye_o = la.identity(model.observer_dim)
    t = _initial_tensor(model, _initial_vector(p))
    steps = [t]

    # observer records A
    t = sum(
        _apply(t, o.projector, eye_d, la.outer(model.obs((o.label,)), model.obs(())))
        for o in p.pre.outcomes
    )
    steps.append(t)

    # device records C_k, extending each recorded prefix
    prefixes = [()]
    for c in p.intermediates:
        new_t = np.zeros_like(t)
        for pre in prefixes:
            for o in c.outcomes:
                hop = la.outer(model.dev(pre + (o.label,)), model.dev(pre))
                new_t = new_t + _apply(t, o.projector, hop, eye_o)
        t = new_t
        prefixes = [pre + (lab,) for pre in prefixes for lab in c.labels]
        steps.append(t)

    # observer records B next to its record of A
    t = sum(
        _apply(t, o.projector, eye_d, la.outer(model.obs((a, o.label)), model.obs((a,))))
        for a in p.pre.labels
        for o in p.post.outcomes
    )
    steps.append(t)
    return steps


def evolve_chain(model: ChainModel, p) -> np.ndarray:
    """Final total state vector (Kronecker order subject, device, observer)."""
    return chain_steps(model, p)[-1].reshape(-1)


def _as_tensor(model: ChainModel, final) -> np.ndarray:
    return np.asarray(final).reshape(model.dims)


def observer_projected(model: ChainModel, final, a, b) -> np.ndarray:
    """``(1 (x) 1 (x) P_obs(a,b)) |final>`` as a state tensor."""
    t = _as_tensor(model, final)
    o = model.obs((a, b))
    return _apply(t, la.identity(model.subject_dim), la.identity(model.device_dim), la.outer(o))


def observer_probability(model: ChainModel, final, a, b) -> float:
    """Born probability that the observer's record reads ``(a, b)``."""
    v = observer_projected(model, final, a, b).reshape(-1)
    return float(np.vdot(v, v).real)


def device_observer_probability(model: ChainModel, final, a, b, seq) -> float:
    """Joint Born probability for observer record ``(a, b)`` and device record ``seq``."""
    t = _as_tensor(model, final)
    v = _apply(
        t,
        la.identity(model.subject_dim),
        la.outer(model.dev(tuple(seq))),
        la.outer(model.obs((a, b))),
    ).reshape(-1)
    return float(np.vdot(v, v).real)


def device_state_given_obs(model: ChainModel, p, a, b, final=None) -> np.ndarray:
    """Device state after conditioning the total state on the observer record ``(a, b)``.

    The conditioned reduced density matrix of the device must be rank one;
    its leading eigenvector (phase-fixed) is returned.
    """
    if final is None:
        final = evolve_chain(model, p)
    a, b = p.pre.outcome(a).label, p.post.outcome(b).label
    projected = observer_projected(model, final, a, b).reshape(-1)
    prob = float(np.vdot(projected, projected).real)
    if prob <= 1e-14:
        raise ValueError(f"observer record ({a}, {b}) has zero probability; cannot condition on it")
    rho_dev = la.reduced_state(projected, model.dims, keep=[1]) / prob
    pairs = la.eigendecompose_self_adjoint(0.5 * (rho_dev + la.dagger(rho_dev)), tol=1e-8)
    if len(pairs) > 1 and pairs[-2].value > PURITY_TOL:
        raise ValueError(f"conditioned device state is not pure (second eigenvalue {pairs[-2].value:.3g})")
    return pairs[-1].vector


def device_sequence_probabilities(model: ChainModel, p, device_state) -> dict[tuple, float]:
    """``|<dev(c_1..c_n)|device_state>|^2`` for every full-length device record."""
    out = {}
    for seq in itertools.product(*(c.labels for c in p.intermediates)):
        amp = np.vdot(model.dev(seq), device_state)
        out[seq] = float(abs(amp) ** 2)
    return out


def oracle_conditional(p, embedding_seed: Optional[int] = None) -> dict[tuple, float]:
    """Conditional probabilities of every intermediate sequence given ``(a, b)``, via the full chain."""
    model = build_model(p, embedding_seed)
    dev_state = device_state_given_obs(model, p, p.pre_label, p.post_label)
    return device_sequence_probabilities(model, p, dev_state)
