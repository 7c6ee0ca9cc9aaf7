"""Dense complex linear algebra on small Hilbert spaces.

Operators are ``(dim, dim)`` complex128 numpy arrays and vectors are ``(dim,)``
complex128 arrays. Everything here is a pure function; inputs are never
modified and returned arrays are fresh.

Tensor products use the Kronecker layout of :func:`numpy.kron`: for factors of
dimensions ``d1, d2, ...`` the basis index of ``|i1> (x) |i2> (x) ...`` is
``((i1 * d2) + i2) * d3 + ...`` (the first factor is the most significant
digit). :func:`partial_trace` assumes the same layout.
"""

from __future__ import annotations

from math import prod
from typing import NamedTuple, Sequence

import numpy as np

DEFAULT_TOL = 1e-10
MAX_DIM = 512

# Operator is the working name for a square complex ndarray, Vector for a 1-d one.
Operator = np.ndarray
Vector = np.ndarray


class DimensionError(ValueError):
    """Operand shapes are inconsistent."""


class NotSelfAdjointError(ValueError):
    pass


class EigenPair(NamedTuple):
    value: float
    vector: Vector


def as_operator(x) -> Operator:
    """Coerce ``x`` to a square complex128 array, rejecting anything else."""
    arr = np.asarray(x, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
        raise DimensionError(f"expected a non-empty square matrix, got shape {arr.shape}")
    return arr


def as_vector(x) -> Vector:
    arr = np.asarray(x, dtype=np.complex128)
    if arr.ndim != 1 or arr.shape[0] < 1:
        raise DimensionError(f"expected a non-empty 1-d vector, got shape {arr.shape}")
    return arr


def identity(dim: int) -> Operator:
    return np.eye(dim, dtype=np.complex128)


def dagger(x: Operator) -> Operator:
    return np.conj(np.transpose(x))


def matmul(x, y) -> Operator:
    x, y = as_operator(x), as_operator(y)
    if x.shape != y.shape:
        raise DimensionError(f"dimension mismatch: {x.shape[0]} vs {y.shape[0]}")
    return x @ y


def tensor(*factors) -> Operator:
    """Kronecker product of one or more operators, first factor most significant."""
    if not factors:
        raise DimensionError("tensor needs at least one factor")
    out = as_operator(factors[0])
    for f in factors[1:]:
        out = np.kron(out, as_operator(f))
    return out


def tensor_vectors(*factors) -> Vector:
    if not factors:
        raise DimensionError("tensor_vectors needs at least one factor")
    out = as_vector(factors[0])
    for f in factors[1:]:
        out = np.kron(out, as_vector(f))
    return out


def trace(x) -> complex:
    return complex(np.trace(as_operator(x)))


def outer(v, w=None) -> Operator:
    """``|v><w|``; with one argument the rank-one projector-like ``|v><v|``."""
    v = as_vector(v)
    w = v if w is None else as_vector(w)
    return np.outer(v, np.conj(w))


def norm(v) -> float:
    return float(np.linalg.norm(as_vector(v)))


def _check_dims(total: int, dims: Sequence[int]) -> list[int]:
    dims = [int(d) for d in dims]
    if not dims or any(d < 1 for d in dims):
        raise DimensionError(f"factor dimensions must be positive, got {dims}")
    if prod(dims) != total:
        raise DimensionError(f"factor dimensions {dims} do not multiply to {total}")
    return dims


def _check_keep(keep: Sequence[int], n: int) -> list[int]:
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= n for k in keep):
        raise DimensionError(f"keep indices {keep} out of range for {n} factors")
    return keep


def partial_trace(x, dims: Sequence[int], keep: Sequence[int]) -> Operator:
    """Trace out every factor not listed in ``keep``.

    ``dims`` lists the factor dimensions in Kronecker order. Kept factors stay
    in their original relative order. Keeping nothing returns the 1x1 matrix
    holding the full trace.
    """
    x = as_operator(x)
    dims = _check_dims(x.shape[0], dims)
    keep = _check_keep(keep, len(dims))
    n = len(dims)
    rest = [i for i in range(n) if i not in keep]
    kd = prod(dims[k] for k in keep) if keep else 1
    rd = prod(dims[r] for r in rest) if rest else 1
    t = x.reshape(dims + dims).transpose(keep + rest + [n + k for k in keep] + [n + r for r in rest])
    t = t.reshape(kd, rd, kd, rd)
    return np.einsum("arbr->ab", t)


def reduced_state(psi, dims: Sequence[int], keep: Sequence[int]) -> Operator:
    """Reduced density matrix of the pure state ``psi`` on the kept factors.

    Equivalent to ``partial_trace(outer(psi), dims, keep)`` but never forms the
    full density matrix.
    """
    psi = as_vector(psi)
    dims = _check_dims(psi.shape[0], dims)
    keep = _check_keep(keep, len(dims))
    rest = [i for i in range(len(dims)) if i not in keep]
    t = np.transpose(psi.reshape(dims), keep + rest)
    kd = prod(dims[k] for k in keep) if keep else 1
    m = t.reshape(kd, -1)
    return m @ dagger(m)


def is_self_adjoint(x, tol: float = DEFAULT_TOL) -> bool:
    x = as_operator(x)
    return bool(np.max(np.abs(x - dagger(x))) <= tol)


def is_positive_semidefinite(x, tol: float = DEFAULT_TOL) -> bool:
    x = as_operator(x)
    if not is_self_adjoint(x, tol):
        return False
    return bool(np.min(np.linalg.eigvalsh(x)) >= -tol)


def is_projector(x, tol: float = DEFAULT_TOL) -> bool:
    x = as_operator(x)
    return is_self_adjoint(x, tol) and bool(np.max(np.abs(x @ x - x)) <= tol)


def is_unit_trace(x, tol: float = DEFAULT_TOL) -> bool:
    return abs(trace(x) - 1.0) <= tol


def fix_phase(v, tol: float = DEFAULT_TOL) -> Vector:
    """Rotate ``v`` so its first component of magnitude > ``tol`` is real and positive."""
    v = as_vector(v)
    big = np.flatnonzero(np.abs(v) > tol)
    if big.size == 0:
        return v.copy()
    c = v[big[0]]
    return v * (abs(c) / c)


def eigendecompose_self_adjoint(x, tol: float = DEFAULT_TOL) -> list[EigenPair]:
    """Eigenpairs of a self-adjoint operator, eigenvalues ascending.

    Each eigenvector is normalised and phase-fixed with :func:`fix_phase`.
    Degenerate eigenvalues are allowed; use :func:`degenerate_groups` to find
    them.
    """
    x = as_operator(x)
    if x.shape[0] > MAX_DIM:
        raise DimensionError(f"dimension {x.shape[0]} exceeds supported maximum {MAX_DIM}")
    if not is_self_adjoint(x, tol):
        raise NotSelfAdjointError("operator is not self-adjoint within tolerance")
    h = 0.5 * (x + dagger(x))
    try:
        values, vectors = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"eigendecomposition failed to converge: {exc}") from exc
    return [EigenPair(float(values[k]), fix_phase(vectors[:, k], tol)) for k in range(len(values))]


def degenerate_groups(pairs: Sequence[EigenPair], tol: float) -> list[list[int]]:
    """Group indices of ascending eigenpairs whose eigenvalues chain within ``tol``."""
    groups: list[list[int]] = []
    for k, pair in enumerate(pairs):
        if groups and abs(pair.value - pairs[groups[-1][-1]].value) <= tol:
            groups[-1].append(k)
        else:
            groups.append([k])
    return groups


def has_degeneracy(pairs: Sequence[EigenPair], tol: float = 1e-8) -> bool:
    return any(len(g) > 1 for g in degenerate_groups(pairs, tol))


# -- plain-text matrix blocks ------------------------------------------------


def format_complex(z: complex) -> str:
    """``re+imi`` token with shortest round-trip float reprs, e.g. ``0.5-1.0i``."""
    z = complex(z)
    re, im = float(z.real), float(z.imag)
    if re == 0.0:
        re = 0.0
    if im == 0.0:
        im = 0.0
    im_s = repr(im)
    if not im_s.startswith("-"):
        im_s = "+" + im_s
    return f"{re!r}{im_s}i"


def parse_complex(token: str) -> complex:
    tok = token.strip()
    if not tok:
        raise ValueError("empty complex token")
    if tok.endswith("i") or tok.endswith("j"):
        tok = tok[:-1] + "j"
        if tok in ("j", "+j", "-j"):
            tok = tok[:-1] + "1j"
    return complex(tok)


def format_matrix(x) -> str:
    """Serialise an operator as ``dim`` followed by ``dim`` rows of tokens."""
    x = as_operator(x)
    lines = [str(x.shape[0])]
    lines += [" ".join(format_complex(z) for z in row) for row in x]
    return "\n".join(lines) + "\n"


def parse_matrix(text: str) -> Operator:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty matrix block")
    dim = int(lines[0])
    rows = lines[1:]
    if dim < 1 or len(rows) != dim:
        raise ValueError(f"matrix block declares dim {dim} but has {len(rows)} rows")
    out = np.empty((dim, dim), dtype=np.complex128)
    for i, row in enumerate(rows):
        toks = row.split()
        if len(toks) != dim:
            raise ValueError(f"row {i} has {len(toks)} entries, expected {dim}")
        out[i] = [parse_complex(t) for t in toks]
    return out


def format_vector(v) -> str:
    """Serialise a vector as ``dim`` followed by a single row of tokens."""
    v = as_vector(v)
    return f"{v.shape[0]}\n" + " ".join(format_complex(z) for z in v) + "\n"


def parse_vector(text: str) -> Vector:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty vector block")
    dim = int(lines[0])
    toks = " ".join(lines[1:]).split()
    if dim < 1 or len(toks) != dim:
        raise ValueError(f"vector block declares dim {dim} but has {len(toks)} entries")
    return np.array([parse_complex(t) for t in toks], dtype=np.complex128)
