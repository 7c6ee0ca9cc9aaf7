"""Monte Carlo ensembles: sample every trial, then cull on the pre/post outcomes.

Trial ``i`` of a run with seed ``s`` draws its uniforms from substream
``(s, i)``; measurement ``k`` of the trial (``A`` is 0, ``B`` is ``n + 1``)
always uses counter ``k``. Counts therefore do not depend on chunking, worker
count or execution order.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import ablengine, qcore
from .ablengine import ImpossiblePostSelection, OutcomeSequence, Protocol
from .randomstream import RandomStream, stream, uniforms

DEFAULT_N = 10_000
DEFAULT_CHUNK = 4096
CI_SIGMAS = 3.0


class _Undefined:
    """Marker for a ratio whose denominator is zero (nothing survived culling)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "undefined"

    def __bool__(self):
        return False


UNDEFINED = _Undefined()
Ratio = Union[float, _Undefined]


@dataclass(frozen=True)
class TrialRecord:
    trial_index: int
    outcomes: tuple[str, ...]


def protocol_key(p: Protocol) -> str:
    """Fingerprint of the protocol's observables, selected outcomes and initial state."""
    h = hashlib.sha256()
    for obs in p.observables:
        h.update(obs.name.encode())
        h.update("|".join(obs.labels).encode())
        h.update(np.ascontiguousarray(obs.operator).tobytes())
    h.update(f"{p.pre_label}->{p.post_label}".encode())
    h.update(np.ascontiguousarray(p.state.density_matrix()).tobytes())
    return h.hexdigest()[:16]


def run_trial(p: Protocol, rng: RandomStream) -> TrialRecord:
    """Prepare the initial state and measure ``A, C_1, ..., C_n, B`` with collapse."""
    state = p.state
    labels = []
    for obs in p.observables:
        label, state = qcore.measure_sample(state, obs, rng)
        labels.append(label)
    return TrialRecord(rng.trial_index, tuple(labels))


def _sample_chunk(p: Protocol, seed: int, start: int, stop: int) -> np.ndarray:
    """Outcome indices, shape ``(stop - start, n + 2)``, for a block of trials."""
    idx = np.arange(start, stop, dtype=np.int64)
    m = len(idx)
    st = p.state
    pure = st.kind == "pure"
    if pure:
        states = np.broadcast_to(st.vector, (m, st.dim)).copy()
    else:
        states = np.broadcast_to(st.density, (m, st.dim, st.dim)).copy()
    out = np.empty((m, p.n + 2), dtype=np.int64)
    for k, obs in enumerate(p.observables):
        projs = obs.projectors
        probs = qcore.pure_probabilities(states, projs) if pure else qcore.mixed_probabilities(states, projs)
        u = uniforms(seed, idx, k)
        choice = qcore.inverse_cdf(probs, u)
        out[:, k] = choice
        if k < p.n + 1:
            if pure:
                states = qcore.collapse_pure_rows(states, projs, choice, probs)
            else:
                states = qcore.collapse_mixed_rows(states, projs, choice, probs)
    return out


def _sample_loop(p: Protocol, seed: int, start: int, stop: int) -> np.ndarray:
    out = np.empty((stop - start, p.n + 2), dtype=np.int64)
    for row, i in enumerate(range(start, stop)):
        rec = run_trial(p, stream(seed, i))
        out[row] = [obs.index_of(lab) for obs, lab in zip(p.observables, rec.outcomes)]
    return out


def sample_outcomes(
    p: Protocol,
    n: int,
    seed: int,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK,
    method: str = "batch",
) -> np.ndarray:
    """Outcome-index matrix for trials ``0 .. n-1``.

    ``method="loop"`` runs :func:`run_trial` one trial at a time;
    ``method="batch"`` vectorises over trials. ``workers > 1`` spreads chunks
    over a thread pool; the chunks are reassembled in trial order.
    """
    if n < 1:
        raise ValueError("need at least one trial")
    sampler = {"batch": _sample_chunk, "loop": _sample_loop}[method]
    bounds = [(s, min(s + chunk_size, n)) for s in range(0, n, chunk_size)]
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: sampler(p, seed, *b), bounds))
    else:
        parts = [sampler(p, seed, *b) for b in bounds]
    return np.concatenate(parts, axis=0)


@dataclass
class EnsembleStats:
    """Counts from one simulated ensemble.

    ``seq_counts[seq]`` is ``N_{a seq b}``; ``marginal_counts[seq]`` counts
    ``a`` then ``seq`` whatever the final outcome. With ``postselect`` the
    reported ratio is ``N_{a seq b} / N_ab``, otherwise ``N_{a seq b} / N_a``.
    """

    protocol_key: str
    seed: int
    n_total: int
    n_pre: int
    n_selected: int
    seq_counts: dict[OutcomeSequence, int]
    marginal_counts: dict[OutcomeSequence, int]
    postselect: bool = True
    pre_label: str = ""
    post_label: str = ""
    sequences: list[OutcomeSequence] = field(default_factory=list)

    @property
    def denominator(self) -> int:
        return self.n_selected if self.postselect else self.n_pre

    def ratio(self, seq) -> Ratio:
        seq = tuple(seq)
        if self.denominator == 0:
            return UNDEFINED
        return self.seq_counts[seq] / self.denominator

    def ratios(self) -> dict[OutcomeSequence, Ratio]:
        return {s: self.ratio(s) for s in self.sequences}

    def marginal_ratio(self, seq) -> Ratio:
        if self.n_pre == 0:
            return UNDEFINED
        return self.marginal_counts[tuple(seq)] / self.n_pre


def tally(p: Protocol, outcomes: np.ndarray, seed: int, postselect: bool = True) -> EnsembleStats:
    """Fold an outcome-index matrix into counts, in trial order."""
    ia = p.pre.index_of(p.pre_label)
    ib = p.post.index_of(p.post_label)
    pre_ok = outcomes[:, 0] == ia
    sel = pre_ok & (outcomes[:, -1] == ib)
    seqs = list(ablengine.all_sequences(p))
    # mixed-radix code of each intermediate sequence, matching all_sequences order
    radices = [len(c.outcomes) for c in p.intermediates]
    codes = np.zeros(len(outcomes), dtype=np.int64)
    for col, r in enumerate(radices, start=1):
        codes = codes * r + outcomes[:, col]
    n_seq = len(seqs)
    sel_counts = np.bincount(codes[sel], minlength=n_seq)
    pre_counts = np.bincount(codes[pre_ok], minlength=n_seq)
    return EnsembleStats(
        protocol_key=protocol_key(p),
        seed=int(seed),
        n_total=int(len(outcomes)),
        n_pre=int(pre_ok.sum()),
        n_selected=int(sel.sum()),
        seq_counts={s: int(sel_counts[i]) for i, s in enumerate(seqs)},
        marginal_counts={s: int(pre_counts[i]) for i, s in enumerate(seqs)},
        postselect=postselect,
        pre_label=p.pre_label,
        post_label=p.post_label,
        sequences=seqs,
    )


def run_ensemble(
    p: Protocol,
    n: int = DEFAULT_N,
    seed: int = 0,
    postselect: bool = True,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK,
    method: str = "batch",
) -> EnsembleStats:
    """Simulate ``n`` trials and cull to those showing ``a`` first and ``b`` last.

    Culled trials are discarded, never reweighted. If no trial survives, the
    ratios come back as :data:`UNDEFINED`.
    """
    outcomes = sample_outcomes(p, n, seed, workers=workers, chunk_size=chunk_size, method=method)
    return tally(p, outcomes, seed, postselect)


# -- comparison with the closed form -----------------------------------------


@dataclass
class ComparisonRow:
    labels: OutcomeSequence
    count: int
    ratio: Ratio
    exact: Optional[float]
    deviation: Optional[float]
    ci_pass: Optional[bool]

    def to_dict(self) -> dict:
        def j(x):
            return "undefined" if x is UNDEFINED else ("n/a" if x is None else x)

        return {
            "labels": list(self.labels),
            "count": self.count,
            "ratio": j(self.ratio),
            "exact": j(self.exact),
            "deviation": j(self.deviation),
            "ci_pass": j(self.ci_pass),
        }


def ci_pass(ratio: float, exact: float, n: int, sigmas: float = CI_SIGMAS) -> bool:
    """``|ratio - exact|`` within ``sigmas`` binomial standard errors of ``exact``."""
    sd = math.sqrt(max(exact * (1.0 - exact), 0.0) / n)
    return abs(ratio - exact) <= sigmas * sd + 1e-12


def compare_mc_exact(stats: EnsembleStats, p: Protocol) -> list[ComparisonRow]:
    if stats.protocol_key != protocol_key(p):
        raise ValueError("ensemble statistics were not produced from this protocol")
    try:
        exact = ablengine.abl_distribution(p) if stats.postselect else ablengine.abl_weights(p)
    except ImpossiblePostSelection:
        exact = None
    rows = []
    for seq in stats.sequences:
        r = stats.ratio(seq)
        e = None if exact is None else exact[seq]
        if r is UNDEFINED or e is None:
            rows.append(ComparisonRow(seq, stats.seq_counts[seq], r, e, None, None))
            continue
        rows.append(ComparisonRow(seq, stats.seq_counts[seq], r, e, abs(r - e), ci_pass(r, e, stats.denominator)))
    return rows


def report_dict(stats: EnsembleStats, p: Protocol) -> dict:
    rows = compare_mc_exact(stats, p)
    marginal_exact = ablengine.marginal_distribution(p)
    marginal_rows = []
    for seq in stats.sequences:
        r = stats.marginal_ratio(seq)
        marginal_rows.append(
            {
                "labels": list(seq),
                "count": stats.marginal_counts[seq],
                "ratio": "undefined" if r is UNDEFINED else r,
                "exact": marginal_exact[seq],
            }
        )
    return {
        "schema": 1,
        "protocol": p.describe(),
        "seed": stats.seed,
        "postselect": stats.postselect,
        "n_total": stats.n_total,
        "n_pre": stats.n_pre,
        "n_selected": stats.n_selected if stats.postselect else stats.n_pre,
        "n_pre_and_post": stats.n_selected,
        "rows": [r.to_dict() for r in rows],
        "marginal_rows": marginal_rows,
        "flags": {"post_selected": stats.postselect, "ensemble_level": True},
    }


def report_json(stats: EnsembleStats, p: Protocol) -> str:
    return json.dumps(report_dict(stats, p), indent=2) + "\n"


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.6f}"
    return str(x)


def report_text(stats: EnsembleStats, p: Protocol) -> str:
    d = report_dict(stats, p)
    denom = "N_ab" if stats.postselect else "N_a"
    lines = [
        f"protocol   {d['protocol']}",
        f"seed       {stats.seed}",
        f"N          {stats.n_total}",
        f"N_a        {stats.n_pre}",
        f"N_ab       {stats.n_selected}",
        f"ratios     N_(a seq b) / {denom}" + ("" if stats.postselect else "   [no post-selection]"),
        "",
    ]
    header = ["sequence", "count", "ratio", "exact", "deviation", "ci_pass"]
    table = [[",".join(r["labels"]) or "()", r["count"], r["ratio"], r["exact"], r["deviation"], r["ci_pass"]] for r in d["rows"]]
    lines += _align([header] + [[_fmt(c) for c in row] for row in table])
    lines.append("")
    lines.append("intermediate marginals N_(a seq) / N_a (final outcome ignored):")
    mt = [[",".join(r["labels"]) or "()", r["count"], r["ratio"], r["exact"]] for r in d["marginal_rows"]]
    lines += _align([["sequence", "count", "ratio", "exact"]] + [[_fmt(c) for c in row] for row in mt])
    return "\n".join(lines) + "\n"


def _align(rows: list[list[str]]) -> list[str]:
    widths = [max(len(str(r[i])) for r in rows) for i in range(len(rows[0]))]
    return ["  ".join(str(c).ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
