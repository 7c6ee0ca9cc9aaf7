"""Classical post-selection artefacts: Berkson's paradox, darkening coins,
the shutter and the three boxes.

Every report carries ``post_selected`` and ``ensemble_level`` flags. Ratios
over an empty selection are :data:`~abl_lab.ensemble.UNDEFINED`.

Modelling choices the stories leave open:

* coins darken additively by ``darken_per_tail`` per tails and are selected
  once, after the last flip, if their darkness reaches the threshold;
* the stone is aimed at a uniformly random hole, independent of the uniformly
  random covered hole, and a blocked stone clangs with probability
  ``clang_prob_if_blocked`` (default 1).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Union

import numpy as np
from scipy.stats import binom

from .ensemble import UNDEFINED, Ratio
from .randomstream import uniforms

Number = Union[float, Fraction]


def _flags(post_selected: bool = True, **extra) -> dict:
    return {"post_selected": post_selected, "ensemble_level": True, **extra}


def _ratio(num: int, den: int) -> Ratio:
    return UNDEFINED if den == 0 else num / den


def _jsonable(d: dict) -> dict:
    out = {}
    for k, v in d.items():
        if v is UNDEFINED:
            v = "undefined"
        elif isinstance(v, Fraction):
            v = float(v)
        elif isinstance(v, dict):
            v = _jsonable(v)
        out[k] = v
    return out


def _draws(seed: int, n_trials: int, n_draws: int) -> np.ndarray:
    """``(n_trials, n_draws)`` uniforms, row ``i`` from substream ``(seed, i)``."""
    idx = np.arange(n_trials, dtype=np.int64)[:, None]
    ctr = np.arange(n_draws, dtype=np.int64)[None, :]
    return uniforms(seed, idx, ctr)


def _within(est: Ratio, exact: float, n: int, sigmas: float = 3.0) -> bool:
    if est is UNDEFINED or n == 0:
        return False
    sd = math.sqrt(max(exact * (1 - exact), 0.0) / n)
    return abs(est - exact) <= sigmas * sd + 1e-12


# -- Berkson's paradox ---------------------------------------------------------


@dataclass(frozen=True)
class BerksonParams:
    p_A: Number
    p_B: Number
    N: int = 10_000

    def __post_init__(self):
        for name in ("p_A", "p_B"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    @property
    def p_AB(self) -> Number:
        return self.p_A * self.p_B


@dataclass
class BerksonResult:
    frac_A: Ratio
    frac_B: Ratio
    frac_AB: Ratio
    independence_gap: Ratio
    counts: dict = field(default_factory=dict)
    flags: dict = field(default_factory=_flags)

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


def berkson_exact(params: BerksonParams) -> BerksonResult:
    """Fractions with A, with B and with both among those showing the symptom.

    Exact rational arithmetic when the probabilities are ``Fraction``s.
    """
    p_a, p_b, p_ab = params.p_A, params.p_B, params.p_AB
    p_s = p_a + p_b - p_ab
    if p_s == 0:
        raise ValueError("symptom probability p_A + p_B - p_AB is zero; nothing to post-select")
    fa, fb, fab = p_a / p_s, p_b / p_s, p_ab / p_s
    return BerksonResult(fa, fb, fab, fab - fa * fb, counts={"p_S": p_s})


def berkson_mc(params: BerksonParams, seed: int) -> BerksonResult:
    """Sample ``N`` people with independent conditions and keep those with the symptom."""
    u = _draws(seed, params.N, 2)
    has_a = u[:, 0] < float(params.p_A)
    has_b = u[:, 1] < float(params.p_B)
    sym = has_a | has_b
    n_a, n_b, n_ab, n_s = int(has_a.sum()), int(has_b.sum()), int((has_a & has_b).sum()), int(sym.sum())
    fa, fb, fab = _ratio(n_a, n_s), _ratio(n_b, n_s), _ratio(n_ab, n_s)
    gap = UNDEFINED if n_s == 0 else fab - fa * fb
    counts = {"N": params.N, "N_A": n_a, "N_B": n_b, "N_AB": n_ab, "N_S": n_s}
    return BerksonResult(fa, fb, fab, gap, counts=counts)


def berkson_agrees(mc: BerksonResult, exact: BerksonResult) -> bool:
    """All three selected fractions within 3 binomial standard errors."""
    n_s = mc.counts["N_S"]
    return all(
        _within(getattr(mc, k), float(getattr(exact, k)), n_s) for k in ("frac_A", "frac_B", "frac_AB")
    )


# -- darkening coins ------------------------------------------------------------


@dataclass(frozen=True)
class CoinParams:
    n_flips: int = 100
    darken_per_tail: float = 0.01
    darkness_threshold: float = 0.70
    # P(at least 70 tails in 100 fair flips) is about 4e-5
    N: int = 1_000_000
    p_heads: float = 0.5

    def __post_init__(self):
        if not 0 <= self.darken_per_tail <= 1:
            raise ValueError("darken_per_tail must lie in [0, 1]")
        if self.darkness_threshold < 0:
            raise ValueError("darkness_threshold must be non-negative")
        if self.n_flips < 1 or self.N < 1:
            raise ValueError("n_flips and N must be positive")

    def min_tails(self) -> float:
        """Smallest tails count whose darkness reaches the threshold (may exceed ``n_flips``)."""
        if self.darkness_threshold <= 0:
            return 0
        if self.darken_per_tail == 0:
            return math.inf
        # tolerance so that 70 * 0.01 counts as reaching 0.70
        return math.ceil(self.darkness_threshold / self.darken_per_tail - 1e-9)


@dataclass
class CoinResult:
    selected_fraction: float
    heads_frequency_in_selected: Ratio
    n_selected: int
    flags: dict = field(default_factory=_flags)

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


def coin_darkening_exact(params: CoinParams) -> CoinResult:
    """Binomial closed form for the selected fraction and the selected heads rate."""
    n, q = params.n_flips, 1 - params.p_heads
    t_min = params.min_tails()
    tails = np.arange(n + 1)
    pmf = binom.pmf(tails, n, q)
    keep = tails >= t_min
    sel = float(pmf[keep].sum())
    if sel == 0.0:
        return CoinResult(0.0, UNDEFINED, 0)
    heads_rate = float((pmf[keep] * (n - tails[keep])).sum() / (n * sel))
    return CoinResult(sel, heads_rate, int(round(sel * params.N)))


def coin_darkening_mc(params: CoinParams, seed: int) -> CoinResult:
    """Toss each coin ``n_flips`` times; keep coins at least ``darkness_threshold`` dark.

    Only the tails count of a coin's path affects its darkness, so each trial
    draws that count directly by binomial inverse CDF from one uniform.
    """
    u = _draws(seed, params.N, 1)[:, 0]
    n_tails = binom.ppf(u, params.n_flips, 1 - params.p_heads).astype(np.int64)
    n_heads = params.n_flips - n_tails
    selected = n_tails >= params.min_tails()
    k = int(selected.sum())
    freq = _ratio(int(n_heads[selected].sum()), k * params.n_flips)
    return CoinResult(k / params.N, freq, k)


# -- stones, holes and a shutter ------------------------------------------------


@dataclass
class ShutterResult:
    blocked_fraction_in_selected: Ratio
    blocked_fraction_all: float
    n_selected: int
    flags: dict = field(default_factory=_flags)

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


def shutter_mc(n_holes: int, clang_prob_if_blocked: float = 1.0, N: int = 10_000, seed: int = 0) -> ShutterResult:
    """One random hole covered per trial, stone aimed at a random hole; keep the clangs."""
    if n_holes < 1:
        raise ValueError("need at least one hole")
    if not 0 <= clang_prob_if_blocked <= 1:
        raise ValueError("clang_prob_if_blocked must lie in [0, 1]")
    u = _draws(seed, N, 3)
    covered = np.minimum((u[:, 0] * n_holes).astype(np.int64), n_holes - 1)
    aimed = np.minimum((u[:, 1] * n_holes).astype(np.int64), n_holes - 1)
    blocked = covered == aimed
    clang = blocked & (u[:, 2] < clang_prob_if_blocked)
    k = int(clang.sum())
    return ShutterResult(
        _ratio(int((blocked & clang).sum()), k),
        float(blocked.mean()),
        k,
        flags=_flags(single_system_inference_invalid=True),
    )


# -- three boxes -----------------------------------------------------------------


@dataclass
class BoxesResult:
    p_box1_given_checked1_green: Ratio
    p_box2_given_checked2_green: Ratio
    p_box1_unconditioned: float
    n_checked1_green: int
    n_checked2_green: int
    flags: dict = field(default_factory=lambda: _flags(distinct_ensembles=True))

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


def three_boxes_mc(N: int = 10_000, seed: int = 0) -> BoxesResult:
    """The object sits in a random box; the machine checks box 1 or box 2 at even odds.

    The two conditional probabilities come from two different selected
    sub-ensembles and must not be combined.
    """
    if N < 1:
        raise ValueError("need at least one trial")
    u = _draws(seed, N, 2)
    box = np.minimum((u[:, 0] * 3).astype(np.int64), 2) + 1
    checked = np.where(u[:, 1] < 0.5, 1, 2)
    green = box == checked
    sel1 = (checked == 1) & green
    sel2 = (checked == 2) & green
    n1, n2 = int(sel1.sum()), int(sel2.sum())
    return BoxesResult(
        _ratio(int((box[sel1] == 1).sum()), n1),
        _ratio(int((box[sel2] == 2).sum()), n2),
        float((box == 1).mean()),
        n1,
        n2,
    )
