"""Closed-form expected search lengths.

Two families of results live here:

* the choose-first PW-RW closed form, which needs only the expected
  simple-RW search length ``lbar`` (``theorem1_length``, ``optimal_s``,
  ``optimal_length``);
* the per-degree model, which needs the degree histogram and covers all
  four mechanisms (``p_resource``, ``pw_probabilities``, ``unified_length``).

``lbar`` is always an input: from a baseline simulation, or from the
approximate length distribution in :func:`rw_length_pmf`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .graph import DegreeStats

__all__ = [
    "ModelInputs",
    "ModelRangeError",
    "Decomposition",
    "theorem1_length",
    "theorem1_decomposition",
    "optimal_s",
    "optimal_length",
    "p_resource",
    "pw_probabilities",
    "unified_length",
    "rw_length_pmf",
    "binomial_expectation_property",
    "VARIANTS",
]

VARIANTS = ("rw", "saw_choose", "saw_check")


class ModelRangeError(ValueError):
    """Parameters outside the range where the per-degree model is defined."""


@dataclass(frozen=True)
class ModelInputs:
    stats: DegreeStats
    s: int
    w: int
    p: float
    lbar: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must be in [0, 1]")
        if self.s < 1 or self.w < 1:
            raise ValueError("s and w must be >= 1")
        if self.lbar <= 0:
            raise ValueError("lbar must be > 0")


# -- choose-first PW-RW closed form ----------------------------------------------


@dataclass(frozen=True)
class Decomposition:
    length: float
    partial_walks: float
    jumps: float
    unnecessary: float
    trailing: float


def theorem1_decomposition(s: int, lbar: float, p: float) -> Decomposition:
    if s < 1:
        raise ValueError("s must be >= 1")
    trailing = (s - 1) / 2
    pw = (lbar - trailing) / s
    jumps = pw * (1 - p)
    unnecessary = pw * p * s
    return Decomposition(jumps + unnecessary + trailing, pw, jumps, unnecessary, trailing)


def theorem1_length(s: int, lbar: float, p: float) -> float:
    """Expected choose-first PW-RW search length with uniformly distributed trailing steps."""
    if s < 1:
        raise ValueError("s must be >= 1")
    return (s / 2 + (2 * lbar + 1) / (2 * s) - 1) * (1 - p) + lbar * p


def optimal_s(lbar: float) -> int:
    """Partial-walk length minimizing :func:`theorem1_length`, rounded half up, at least 1."""
    if lbar <= 0:
        raise ValueError("lbar must be > 0")
    return max(1, math.floor(math.sqrt(2 * lbar + 1) + 0.5))


def optimal_length(lbar: float, p: float) -> float:
    if lbar <= 0:
        raise ValueError("lbar must be > 0")
    return (math.sqrt(2 * lbar + 1) - 1) * (1 - p) + lbar * p


# -- per-degree model -----------------------------------------------------------


def p_resource(k: int, s: int, variant: str, stats: DegreeStats) -> float:
    """Probability that one partial walk registers a given node of degree ``k``."""
    if s < 1:
        raise ValueError("s must be >= 1")
    S, kbar = stats.S, stats.kbar
    if variant == "rw":
        krw = stats.kbar_rw
        hop = k / (S - krw) * (krw - 1) / krw
        if not 0.0 <= hop < 1.0:
            raise ModelRangeError(f"per-hop probability {hop} out of [0, 1)")
        return -math.expm1(s * math.log1p(-hop))
    if variant == "saw_choose":
        ls = np.arange(0, s)
    elif variant == "saw_check":
        ls = np.arange(1, s + 1)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    denom = S - ls * kbar
    if denom[-1] <= k:
        raise ModelRangeError(f"s={s} too large: S - l*kbar <= k for degree {k}")
    return float(-np.expm1(np.log1p(-k / denom).sum()))


def _log_binom_pmf(m: int, q: float, n: np.ndarray) -> np.ndarray:
    n = np.asarray(n, dtype=float)
    out = gammaln(m + 1) - gammaln(n + 1) - gammaln(m - n + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = out + np.where(n > 0, n * np.log(q) if q > 0 else -np.inf, 0.0)
        out = out + np.where(m - n > 0, (m - n) * np.log1p(-q) if q < 1 else -np.inf, 0.0)
    return out


def _pij(w: int, pr: float, p: float) -> np.ndarray:
    """``P[i, j]``: i walks hold the resource, j of the others give false positives."""
    i = np.arange(w + 1)
    P = np.zeros((w + 1, w + 1))
    li = _log_binom_pmf(w, pr, i)
    for a in range(w + 1):
        j = np.arange(w - a + 1)
        P[a, : w - a + 1] = np.exp(li[a] + _log_binom_pmf(w - a, p, j))
    return P


def pw_probabilities(
    k: int, w: int, s: int, p: float, variant: str, policy: str, stats: DegreeStats
) -> tuple[float, float, float]:
    """(true positive, false positive, negative) probabilities of one decision.

    A decision is choosing a partial walk of the current node and querying its
    filter, given the resource sits on a node of degree ``k``.
    """
    if w < 1:
        raise ValueError("w must be >= 1")
    pr = p_resource(k, s, variant, stats)
    P = _pij(w, pr, p)
    i = np.arange(w + 1)[:, None]
    j = np.arange(w + 1)[None, :]
    valid = i + j <= w
    if policy == "choose":
        p_tp = float((P * (i / w))[valid & (i >= 1)].sum())
        p_fp = float((P * (j / w))[valid & (j >= 1)].sum())
        p_n = 1.0 - p_tp - p_fp
    elif policy == "check":
        with np.errstate(invalid="ignore", divide="ignore"):
            frac_i = np.where(i + j > 0, i / np.maximum(i + j, 1), 0.0)
            frac_j = np.where(i + j > 0, j / np.maximum(i + j, 1), 0.0)
        p_tp = float((P * frac_i)[valid & (i >= 1)].sum())
        p_fp = float((P * frac_j)[valid & (j >= 1) & (i <= w - 1)].sum())
        p_n = float(P[0, 0])
    else:
        raise ValueError(f"unknown policy {policy!r}")
    return p_tp, p_fp, p_n


def unified_length(
    stats: DegreeStats, s: int, w: int, p: float, variant: str, policy: str
) -> float:
    """Expected search length averaged over the degree of the resource holder."""
    if s * stats.kbar >= 0.9 * stats.S:
        raise ModelRangeError(f"s={s} outside model range (s*kbar must be < 0.9*S)")
    trail = (s - 1) / 2 if policy == "choose" else s / 2
    total = 0.0
    for k, nk in stats.n_k.items():
        p_tp, p_fp, p_n = pw_probabilities(k, w, s, p, variant, policy, stats)
        if p_tp <= 0.0:
            raise ModelRangeError(f"true-positive probability is 0 for degree {k}")
        total += nk * ((p_n + s * p_fp) / p_tp + trail)
    return total / stats.n


# -- random-walk length distribution, expectation identity ---------------------------


def rw_length_pmf(n: int, max_len: int) -> tuple[np.ndarray, float]:
    """Approximate simple-RW search-length distribution on ``n`` nodes.

    ``P[0] = 1/n`` and ``P[i] = (1 - sum(P[:i])) / (n - 1)``, truncated at
    ``max_len``.  Also returns the truncated mean ``sum(i P[i]) / sum(P)``.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if max_len < 0:
        raise ValueError("max_len must be >= 0")
    P = np.empty(max_len + 1)
    P[0] = 1.0 / n
    acc = P[0]
    for i in range(1, max_len + 1):
        P[i] = (1.0 - acc) / (n - 1)
        acc += P[i]
    mean = float((np.arange(max_len + 1) * P).sum() / P.sum())
    return P, mean


def binomial_expectation_property(
    x_samples, p: float, rng: np.random.Generator
) -> tuple[float, float]:
    """Draw ``Y ~ Binomial(X, p)`` per sample; return ``(mean(Y), mean(X) * p)``."""
    x = np.asarray(x_samples, dtype=np.int64)
    if x.size == 0:
        raise ValueError("x_samples is empty")
    if (x < 0).any():
        raise ValueError("x_samples must be >= 0")
    y = rng.binomial(x, p)
    return float(y.mean()), float(x.mean() * p)
