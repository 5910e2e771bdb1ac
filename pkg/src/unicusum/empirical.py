"""Empirical pre-change estimate from a warm-up prefix and its deviation machinery."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .alphabet_dist import (Alphabet, Categorical, _as_symbols, draw, kl_divergence,
                            make_rng)
from .errors import DeltaTooLarge, EmptyPrefix, EmptyWindow, SupportMismatch


@dataclass(frozen=True, eq=False)
class EmpiricalEstimate:
    """Symbol counts of the warm-up prefix and the frequency estimate built on them.

    With ``smoothing="add_half"`` every count gets an extra 1/2 before
    normalising; the raw integer counts are kept either way.
    """

    counts: np.ndarray
    smoothing: str = "none"

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64).ravel()
        if np.any(c < 0):
            raise ValueError("counts must be non-negative")
        if c.sum() == 0:
            raise EmptyPrefix("warm-up prefix is empty")
        if self.smoothing not in ("none", "add_half"):
            raise ValueError(f"unknown smoothing {self.smoothing!r}")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @property
    def n0(self) -> int:
        return int(self.counts.sum())

    @property
    def alphabet(self) -> Alphabet:
        return Alphabet(self.counts.size)

    @property
    def full_support(self) -> bool:
        return bool(np.all(self.counts > 0))

    @property
    def mu_hat(self) -> Categorical:
        if self.smoothing == "add_half":
            return Categorical((self.counts + 0.5) / (self.n0 + 0.5 * self.counts.size))
        return Categorical(self.counts / self.n0)

    def to_dict(self) -> dict:
        return {"counts": self.counts.tolist(), "n0": self.n0, "smoothing": self.smoothing}

    @classmethod
    def from_dict(cls, d: dict) -> "EmpiricalEstimate":
        est = cls(d["counts"], d.get("smoothing", "none"))
        if "n0" in d and d["n0"] != est.n0:
            raise ValueError(f"n0={d['n0']} disagrees with counts summing to {est.n0}")
        return est

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "EmpiricalEstimate":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class DeviationEvent:
    delta: float
    holds: bool
    max_deviation: float


def estimate_empirical(prefix, alphabet: Alphabet | int, smoothing: str = "none") -> EmpiricalEstimate:
    k = alphabet.size if isinstance(alphabet, Alphabet) else int(alphabet)
    s = _as_symbols(prefix)
    if s.size == 0:
        raise EmptyPrefix("cannot estimate from an empty prefix")
    return EmpiricalEstimate(np.bincount(s, minlength=k), smoothing)


def check_deviation(est: EmpiricalEstimate, mu0: Categorical, delta: float) -> DeviationEvent:
    """Whether every symbol's estimate lies strictly within ``delta`` of ``mu0``."""
    if est.counts.size != mu0.size:
        raise SupportMismatch("alphabet sizes differ")
    dev = float(np.max(np.abs(est.mu_hat.probs - mu0.probs)))
    return DeviationEvent(delta, dev < delta, dev)


def min_support_prob(mu0: Categorical) -> float:
    return float(mu0.probs[mu0.probs > 0].min())


def beta_bound(mu0: Categorical, delta: float) -> float:
    """Distortion factor ``p_min / (p_min - delta)``, ``p_min`` over the support of ``mu0``."""
    if delta < 0:
        raise ValueError("delta must be non-negative")
    p_min = min_support_prob(mu0)
    if delta >= p_min:
        raise DeltaTooLarge(f"delta={delta} must be below the smallest probability {p_min}")
    return p_min / (p_min - delta)


def log2_beta(mu0: Categorical, delta: float) -> float:
    return math.log2(beta_bound(mu0, delta))


def fn_statistic(mu0: Categorical, est: EmpiricalEstimate | Categorical, seq) -> float:
    """Average per-symbol ``log2(mu0(x) / mu_hat(x))`` over ``seq`` (0 for an empty seq)."""
    mu_hat = est.mu_hat if isinstance(est, EmpiricalEstimate) else est
    s = _as_symbols(seq)
    if s.size == 0:
        return 0.0
    p, q = mu0.probs[s], mu_hat.probs[s]
    if np.any(p == 0) or np.any(q == 0):
        raise SupportMismatch("sequence leaves the common support of mu0 and mu_hat")
    # count-weighted form: one log per distinct symbol
    counts = np.bincount(s, minlength=mu0.size)
    used = counts > 0
    ratio = np.log2(mu0.probs[used]) - np.log2(mu_hat.probs[used])
    return float(np.dot(counts[used], ratio) / s.size)


def lambda_window(mu0: Categorical, mu1: Categorical, est: EmpiricalEstimate | Categorical,
                  delta: float | None = None) -> tuple[float, float]:
    """Admissible open interval for the drift penalty of the empirical test.

    ``lo = max(log2 beta, D(mu0 || mu_hat))`` and ``hi = D(mu1 || mu_hat)``;
    ``delta=None`` takes the ``delta -> 0`` limit where ``log2 beta = 0``.
    """
    mu_hat = est.mu_hat if isinstance(est, EmpiricalEstimate) else est
    lb = 0.0 if not delta else log2_beta(mu0, delta)
    lo = max(lb, kl_divergence(mu0, mu_hat))
    hi = kl_divergence(mu1, mu_hat)
    if lo >= hi:
        raise EmptyWindow(lo, hi)
    return lo, hi


def hoeffding_eps0(k: int, n0: int, delta: float) -> float:
    """Union/Hoeffding bound on the probability that some symbol deviates by ``delta`` or more."""
    return min(1.0, 2.0 * k * math.exp(-2.0 * n0 * delta * delta))


def measure_eps0(mu0: Categorical, n0: int, delta: float, trials: int, seed: int) -> float:
    """Monte Carlo frequency of warm-up prefixes that violate the deviation event."""
    fails = 0
    for i in range(trials):
        rng = make_rng(seed, i)
        est = EmpiricalEstimate(np.bincount(draw(mu0, n0, rng), minlength=mu0.size))
        fails += not check_deviation(est, mu0, delta).holds
    return fails / trials
