"""Online CUSUM-type change detectors over finite alphabets.

Three modes share one state machine:

``page``
    classical CUSUM with known pre- and post-change distributions, run as the
    ``W = max(0, W + llr - lam)`` recursion;
``jbpage``
    post-change likelihood replaced by a KT universal code, reference is the
    true pre-change distribution;
``empirical``
    same as ``jbpage`` but the reference is the frequency estimate from a
    warm-up prefix.

For the universal modes the statistic at time ``n`` is the maximum over
retained candidate starts ``k`` of ``-L(y_k..y_n) - log2 ref(y_k..y_n) - pen``
with ``pen = (n - k + 1) * lam`` (``penalty="window"``) or ``n * lam``
(``penalty="absolute_n"``).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .alphabet_dist import Categorical, _as_symbols, kl_divergence
from .empirical import EmpiricalEstimate, lambda_window
from .errors import (EmptyWindow, LambdaOutsideWindow, SupportMismatch, ValidationError,
                     ZeroReferenceProb)
from .universal_code import KTCoder

MODES = ("page", "jbpage", "empirical")
PENALTIES = ("window", "absolute_n")


def threshold_from_gamma(gamma: float) -> float:
    if not gamma > 1:
        raise ValidationError("gamma", f"must be > 1, got {gamma}")
    return math.log2(gamma)


def threshold_from_alpha(alpha: float) -> float:
    if not 0 < alpha < 1:
        raise ValidationError("alpha", f"must lie in (0, 1), got {alpha}")
    return -math.log2(alpha)


@dataclass(frozen=True)
class DetectorConfig:
    """Parameters of one detector.

    ``threshold`` is in bits: ``log2 gamma`` for the CUSUM tests, ``-log2 alpha``
    for the auxiliary one-sided tests.  ``reference`` is the pre-change
    distribution (true or estimated); ``post`` is only used by ``page``.
    """

    mode: str
    reference: Categorical
    threshold: float
    lam: float = 0.0
    post: Optional[Categorical] = None
    penalty: str = "window"
    max_starts: Optional[int] = None
    slack: Optional[float] = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError("mode", f"expected one of {MODES}, got {self.mode!r}")
        if self.penalty not in PENALTIES:
            raise ValidationError("penalty", f"expected one of {PENALTIES}, got {self.penalty!r}")
        if not self.threshold > 0:
            raise ValidationError("threshold", "must be > 0 (gamma > 1, alpha < 1)")
        if self.mode == "page" and self.post is None:
            raise ValidationError("post", "page mode needs the post-change distribution")
        if self.post is not None and self.post.size != self.reference.size:
            raise ValidationError("post", "alphabet size differs from reference")
        if self.max_starts is not None and self.max_starts < 1:
            raise ValidationError("max_starts", "must be >= 1")

    @property
    def k(self) -> int:
        return self.reference.size

    @property
    def prune_slack(self) -> float:
        return 2.0 * self.threshold if self.slack is None else self.slack

    @classmethod
    def with_gamma(cls, mode, reference, gamma, **kw) -> "DetectorConfig":
        return cls(mode, reference, threshold_from_gamma(gamma), **kw)

    @classmethod
    def with_alpha(cls, mode, reference, alpha, **kw) -> "DetectorConfig":
        return cls(mode, reference, threshold_from_alpha(alpha), **kw)


@dataclass
class StopReport:
    stopped: bool
    stop_time: Optional[int]
    n: int
    statistic: float
    statistic_trace: Optional[np.ndarray] = None

    def to_dict(self) -> dict:
        d = {"stopped": self.stopped, "stop_time": self.stop_time, "n": self.n,
             "statistic": self.statistic}
        return d


@dataclass
class DetectorState:
    """Running state of one detector.

    Universal modes keep, per retained start, the KT counts of the window, its
    accumulated code length and the accumulated ``-log2 ref`` of the window.
    """

    k: int
    n: int = 0
    statistic: float = -math.inf
    stopped: bool = False
    stop_time: Optional[int] = None
    w: float = 0.0
    starts: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    counts: np.ndarray = None
    code_len: np.ndarray = field(default_factory=lambda: np.zeros(0))
    neg_log_ref: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        if self.counts is None:
            self.counts = np.zeros((0, self.k), dtype=np.int64)

    @property
    def active_starts(self) -> int:
        return int(self.starts.size)


def _check_symbol(symbol: int, k: int) -> int:
    symbol = int(symbol)
    if not 0 <= symbol < k:
        raise ValidationError("symbol", f"{symbol} outside alphabet of size {k}")
    return symbol


def _mark(state: DetectorState, threshold: float) -> DetectorState:
    if not state.stopped and state.statistic >= threshold:
        state.stopped = True
        state.stop_time = state.n
    return state


def page_llr(mu0: Categorical, mu1: Categorical, symbol: int) -> float:
    p0, p1 = mu0.probs[symbol], mu1.probs[symbol]
    if p0 == 0 and p1 == 0:
        raise SupportMismatch(f"symbol {symbol} has zero probability under both distributions")
    if p0 == 0:
        return math.inf
    if p1 == 0:
        return -math.inf
    return math.log2(p1) - math.log2(p0)


def page_step(state: DetectorState, symbol: int, mu0: Categorical, mu1: Categorical,
              threshold: float, lam: float = 0.0) -> DetectorState:
    """One step of ``W_n = max(0, W_{n-1} + llr(x_n) - lam)``."""
    symbol = _check_symbol(symbol, state.k)
    llr = page_llr(mu0, mu1, symbol)
    state.n += 1
    state.w = max(0.0, state.w + llr - lam)
    state.statistic = state.w
    return _mark(state, threshold)


def _prune(state: DetectorState, cfg: DetectorConfig, terms: np.ndarray) -> None:
    # heuristic cap: drop the oldest starts that trail the best by more than slack
    excess = state.active_starts - cfg.max_starts
    if excess <= 0:
        return
    droppable = np.flatnonzero(terms < state.statistic - cfg.prune_slack)[:excess]
    if droppable.size == 0:
        return
    keep = np.ones(state.active_starts, dtype=bool)
    keep[droppable] = False
    state.starts = state.starts[keep]
    state.counts = state.counts[keep]
    state.code_len = state.code_len[keep]
    state.neg_log_ref = state.neg_log_ref[keep]


def universal_step(state: DetectorState, symbol: int, cfg: DetectorConfig) -> DetectorState:
    """Open a start at the current time, extend every retained start by ``symbol``
    and recompute the max statistic."""
    symbol = _check_symbol(symbol, state.k)
    p = cfg.reference.probs[symbol]
    if p == 0:
        raise ZeroReferenceProb(
            f"symbol {symbol} has zero reference probability; enlarge the warm-up "
            "or enable add_half smoothing")
    state.n += 1
    n = state.n
    state.starts = np.append(state.starts, n)
    state.counts = np.vstack([state.counts, np.zeros((1, state.k), dtype=np.int64)])
    state.code_len = np.append(state.code_len, 0.0)
    state.neg_log_ref = np.append(state.neg_log_ref, 0.0)

    seen = n - state.starts
    c = state.counts[:, symbol]
    state.code_len += np.log2(seen + 0.5 * state.k) - np.log2(c + 0.5)
    state.counts[:, symbol] += 1
    state.neg_log_ref -= math.log2(p)
    if cfg.penalty == "window":
        pen = (seen + 1) * cfg.lam
    else:
        pen = n * cfg.lam
    terms = state.neg_log_ref - state.code_len - pen
    state.statistic = float(terms.max())
    _mark(state, cfg.threshold)
    if cfg.max_starts is not None:
        _prune(state, cfg, terms)
    return state


class Detector:
    """Sequential detector fed one symbol at a time.

    >>> from unicusum.alphabet_dist import Categorical
    >>> cfg = DetectorConfig("jbpage", Categorical([0.5, 0.5]), threshold=3.0, lam=0.2)
    >>> d = Detector(cfg)
    >>> round(d.update(0), 6)
    -0.2
    """

    def __init__(self, config: DetectorConfig):
        self.config = config
        self.state = DetectorState(config.k)

    def update(self, symbol: int) -> float:
        cfg = self.config
        if cfg.mode == "page":
            page_step(self.state, symbol, cfg.reference, cfg.post, cfg.threshold, cfg.lam)
        else:
            universal_step(self.state, symbol, cfg)
        return self.state.statistic

    @property
    def stopped(self) -> bool:
        return self.state.stopped

    def run(self, stream, trace: bool = False, stop_on_alarm: bool = True) -> StopReport:
        values = []
        for x in _as_symbols(stream):
            values.append(self.update(x))
            if stop_on_alarm and self.state.stopped:
                break
        s = self.state
        return StopReport(s.stopped, s.stop_time, s.n, s.statistic,
                          np.array(values) if trace else None)


def brute_force_statistic(prefix, config: DetectorConfig) -> float:
    """Max statistic recomputed from scratch over every start ``k <= n``.

    Each window's code length comes from the closed-form KT expression on its
    symbol counts, not from the incremental update used online.  Page mode
    includes the empty window (value 0), which is what the ``max(0, .)``
    recursion tracks.
    """
    s = _as_symbols(prefix)
    n = s.size
    if n == 0:
        return -math.inf
    cfg = config
    kk = cfg.k
    onehot = np.zeros((n + 1, kk), dtype=np.int64)
    onehot[np.arange(1, n + 1), s] = 1
    cum = np.cumsum(onehot, axis=0)
    window_counts = cum[n][None, :] - cum[:n]          # row k-1 holds counts of y_k..y_n
    lengths = n - np.arange(n)
    if cfg.mode == "page":
        llr = np.array([page_llr(cfg.reference, cfg.post, a) if np.any(s == a) else 0.0
                        for a in range(kk)])
        with np.errstate(invalid="ignore"):
            sums = np.where(window_counts > 0, window_counts * llr[None, :], 0.0).sum(axis=1)
        return float(max(0.0, np.max(sums - lengths * cfg.lam)))
    if np.any(cfg.reference.probs[s] == 0):
        raise ZeroReferenceProb("prefix contains a zero-reference symbol")
    coder = KTCoder(kk)
    code = coder.lengths_from_counts(window_counts)
    with np.errstate(divide="ignore"):
        logref = np.where(window_counts > 0,
                          window_counts * np.log2(cfg.reference.probs)[None, :], 0.0).sum(axis=1)
    pen = lengths * cfg.lam if cfg.penalty == "window" else n * cfg.lam
    return float(np.max(-code - logref - pen))


def aux_stop(stream, config: DetectorConfig, trace: bool = False) -> StopReport:
    """Single-start (k = 1) stopping time: first ``n`` with statistic >= threshold."""
    s = _as_symbols(stream)
    cfg = config
    k = cfg.k
    if s.size == 0:
        return StopReport(False, None, 0, -math.inf, np.zeros(0) if trace else None)
    onehot = np.zeros((s.size, k), dtype=np.int64)
    onehot[np.arange(s.size), s] = 1
    before = np.cumsum(onehot, axis=0)[np.arange(s.size), s] - 1
    seen = np.arange(s.size)
    code_inc = np.log2(seen + 0.5 * k) - np.log2(before + 0.5)
    with np.errstate(divide="ignore"):
        logref = np.log2(cfg.reference.probs)[s]
    zero = np.flatnonzero(~np.isfinite(logref))
    limit = zero[0] if zero.size else s.size
    stat = np.cumsum(-code_inc[:limit] - logref[:limit] - cfg.lam)
    hit = np.flatnonzero(stat >= cfg.threshold)
    if hit.size:
        t = int(hit[0]) + 1
        return StopReport(True, t, t, float(stat[t - 1]), stat[:t] if trace else None)
    if zero.size:
        raise ZeroReferenceProb(f"symbol {int(s[limit])} at position {limit + 1} has zero "
                                "reference probability")
    return StopReport(False, None, s.size, float(stat[-1]), stat if trace else None)


def drift_window(mode: str, mu0: Categorical, mu1: Categorical,
                 est: EmpiricalEstimate | None = None, delta: float | None = None):
    """Admissible ``(lo, hi)`` for ``lam`` in the universal modes."""
    if mode == "jbpage":
        hi = kl_divergence(mu1, mu0)
        if hi <= 0:
            raise EmptyWindow(0.0, hi)
        return 0.0, hi
    return lambda_window(mu0, mu1, est, delta)


def validate_config(config: DetectorConfig, mu0: Categorical | None = None,
                    mu1: Categorical | None = None, est: EmpiricalEstimate | None = None,
                    delta: float | None = None) -> DetectorConfig:
    """Check ``lam`` against its admissible window when enough is known to compute it.

    Missing inputs only produce a warning.
    """
    if config.mode == "page":
        return config
    if mu1 is None or mu0 is None or (config.mode == "empirical" and est is None):
        warnings.warn("lambda window not checked: need mu0, mu1 (and the estimate for "
                      "empirical mode)", stacklevel=2)
        return config
    lo, hi = drift_window(config.mode, mu0, mu1, est, delta)
    if not lo < config.lam < hi:
        raise LambdaOutsideWindow(config.lam, lo, hi)
    return config
