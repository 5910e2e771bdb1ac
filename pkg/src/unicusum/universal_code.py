"""Ideal code lengths of universal codes for memoryless sources.

Lengths are real-valued ``-log2 Q`` for a sequential probability assignment
``Q``; they satisfy the Kraft inequality with equality, so no actual encoder is
needed.  The Krichevsky-Trofimov (add-1/2) assignment is the default code.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .alphabet_dist import Categorical, _as_symbols, make_rng, draw
from .errors import TooLarge

ENUM_LIMIT = 2 ** 24
_LN2 = math.log(2.0)


class CodeLengthFn:
    """Length function ``L`` of a prefix code on sequences over ``k`` symbols.

    Subclasses provide ``length`` and an incremental ``initial_state`` /
    ``extend`` pair; ``lengths`` evaluates a batch of equal-length sequences.
    """

    k: int

    def length(self, seq) -> float:
        raise NotImplementedError

    def initial_state(self):
        raise NotImplementedError

    def extend(self, state, symbol: int):
        raise NotImplementedError

    def lengths(self, seqs: np.ndarray) -> np.ndarray:
        return np.array([self.length(s) for s in seqs], dtype=np.float64)


@dataclass
class KTState:
    counts: np.ndarray
    t: int = 0
    length: float = 0.0

    def copy(self) -> "KTState":
        return KTState(self.counts.copy(), self.t, self.length)


class KTCoder(CodeLengthFn):
    """Krichevsky-Trofimov mixture code over ``k`` symbols."""

    def __init__(self, k: int):
        if k < 2:
            raise ValueError("need k >= 2")
        self.k = int(k)

    def __repr__(self):
        return f"KTCoder(k={self.k})"

    def length(self, seq) -> float:
        s = _as_symbols(seq)
        return self.length_from_counts(np.bincount(s, minlength=self.k))

    def length_from_counts(self, counts) -> float:
        """Closed form via log-gamma; depends on the sequence only through its counts."""
        c = np.asarray(counts, dtype=np.float64)
        n = c.sum()
        if n == 0:
            return 0.0
        h = 0.5 * self.k
        nats = (gammaln(n + h) - gammaln(h)
                - np.sum(gammaln(c + 0.5) - gammaln(0.5)))
        return float(nats / _LN2)

    def lengths(self, seqs: np.ndarray) -> np.ndarray:
        seqs = np.atleast_2d(np.asarray(seqs, dtype=np.int64))
        counts = np.stack([(seqs == a).sum(axis=1) for a in range(self.k)], axis=1)
        return self.lengths_from_counts(counts)

    def lengths_from_counts(self, counts) -> np.ndarray:
        """Row-wise closed form for a matrix of count vectors."""
        c = np.asarray(counts, dtype=np.float64)
        n = c.sum(axis=1)
        h = 0.5 * self.k
        nats = (gammaln(n + h) - gammaln(h)
                - np.sum(gammaln(c + 0.5) - gammaln(0.5), axis=1))
        return nats / _LN2

    def initial_state(self) -> KTState:
        return KTState(np.zeros(self.k, dtype=np.int64))

    def extend(self, state: KTState, symbol: int) -> KTState:
        """Append one symbol; mutates and returns ``state``."""
        if not 0 <= symbol < self.k:
            raise ValueError(f"symbol {symbol} outside alphabet of size {self.k}")
        c = state.counts[symbol]
        state.length += math.log2(state.t + 0.5 * self.k) - math.log2(c + 0.5)
        state.counts[symbol] = c + 1
        state.t += 1
        return state

    def regret_bound(self, n: int) -> float:
        """``log2 max_mu mu(x) - L(x)`` for a constant sequence of length ``n``.

        This is the largest pointwise regret of the KT code (attained at the
        boundary of the simplex).
        """
        if n <= 0:
            return 0.0
        h = 0.5 * self.k
        nats = gammaln(n + h) - gammaln(h) - gammaln(n + 0.5) + gammaln(0.5)
        return float(nats / _LN2)


def kt_length(seq, k: int | None = None) -> float:
    """KT code length in bits; ``k`` defaults to the stream's alphabet size."""
    if k is None:
        k = seq.alphabet_size
    return KTCoder(k).length(seq)


def kt_extend(state: KTState, symbol: int, k: int) -> KTState:
    return KTCoder(k).extend(state, symbol)


def _enumerate(k: int, n: int, chunk: int = 1 << 16):
    """Yield every length-``n`` sequence over ``k`` symbols in base-``k`` order, in chunks."""
    total = k ** n
    if total > ENUM_LIMIT:
        raise TooLarge(f"{k}^{n} sequences exceed the enumeration limit {ENUM_LIMIT}")
    place = k ** np.arange(n - 1, -1, -1, dtype=np.int64)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk), dtype=np.int64)
        yield (idx[:, None] // place[None, :]) % k


def kraft_sum(coder: CodeLengthFn, n: int) -> float:
    """Exact ``sum 2^-L(x)`` over all ``k^n`` sequences of length ``n``."""
    if n == 0:
        return 2.0 ** -coder.length(np.zeros(0, dtype=np.int64))
    total = 0.0
    for block in _enumerate(coder.k, n):
        total += math.fsum(np.exp2(-coder.lengths(block)))
    return total


def _ml_log2prob(seqs: np.ndarray, k: int) -> np.ndarray:
    n = seqs.shape[1]
    out = np.zeros(seqs.shape[0])
    for a in range(k):
        c = (seqs == a).sum(axis=1).astype(np.float64)
        with np.errstate(divide="ignore", invalid="ignore"):
            out += np.where(c > 0, c * np.log2(c / n), 0.0)
    return out


def redundancy(coder: CodeLengthFn, dist: Categorical | None, n: int,
               mode: str = "exhaustive", samples: int = 256, seed: int = 0) -> float:
    """Largest ``L(x) + log2 mu(x)`` over sequences of length ``n``.

    ``dist=None`` replaces ``mu(x)`` by the maximum-likelihood i.i.d.
    probability of ``x``, i.e. the supremum over memoryless sources.
    ``mode="sampled"`` maximises over ``samples`` draws from ``dist`` instead
    of every sequence, giving a lower estimate.
    """
    if n == 0:
        return 0.0
    if mode == "exhaustive":
        blocks = _enumerate(coder.k, n)
    elif mode == "sampled":
        if dist is None:
            raise ValueError("sampled mode needs a source distribution")
        rng = make_rng(seed)
        blocks = [draw(dist, n * samples, rng).reshape(samples, n)]
    else:
        raise ValueError(f"unknown mode {mode!r}")
    best = -math.inf
    for block in blocks:
        if dist is None:
            logp = _ml_log2prob(block, coder.k)
        else:
            with np.errstate(divide="ignore"):
                logp = np.log2(dist.probs)[block].sum(axis=1)
        r = coder.lengths(block) + logp
        r = r[np.isfinite(r)]
        if r.size:
            best = max(best, float(r.max()))
    return best
