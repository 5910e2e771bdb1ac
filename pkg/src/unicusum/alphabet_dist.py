"""Finite-alphabet categorical distributions, information measures and sampling.

All logarithms are base 2, so entropies, divergences and log-probabilities are
in bits.

Random streams come from numpy's PCG64 bit generator seeded through
``SeedSequence``.  The stream-splitting rule is: trial ``i`` of an experiment
with master seed ``s`` draws from ``SeedSequence(s, spawn_key=(i,))``, which is
independent of every other trial and of completion order.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import SupportMismatch, ValidationError

PROB_TOL = 1e-12
NORMALIZE_TOL = 1e-9
RNG_NAME = "numpy.PCG64/SeedSequence"


@dataclass(frozen=True)
class Alphabet:
    """Symbols are the dense indices ``0..size-1``."""

    size: int

    def __post_init__(self):
        if int(self.size) != self.size or self.size < 2:
            raise ValidationError("alphabet", f"size must be an integer >= 2, got {self.size}")


@dataclass(frozen=True, eq=False)
class Categorical:
    """Probability vector over an alphabet.

    Vectors within 1e-9 of summing to one are renormalized; anything further
    off is rejected rather than silently fixed.
    """

    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=np.float64).ravel()
        if p.size < 2:
            raise ValidationError("probs", "need at least two symbols")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise ValidationError("probs", "probabilities must be finite and non-negative")
        total = p.sum()
        if abs(total - 1.0) > NORMALIZE_TOL:
            raise ValidationError("probs", f"probabilities sum to {float(total)!r}, not 1")
        if abs(total - 1.0) > PROB_TOL:
            p = p / total
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def alphabet(self) -> Alphabet:
        return Alphabet(self.probs.size)

    @property
    def size(self) -> int:
        return self.probs.size

    @property
    def support(self) -> frozenset:
        return frozenset(np.flatnonzero(self.probs > 0).tolist())

    def log2_probs(self) -> np.ndarray:
        """Per-symbol log2 probabilities, ``-inf`` off the support."""
        with np.errstate(divide="ignore"):
            return np.log2(self.probs)

    def __eq__(self, other):
        return isinstance(other, Categorical) and np.array_equal(self.probs, other.probs)

    def __hash__(self):
        return hash(self.probs.tobytes())

    def __repr__(self):
        return f"Categorical({self.probs.tolist()})"

    def to_dict(self) -> dict:
        return {"probs": self.probs.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Categorical":
        return cls(d["probs"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Categorical":
        return cls.from_dict(json.loads(text))

    @classmethod
    def uniform(cls, k: int) -> "Categorical":
        return cls(np.full(k, 1.0 / k))

    @classmethod
    def point_mass(cls, k: int, symbol: int) -> "Categorical":
        p = np.zeros(k)
        p[symbol] = 1.0
        return cls(p)


@dataclass(frozen=True, eq=False)
class SymbolStream:
    """A finite run of symbol indices with optional annotations.

    ``change_point`` is counted in post-warm-up symbols (1-based); ``n0`` is the
    warm-up prefix length.
    """

    symbols: np.ndarray
    alphabet_size: int
    change_point: Optional[int] = None
    n0: Optional[int] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        s = np.asarray(self.symbols, dtype=np.int64).ravel()
        if s.size and (s.min() < 0 or s.max() >= self.alphabet_size):
            raise ValidationError("symbols", f"symbol outside alphabet of size {self.alphabet_size}")
        s.setflags(write=False)
        object.__setattr__(self, "symbols", s)

    def __len__(self):
        return self.symbols.size

    def __getitem__(self, item):
        if isinstance(item, slice):
            return SymbolStream(self.symbols[item], self.alphabet_size)
        return int(self.symbols[item])

    def __iter__(self):
        return iter(self.symbols.tolist())

    @property
    def warmup(self) -> "SymbolStream":
        return SymbolStream(self.symbols[: self.n0 or 0], self.alphabet_size)

    @property
    def post(self) -> "SymbolStream":
        return SymbolStream(self.symbols[self.n0 or 0:], self.alphabet_size,
                            change_point=self.change_point)


def _as_symbols(seq) -> np.ndarray:
    if isinstance(seq, SymbolStream):
        return seq.symbols
    return np.asarray(seq, dtype=np.int64).ravel()


def entropy(dist: Categorical) -> float:
    """Shannon entropy in bits, with ``0 log 0 = 0``."""
    p = dist.probs[dist.probs > 0]
    return float(max(0.0, -np.sum(p * np.log2(p))))


def kl_divergence(mu: Categorical, nu: Categorical) -> float:
    """``D(mu || nu)`` in bits.

    Raises SupportMismatch when ``mu`` puts mass where ``nu`` has none.
    """
    if mu.size != nu.size:
        raise SupportMismatch(f"alphabet sizes differ: {mu.size} vs {nu.size}")
    on = mu.probs > 0
    if np.any(nu.probs[on] == 0):
        bad = np.flatnonzero(on & (nu.probs == 0)).tolist()
        raise SupportMismatch(f"divergence is infinite: symbols {bad} have zero reference mass")
    p = mu.probs[on]
    q = nu.probs[on]
    return float(max(0.0, np.sum(p * (np.log2(p) - np.log2(q)))))


def make_rng(seed: int, trial: Optional[int] = None) -> np.random.Generator:
    """Generator for ``seed`` or for the independent substream of ``trial``."""
    if trial is None:
        ss = np.random.SeedSequence(seed)
    else:
        ss = np.random.SeedSequence(seed, spawn_key=(int(trial),))
    return np.random.Generator(np.random.PCG64(ss))


def draw(dist: Categorical, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` symbols by inverse-CDF lookup of ``rng.random``."""
    cdf = np.cumsum(dist.probs)
    cdf[-1] = 1.0
    u = rng.random(n)
    return np.searchsorted(cdf, u, side="right").astype(np.int64)


def sample_iid(dist: Categorical, n: int, seed) -> SymbolStream:
    """``n`` i.i.d. draws from ``dist``.

    ``seed`` may be an int or an existing ``numpy.random.Generator``; the same
    integer seed always yields the same stream.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    return SymbolStream(draw(dist, n, rng), dist.size)


def log_prob_sequence(dist: Categorical, seq) -> float:
    """``sum_i log2 dist(x_i)`` for an i.i.d. product measure."""
    s = _as_symbols(seq)
    if s.size == 0:
        return 0.0
    p = dist.probs[s]
    if np.any(p == 0):
        raise SupportMismatch("sequence contains a symbol with zero probability")
    return float(np.sum(np.log2(p)))


def symbol_counts(seq, k: int) -> np.ndarray:
    return np.bincount(_as_symbols(seq), minlength=k).astype(np.int64)


# stream files

def write_stream(path, symbols: Iterable[int], binary: bool = False) -> None:
    s = np.asarray(list(symbols) if not isinstance(symbols, np.ndarray) else symbols,
                   dtype=np.int64)
    path = Path(path)
    if binary:
        if s.size and s.max() > 255:
            raise ValidationError("stream", "raw byte format needs an alphabet of at most 256 symbols")
        path.write_bytes(s.astype(np.uint8).tobytes())
    else:
        path.write_text("".join(f"{int(x)}\n" for x in s))


def read_stream(path, alphabet_size: int, binary: bool = False) -> SymbolStream:
    path = Path(path)
    if binary:
        s = np.frombuffer(path.read_bytes(), dtype=np.uint8).astype(np.int64)
    else:
        tokens = path.read_text().split()
        try:
            s = np.array([int(t) for t in tokens], dtype=np.int64)
        except ValueError as exc:
            raise ValidationError("stream", f"non-integer symbol in {path}: {exc}") from None
    return SymbolStream(s, alphabet_size)


def as_categorical(x: Sequence[float] | Categorical) -> Categorical:
    return x if isinstance(x, Categorical) else Categorical(x)
