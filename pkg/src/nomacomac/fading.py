"""Rayleigh block fading: channel gains per OFDM symbol and per-sub-carrier ranking.

Randomness is counter based. A :class:`TrialStream` maps every trial index
to a fixed position inside a Philox sub-stream, so the gains drawn for trial
``i`` never depend on how many trials run, in which order, or on how many
workers share the load.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from .errors import ConfigError

#: Trials per counter block. Changing it changes every simulated number.
CHUNK = 4096

_MASK64 = (1 << 64) - 1


def sample_gains(rng: np.random.Generator, size) -> np.ndarray:
    """Draw channel power gains |h|^2.

    This is the single place that fixes the fading law: i.i.d. Rayleigh
    amplitudes, hence Exp(1) power gains.
    """
    return rng.standard_exponential(size)


@dataclass(frozen=True)
class SystemConfig:
    """Scheme parameters.

    ``P`` is the linear, noise-normalised power budget of each node summed
    over its sub-carriers; the SNR in dB is ``10 log10(P)``.
    """

    K: int
    M: int
    L: int = 2
    N: int = 1
    P: float = 10.0
    trials: int = 100_000
    seed: int = 0

    def __post_init__(self):
        for name in ("K", "M", "L", "N", "trials"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if not (self.P > 0 and math.isfinite(self.P)):
            raise ConfigError(f"P must be a positive finite real, got {self.P!r}")
        if not 0 <= self.seed <= _MASK64:
            raise ConfigError("seed must fit in 64 unsigned bits")
        if self.K % self.M:
            raise ConfigError(f"K mod M must be 0 (K={self.K}, M={self.M})")
        if self.L * self.M > self.K:
            raise ConfigError(f"L*M must not exceed K (L={self.L}, M={self.M}, K={self.K})")

    @property
    def B(self) -> int:
        return self.K // self.M

    @property
    def snr_db(self) -> float:
        return 10.0 * math.log10(self.P)

    def check_pair(self):
        """Raise unless the config suits the sub-function pair scheme."""
        if self.L != 2:
            raise ConfigError(f"pair scheme needs L == 2, got L={self.L}")
        if self.K % (2 * self.M):
            raise ConfigError(f"pair scheme needs K mod 2M == 0 (K={self.K}, M={self.M})")


@dataclass(frozen=True)
class TrialStream:
    """Seeded family of counter-based random sub-streams.

    ``substream`` separates independent uses of one seed (gains for rates,
    gains for the expectation constants, ...).
    """

    seed: int
    substream: int = 0

    def generator(self, chunk: int) -> np.random.Generator:
        key = (self.seed & _MASK64) | ((self.substream & _MASK64) << 64)
        return np.random.Generator(np.random.Philox(key=key, counter=[0, 0, 0, chunk]))

    def child(self, substream: int) -> "TrialStream":
        return TrialStream(self.seed, substream)


def chunk_bounds(trials: int) -> list[tuple[int, int]]:
    """Half-open trial ranges, one per counter block."""
    return [(start, min(start + CHUNK, trials)) for start in range(0, trials, CHUNK)]


def gain_batch(stream: TrialStream, chunk: int, count: int, N: int, K: int) -> np.ndarray:
    """Unsorted gains of ``count`` consecutive trials of one chunk, shape (count, N, K)."""
    return sample_gains(stream.generator(chunk), (count, N, K))


def sort_desc(gains: np.ndarray) -> np.ndarray:
    """Sort the last axis in descending order."""
    return -np.sort(-gains, axis=-1)


def iter_sorted_gains(stream: TrialStream, trials: int, N: int, K: int) -> Iterator[np.ndarray]:
    """Yield per-chunk arrays of descending gains, shape (n, N, K)."""
    for chunk, (lo, hi) in enumerate(chunk_bounds(trials)):
        yield sort_desc(gain_batch(stream, chunk, hi - lo, N, K))


def map_trials(
    fn: Callable[[np.ndarray], np.ndarray],
    stream: TrialStream,
    trials: int,
    N: int,
    K: int,
    workers: int = 1,
) -> np.ndarray:
    """Apply ``fn`` to the sorted gains of every chunk and concatenate.

    ``fn`` maps an (n, N, K) array to n per-trial values. Chunks are
    reassembled in trial order, so the result does not depend on ``workers``.
    """
    if trials < 1:
        raise ConfigError("trials must be positive")
    bounds = chunk_bounds(trials)

    def run(item):
        chunk, (lo, hi) = item
        return np.asarray(fn(sort_desc(gain_batch(stream, chunk, hi - lo, N, K))), dtype=float)

    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, enumerate(bounds)))
    else:
        parts = [run(item) for item in enumerate(bounds)]
    return np.concatenate(parts)


def mean_and_se(values: np.ndarray) -> tuple[float, float]:
    """Sample mean and its standard error (numpy's pairwise summation)."""
    values = np.asarray(values, dtype=float)
    n = values.size
    mean = float(np.sum(values) / n)
    if n < 2:
        return mean, 0.0
    return mean, float(np.std(values, ddof=1) / math.sqrt(n))


def rank_nodes(column) -> np.ndarray:
    """Node indices (1-based) ordered by descending gain.

    Ties keep ascending node index.

    >>> rank_nodes([3.0, 1.0, 2.0]).tolist()
    [1, 3, 2]
    """
    column = np.asarray(column, dtype=float)
    if column.ndim != 1:
        raise ValueError("expected a 1-D vector of gains")
    if np.isnan(column).any():
        raise ValueError("gains contain NaN")
    return np.argsort(-column, kind="stable") + 1


@dataclass(frozen=True)
class ChannelBlock:
    """Gains of one OFDM symbol.

    ``gains[i, g]`` is node ``i``'s power gain on sub-carrier ``g`` (0-based
    arrays); ``ranks[g]`` lists 1-based node indices from strongest to
    weakest on sub-carrier ``g``.
    """

    gains: np.ndarray
    ranks: np.ndarray = field(default=None)

    def __post_init__(self):
        gains = np.array(self.gains, dtype=float)
        if gains.ndim != 2:
            raise ValueError("gains must be a K x N matrix")
        if (gains < 0).any() or not np.isfinite(gains).all():
            raise ValueError("gains must be finite and non-negative")
        if self.ranks is None:
            ranks = np.stack([rank_nodes(gains[:, g]) for g in range(gains.shape[1])])
        else:
            ranks = np.array(self.ranks, dtype=int)
        K, N = gains.shape
        if ranks.shape != (N, K):
            raise ValueError("ranks must hold one permutation per sub-carrier")
        for g in range(N):
            if sorted(ranks[g]) != list(range(1, K + 1)):
                raise ValueError(f"ranks[{g}] is not a permutation of 1..K")
            ordered = gains[ranks[g] - 1, g]
            if (np.diff(ordered) > 0).any():
                raise ValueError(f"ranks[{g}] is not sorted by descending gain")
        gains.setflags(write=False)
        ranks.setflags(write=False)
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "ranks", ranks)

    @property
    def K(self) -> int:
        return self.gains.shape[0]

    @property
    def N(self) -> int:
        return self.gains.shape[1]

    def sorted_gains(self) -> np.ndarray:
        """Descending gains per sub-carrier, shape (N, K)."""
        return np.stack([self.gains[self.ranks[g] - 1, g] for g in range(self.N)])


def draw_block(cfg: SystemConfig, stream: TrialStream, trial: int = 0) -> ChannelBlock:
    """Channel block of one trial, identical to the gains that trial sees in batch runs."""
    chunk, offset = divmod(trial, CHUNK)
    gains = gain_batch(stream, chunk, offset + 1, cfg.N, cfg.K)[offset]
    return ChannelBlock(gains.T.copy())
