"""Closed-form and limiting computation rates.

The expectations over ordered gains are taken by Monte Carlo on sorted
Exp(1) samples; the rate expressions themselves are evaluated directly,
without the power-allocation pipeline of :mod:`nomacomac.scheme`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError
from .fading import TrialStream, map_trials, mean_and_se
from .orderstats import VarpiTable, xi_quantile

METHODS = ("monte-carlo", "closed-form", "limiting", "asymptote")


@dataclass(frozen=True)
class RateEstimate:
    """A computation rate in bits per channel use and how it was obtained."""

    value: float
    method: str
    trials: Optional[int] = None
    std_error: Optional[float] = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if not self.value >= 0:
            raise ValueError(f"rate must be non-negative, got {self.value!r}")
        if (self.std_error is not None) != (self.method == "monte-carlo"):
            raise ValueError("std_error is present exactly for monte-carlo estimates")


def c_plus(x: float) -> float:
    """max(log2(x)/2, 0) for x > 0."""
    if not x > 0:
        raise ValueError(f"c_plus needs x > 0, got {x!r}")
    return max(0.5 * math.log2(x), 0.0)


def c_plus_array(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if (x <= 0).any():
        raise ValueError("c_plus needs x > 0")
    return np.maximum(0.5 * np.log2(x), 0.0)


def _check(K: int, M: int, P: float, step: int = 1):
    if M < 1 or K < step * M or K % (step * M):
        raise ConfigError(f"K must be a positive multiple of {step}M (K={K}, M={M})")
    if P < 0:
        raise ConfigError(f"P must be non-negative, got {P}")


def _estimate(samples: np.ndarray) -> RateEstimate:
    mean, se = mean_and_se(samples)
    return RateEstimate(max(mean, 0.0), "monte-carlo", int(samples.size), se)


def wb_rate_samples(K, M, N, P, varpi: VarpiTable, trials, stream, workers=1) -> np.ndarray:
    """Per-trial values of the wide-band OMA rate."""
    _check(K, M, P)
    B = K // M
    w1 = varpi[1]

    def per_chunk(x):
        snr = K * P * x[:, :, M - 1] / (M * w1)
        return c_plus_array(N / M + snr).sum(axis=1) / (B * N)

    return map_trials(per_chunk, stream, trials, N, K, workers)


def nb_rate(K, M, P, varpi: VarpiTable, trials, stream: TrialStream, workers=1) -> RateEstimate:
    """Ergodic rate of narrow-band OMA computation."""
    return _estimate(wb_rate_samples(K, M, 1, P, varpi, trials, stream, workers))


def wb_rate(K, M, N, P, varpi: VarpiTable, trials, stream: TrialStream, workers=1) -> RateEstimate:
    """Ergodic rate of wide-band (OFDM) OMA computation."""
    return _estimate(wb_rate_samples(K, M, N, P, varpi, trials, stream, workers))


def noma_pair_samples(K, M, N, P, varpi: VarpiTable, trials, stream, workers=1) -> np.ndarray:
    """Per-trial values of the sub-function-pair rate under average power control."""
    _check(K, M, P, step=2)
    B = K // M
    w1, w2 = varpi[1], varpi[2]
    load = P * K / M

    def per_chunk(x):
        strong = x[:, :, M - 1]
        weak = x[:, :, 2 * M - 1]
        gamma = strong / weak * w2 + w1
        snr = 2 * load * strong / (gamma + np.sqrt(gamma**2 + 4 * load * strong * w1))
        return 2 * c_plus_array(N / M + snr).sum(axis=1) / (B * N)

    return map_trials(per_chunk, stream, trials, N, K, workers)


def noma_pair_rate(K, M, N, P, varpi: VarpiTable, trials, stream: TrialStream, workers=1) -> RateEstimate:
    """Ergodic rate when every sub-carrier carries the two strongest sub-functions."""
    return _estimate(noma_pair_samples(K, M, N, P, varpi, trials, stream, workers))


def _check_ratio(r: float, upper: float):
    if not 0.0 < r < upper:
        raise ConfigError(f"r must lie in (0, {upper}), got {r!r}")


def limit_rate_noma(r: float, K: int, N: int, P: float, varpi1: float, varpi2: float) -> float:
    """Large-K rate of the sub-function pair scheme at fixed r = M/K < 1/2."""
    _check_ratio(r, 0.5)
    q1 = xi_quantile(1 - r)
    q2 = xi_quantile(1 - 2 * r)
    delta = varpi1 * q2 + varpi2 * q1
    snr = 2 * P * q1 * q2 / (r * delta + math.sqrt((r * delta) ** 2 + 4 * r * varpi1 * P * q1 * q2**2))
    return 2 * r * c_plus(N / (r * K) + snr)


def limit_rate_wb(r: float, K: int, N: int, P: float, varpi1: float) -> float:
    """Large-K rate of wide-band OMA computation at fixed r = M/K."""
    _check_ratio(r, 1.0)
    return r * c_plus(N / (r * K) + xi_quantile(1 - r) * P / (r * varpi1))


def limit_rate_nb(r: float, K: int, P: float, varpi1: float) -> float:
    """Narrow-band case of :func:`limit_rate_wb`."""
    return limit_rate_wb(r, K, 1, P, varpi1)


def high_snr_asymptote(r: float, P: float) -> float:
    """2r * C+(sqrt(P * xi_{1-r})), the common high-SNR trend of the pair rate."""
    _check_ratio(r, 0.5)
    if not P > 0:
        raise ConfigError("P must be positive")
    return 2 * r * c_plus(math.sqrt(P * xi_quantile(1 - r)))
