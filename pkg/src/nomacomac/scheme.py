"""Sub-function superposition over OFDM sub-carriers.

Per sub-carrier, nodes are ranked by gain and cut into ``B = K/M`` groups of
``M``; each group computes one sub-function. The ``L`` strongest groups are
superposed and decoded by successive interference cancellation (SIC), the
strongest first. Every member of a chosen group inverts its gain down to the
group's weakest gain, so all members arrive at the same level.

The per-block API (``allocate_power``, ``sub_function_rate``, ...) and the
batched Monte Carlo path share the array kernels defined here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .closedform import RateEstimate, c_plus_array
from .errors import ConfigError
from .fading import (
    ChannelBlock,
    SystemConfig,
    TrialStream,
    chunk_bounds,
    gain_batch,
    map_trials,
    mean_and_se,
)
from .orderstats import VarpiTable, estimate_varpi

POWER_RULES = ("equal-beta", "pair-optimal")

#: Sub-stream used for the expectation constants when the caller supplies none.
VARPI_SUBSTREAM = 1


def enumeration_counts(K: int, M: int, L: int) -> tuple[int, int, int | None]:
    """Sizes of the sub-function, superposition and combination sets.

    The combination count needs ``B mod L == 0``; it is ``None`` otherwise.
    """
    if M < 1 or L < 1 or K % M:
        raise ConfigError(f"K mod M must be 0 (K={K}, M={M})")
    if L * M > K:
        raise ConfigError(f"L*M must not exceed K (L={L}, M={M}, K={K})")
    count_s = math.comb(K, M)
    count_h = math.prod(math.comb(K - M * l, M) for l in range(L))
    B = K // M
    if B % L:
        return count_s, count_h, None
    D = B // L
    count_x = math.prod(math.comb(M * L - M * l, M) for l in range(L)) * math.prod(
        math.comb(K - M * d, M * L) for d in range(D)
    )
    return count_s, count_h, count_x


@dataclass(frozen=True)
class GroupAssignment:
    """Groups per sub-carrier: ``groups[g][l-1]`` holds the 1-based node ids of group l."""

    groups: tuple
    L: int

    def chosen(self, g: int) -> tuple:
        return self.groups[g][: self.L]


def group_nodes(block: ChannelBlock, M: int, L: int) -> GroupAssignment:
    K = block.K
    if K % M or L * M > K:
        raise ConfigError(f"cannot form {L} groups of {M} out of {K} nodes")
    groups = tuple(
        tuple(tuple(int(i) for i in block.ranks[g][M * l : M * (l + 1)]) for l in range(K // M))
        for g in range(block.N)
    )
    return GroupAssignment(groups, L)


@dataclass(frozen=True)
class PowerPlan:
    """Transmit powers ``powers[i, g]`` (K x N) and power factors ``betas[g, l-1]`` (N x L)."""

    powers: np.ndarray
    betas: np.ndarray


# -- array kernels ---------------------------------------------------------


def beta_pair_array(strong, weak, varpi1, varpi2, load):
    """Power factor of the stronger group with the weaker group's factor fixed to 1.

    ``load`` is P*K/M. Solves the equal-rate condition of the two SIC stages.
    """
    ratio = strong / weak
    root = np.sqrt((ratio * varpi2 + varpi1) ** 2 + 4 * load * strong * varpi1)
    return (root + varpi1 - ratio * varpi2) / (2 * ratio * varpi1)


def chosen_powers(sorted_gains, betas, varpi_values, cfg: SystemConfig):
    """Powers of the L*M strongest ranks, shape (..., N, L*M).

    ``sorted_gains`` has shape (..., N, K) in descending order and ``betas``
    shape (..., N, L).
    """
    K, M, L, N, P = cfg.K, cfg.M, cfg.L, cfg.N, cfg.P
    w = np.asarray(varpi_values[:L], dtype=float)
    norm = (betas * w).sum(axis=-1, keepdims=True)
    if (norm <= 0).any():
        raise ValueError("power factors must not all vanish")
    top = sorted_gains[..., : L * M]
    weakest = sorted_gains[..., M - 1 : L * M : M]  # (..., N, L)
    level = betas * K * P * weakest / (N * M * norm)  # gain x power of each group
    return np.repeat(level, M, axis=-1) / top


def received_levels(sorted_gains, powers, M: int, L: int):
    """Per-group equivalent received level min_u(gain_u * power_u), shape (..., N, L)."""
    prod = sorted_gains[..., : L * M] * powers
    return prod.reshape(prod.shape[:-1] + (L, M)).min(axis=-1)


def sic_sinr(levels, N: int):
    """Effective SNR of each group when groups are decoded strongest first.

    ``levels`` (..., L): gain*power per group. Group l sees the not yet
    decoded groups l+1..L as interference.
    """
    levels = np.asarray(levels, dtype=float)
    later = np.cumsum(levels[..., ::-1], axis=-1)[..., ::-1] - levels
    return N * levels / (1 + N * later)


def sic_rates(levels, N: int, M: int):
    """Rate of every group on one sub-carrier: (1/N) C+(N/M + SINR_l)."""
    return c_plus_array(N / M + sic_sinr(levels, N)) / N


def _pair_betas(sorted_gains, varpi: VarpiTable, cfg: SystemConfig):
    M = cfg.M
    strong = sorted_gains[..., M - 1]
    weak = sorted_gains[..., 2 * M - 1]
    b1 = beta_pair_array(strong, weak, varpi[1], varpi[2], cfg.P * cfg.K / M)
    return np.stack([b1, np.ones_like(b1)], axis=-1)


def _betas_for(rule: str, sorted_gains, varpi, cfg):
    if rule == "pair-optimal":
        return _pair_betas(sorted_gains, varpi, cfg)
    if rule == "equal-beta":
        return np.ones(sorted_gains.shape[:-1] + (cfg.L,))
    raise ConfigError(f"unknown power rule {rule!r}; expected one of {POWER_RULES}")


# -- per-block API ---------------------------------------------------------


def _check_varpi(varpi: VarpiTable, cfg: SystemConfig):
    if (varpi.K, varpi.M) != (cfg.K, cfg.M):
        raise ConfigError(f"varpi table is for (K={varpi.K}, M={varpi.M}), config has (K={cfg.K}, M={cfg.M})")


def allocate_power(block: ChannelBlock, cfg: SystemConfig, varpi: VarpiTable, betas) -> PowerPlan:
    """Average-power-controlled transmit powers for one block.

    ``betas`` is an L-vector (same on every sub-carrier) or an N x L matrix.
    """
    _check_varpi(varpi, cfg)
    betas = np.broadcast_to(np.asarray(betas, dtype=float), (cfg.N, cfg.L)).copy()
    if (betas < 0).any():
        raise ValueError("power factors must be non-negative")
    if (betas.sum(axis=1) == 0).any():
        raise ValueError("power factors must not all vanish on a sub-carrier")
    x = block.sorted_gains()
    top = chosen_powers(x, betas, varpi.values, cfg)
    powers = np.zeros((cfg.K, cfg.N))
    for g in range(cfg.N):
        powers[block.ranks[g][: cfg.L * cfg.M] - 1, g] = top[g]
    return PowerPlan(powers, betas)


def beta_pair(gain_M: float, gain_2M: float, varpi1: float, varpi2: float, cfg: SystemConfig):
    """Power factors (beta1, beta2=1) equalising the two sub-function rates."""
    if not (gain_M > 0 and gain_2M > 0):
        raise ValueError("gains must be positive")
    if gain_M < gain_2M:
        raise ValueError("gain_M must not be below gain_2M")
    b1 = float(beta_pair_array(gain_M, gain_2M, varpi1, varpi2, cfg.P * cfg.K / cfg.M))
    return b1, 1.0


def _levels(block: ChannelBlock, plan: PowerPlan, g: int, cfg: SystemConfig):
    rx = block.gains[:, g] * plan.powers[:, g]
    ranks = block.ranks[g]
    return np.array(
        [rx[ranks[cfg.M * l : cfg.M * (l + 1)] - 1].min() for l in range(cfg.L)]
    )


def sub_function_rate(block: ChannelBlock, plan: PowerPlan, g: int, l: int, cfg: SystemConfig) -> float:
    """Rate of the l-th (1-based) superposed sub-function on sub-carrier g (0-based)."""
    if not 1 <= l <= cfg.L:
        raise IndexError(f"group index {l} outside 1..{cfg.L}")
    if not 0 <= g < cfg.N:
        raise IndexError(f"sub-carrier index {g} outside 0..{cfg.N - 1}")
    return float(sic_rates(_levels(block, plan, g, cfg), cfg.N, cfg.M)[l - 1])


def superposition_rate(rates: Sequence[float]) -> float:
    """A superposition is only useful once every member is decoded: the slowest rate."""
    rates = np.asarray(rates, dtype=float)
    if rates.size == 0:
        raise ValueError("empty superposition")
    if (rates < 0).any() or not np.isfinite(rates).all():
        raise ValueError("rates must be finite and non-negative")
    return float(rates.min())


def symbol_rate(block: ChannelBlock, plan: PowerPlan, cfg: SystemConfig) -> float:
    """Computation rate delivered by one OFDM symbol.

    Sum over sub-carriers of the superposition rate, scaled by M*L/K: each
    sub-carrier serves L of the B sub-functions of a desired function.
    """
    total = 0.0
    for g in range(cfg.N):
        total += superposition_rate(sic_rates(_levels(block, plan, g, cfg), cfg.N, cfg.M))
    return cfg.M * cfg.L / cfg.K * total


# -- Monte Carlo -----------------------------------------------------------


def _resolve_varpi(cfg: SystemConfig, stream: TrialStream, varpi, workers):
    if varpi is None:
        varpi = estimate_varpi(cfg.K, cfg.M, cfg.trials, stream.child(VARPI_SUBSTREAM), workers)
    _check_varpi(varpi, cfg)
    return varpi


def _check_rule(cfg: SystemConfig, power_rule: str):
    if power_rule not in POWER_RULES:
        raise ConfigError(f"unknown power rule {power_rule!r}; expected one of {POWER_RULES}")
    if power_rule == "pair-optimal":
        cfg.check_pair()


def symbol_rate_samples(cfg: SystemConfig, power_rule: str, stream: TrialStream,
                        varpi: VarpiTable | None = None, workers: int = 1) -> np.ndarray:
    """Per-trial symbol rates of the full pipeline."""
    _check_rule(cfg, power_rule)
    varpi = _resolve_varpi(cfg, stream, varpi, workers)
    M, L = cfg.M, cfg.L

    def per_chunk(x):
        betas = _betas_for(power_rule, x, varpi, cfg)
        levels = received_levels(x, chosen_powers(x, betas, varpi.values, cfg), M, L)
        per_carrier = sic_rates(levels, cfg.N, M).min(axis=-1)
        return M * L / cfg.K * per_carrier.sum(axis=-1)

    return map_trials(per_chunk, stream, cfg.trials, cfg.N, cfg.K, workers)


def ergodic_rate_mc(cfg: SystemConfig, power_rule: str, stream: TrialStream,
                    varpi: VarpiTable | None = None, workers: int = 1) -> RateEstimate:
    """Average symbol rate over ``cfg.trials`` independent blocks.

    Without ``varpi`` the constants are estimated from the same seed on a
    separate sub-stream with ``cfg.trials`` samples.
    """
    samples = symbol_rate_samples(cfg, power_rule, stream, varpi, workers)
    mean, se = mean_and_se(samples)
    return RateEstimate(max(mean, 0.0), "monte-carlo", cfg.trials, se)


def node_power_profile(cfg: SystemConfig, power_rule: str, stream: TrialStream,
                       varpi: VarpiTable | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Mean transmit power of every node per sub-carrier, with standard errors.

    Averages over trials and sub-carriers; the budget asks for P/N.
    """
    _check_rule(cfg, power_rule)
    varpi = _resolve_varpi(cfg, stream, varpi, 1)
    K, N, LM = cfg.K, cfg.N, cfg.L * cfg.M
    total = np.zeros(K)
    total_sq = np.zeros(K)
    for chunk, (lo, hi) in enumerate(chunk_bounds(cfg.trials)):
        gains = gain_batch(stream, chunk, hi - lo, N, K)
        order = np.argsort(-gains, axis=-1, kind="stable")
        x = np.take_along_axis(gains, order, axis=-1)
        betas = _betas_for(power_rule, x, varpi, cfg)
        powers = np.zeros_like(gains)
        np.put_along_axis(powers, order[..., :LM], chosen_powers(x, betas, varpi.values, cfg), axis=-1)
        per_block = powers.mean(axis=1)  # (n, K): average over sub-carriers
        total += per_block.sum(axis=0)
        total_sq += (per_block**2).sum(axis=0)
    n = cfg.trials
    mean = total / n
    var = np.maximum(total_sq / n - mean**2, 0.0) * n / max(n - 1, 1)
    return mean, np.sqrt(var / n)

