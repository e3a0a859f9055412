"""Order statistics of i.i.d. Exp(1) channel gains.

Ranks are descending throughout: ``X_(1)`` is the largest of ``K`` gains and
``X_(K)`` the smallest.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import integrate, stats

from .errors import ConfigError
from .fading import TrialStream, map_trials


def xi_quantile(x: float) -> float:
    """Quantile of the Exp(1) gain distribution, ``-ln(1 - x)``."""
    if not 0.0 <= x < 1.0:
        raise ValueError(f"quantile level must lie in [0, 1), got {x!r}")
    return -math.log1p(-x)


def _log_multinomial(K: int, *parts: int) -> float:
    return math.lgamma(K + 1) - sum(math.lgamma(p + 1) for p in parts)


def order_stat_mean(K: int, j: int) -> float:
    """Mean of the j-th largest of K Exp(1) variates: sum_{i=j}^{K} 1/i."""
    if not 1 <= j <= K:
        raise ValueError(f"need 1 <= j <= K, got j={j}, K={K}")
    return math.fsum(1.0 / i for i in range(j, K + 1))


def order_stat_pdf(K: int, j: int, x: float) -> float:
    """Density of the j-th largest of K Exp(1) variates."""
    if not 1 <= j <= K:
        raise ValueError(f"need 1 <= j <= K, got j={j}, K={K}")
    if x < 0:
        return 0.0
    below = -math.expm1(-x)
    if below == 0.0:
        return math.exp(_log_multinomial(K, j - 1, K - j)) if K == j else 0.0
    log_f = _log_multinomial(K, j - 1, K - j) - j * x + (K - j) * math.log(below)
    return math.exp(log_f)


def order_stat_cdf(K: int, j: int, t: float) -> float:
    """P{X_(j) <= t}: at least K - j + 1 of the K gains fall below t."""
    if not 1 <= j <= K:
        raise ValueError(f"need 1 <= j <= K, got j={j}, K={K}")
    if t <= 0:
        return 0.0
    return float(stats.binom.sf(K - j, K, -math.expm1(-t)))


def joint_order_pdf_ranks(K: int, a: int, b: int, x: float, y: float) -> float:
    """Joint density of (X_(a), X_(b)) for ranks a < b, evaluated at x >= y."""
    if not 1 <= a < b <= K:
        raise ValueError(f"need 1 <= a < b <= K, got a={a}, b={b}, K={K}")
    if x < y or y < 0:
        return 0.0
    gap = math.exp(-y) - math.exp(-x)
    below = -math.expm1(-y)
    n_mid, n_low = b - a - 1, K - b
    if (n_mid and gap <= 0.0) or (n_low and below <= 0.0):
        return 0.0
    log_f = _log_multinomial(K, a - 1, n_mid, n_low) - a * x - y
    if n_mid:
        log_f += n_mid * math.log(gap)
    if n_low:
        log_f += n_low * math.log(below)
    return math.exp(log_f)


def joint_order_pdf(K: int, M: int, x: float, y: float) -> float:
    """Joint density of the M-th and 2M-th largest gains at (x, y), x >= y.

    Equals K!/((M-1)!^2 (K-2M)!) e^{-Mx} (e^{-y}-e^{-x})^{M-1} e^{-y} (1-e^{-y})^{K-2M}.
    """
    if K < 2 * M:
        raise ValueError(f"need K >= 2M, got K={K}, M={M}")
    return joint_order_pdf_ranks(K, M, 2 * M, x, y)


@dataclass(frozen=True)
class VarpiTable:
    """Expectation constants coupling ordered gains to the power budget.

    ``values[l-1]`` is the constant of group ``l`` (ranks ``M(l-1)+1 .. Ml``),
    i.e. the rank-averaged mean ratio of the group's weakest gain to each
    member's gain.
    """

    K: int
    M: int
    values: tuple
    trials: int
    standard_errors: tuple
    seed: int | None = None

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        errors = tuple(float(e) for e in self.standard_errors)
        if len(values) != self.K // self.M or len(errors) != len(values):
            raise ValueError("need one value and one standard error per group")
        if any(not 0.0 < v <= 1.0 for v in values):
            raise ValueError("varpi values must lie in (0, 1]")
        if any(e < 0 for e in errors):
            raise ValueError("standard errors must be non-negative")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "standard_errors", errors)

    def __getitem__(self, l: int) -> float:
        """Constant of group ``l`` (1-based)."""
        if not 1 <= l <= len(self.values):
            raise IndexError(l)
        return self.values[l - 1]

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "VarpiTable":
        data = json.loads(text)
        return cls(
            K=data["K"],
            M=data["M"],
            values=tuple(data["values"]),
            trials=data["trials"],
            standard_errors=tuple(data["standard_errors"]),
            seed=data.get("seed"),
        )


def _group_ratios(sorted_gains: np.ndarray, M: int) -> np.ndarray:
    # sorted_gains: (n, 1, K) descending -> (n, B) rank-averaged ratios
    x = sorted_gains[:, 0, :]
    n, K = x.shape
    groups = x.reshape(n, K // M, M)
    return (groups[:, :, -1:] / groups).mean(axis=2)


def estimate_varpi(
    K: int, M: int, trials: int, stream: TrialStream, workers: int = 1
) -> VarpiTable:
    """Monte Carlo estimate of the per-group constants.

    For group l: ``(1/M) sum_{j in group l} E[X_(Ml) / X_(j)]`` over sorted
    K-samples of Exp(1).
    """
    if trials < 1:
        raise ConfigError("trials must be positive")
    if M < 1 or K % M:
        raise ConfigError(f"K mod M must be 0 (K={K}, M={M})")
    B = K // M
    if M == 1:
        # every ratio is a gain divided by itself
        return VarpiTable(K, M, (1.0,) * B, trials, (0.0,) * B, stream.seed)
    # per-trial group ratios, flattened chunk by chunk then reassembled
    per_trial = map_trials(
        lambda s: _group_ratios(s, M).ravel(), stream, trials, 1, K, workers
    ).reshape(trials, B)
    means = per_trial.mean(axis=0)
    errors = per_trial.std(axis=0, ddof=1) / math.sqrt(trials) if trials > 1 else np.zeros(B)
    values = np.minimum(means, 1.0)
    return VarpiTable(K, M, tuple(values), trials, tuple(errors), stream.seed)


def varpi_ratio_quadrature(K: int, a: int, b: int) -> float:
    """E[X_(b) / X_(a)] for ranks a < b by 2-D quadrature of the joint density.

    Independent of any sampling; used to check :func:`estimate_varpi`.
    """

    def inner(x):
        val, _ = integrate.quad(
            lambda y: (y / x) * joint_order_pdf_ranks(K, a, b, x, y), 0.0, x,
            epsabs=1e-13, epsrel=1e-11, limit=200,
        )
        return val

    val, _ = integrate.quad(inner, 0.0, np.inf, epsabs=1e-12, epsrel=1e-10, limit=200)
    return val
