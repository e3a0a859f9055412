"""Outage of the sub-function pair scheme with fixed power factors.

On one sub-carrier the two superposed groups reach the receiver with levels
``P*beta1*X_(a)`` and ``P*beta2*X_(b)`` (ranks ``a = M*l1 < b = M*l2``, by
default the two strongest groups). SIC decodes the stronger group first:

    SINR_1 = N P beta1 X_(a) / (1 + N P beta2 X_(b)),   SINR_2 = N P beta2 X_(b).

A sub-carrier succeeds when both sub-functions clear the target, i.e. both
SINRs exceed ``eps = 2**(R_T K N / (2M)) - N/M``. Sub-carriers fade
independently and the scheme is in outage only when every sub-carrier fails,
so ``P_out = P_sub ** N``.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import integrate

from .errors import ConfigError, NumericalError
from .fading import TrialStream, map_trials, mean_and_se
from .orderstats import joint_order_pdf, joint_order_pdf_ranks, order_stat_cdf
from .scheme import sic_sinr

CURVE_METHODS = ("analytic-quadrature", "monte-carlo", "high-snr-asymptote")

# decay of the exponential tails beyond which the integrand is < 1e-16 of its peak
_TAIL = -math.log(1e-16)


@dataclass(frozen=True)
class OutageConfig:
    K: int
    M: int
    N: int
    target_rate: float
    beta1: float = 1.0
    beta2: float = 1.0
    power_grid: tuple = ()

    def __post_init__(self):
        for name in ("K", "M", "N"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if self.K <= 2 * self.M:
            raise ConfigError(f"outage analysis needs K > 2M (K={self.K}, M={self.M})")
        if not self.target_rate > 0:
            raise ConfigError("target rate must be positive")
        if not (self.beta1 > 0 and self.beta2 > 0):
            raise ConfigError("power factors must be positive")
        grid = tuple(float(p) for p in self.power_grid)
        if any(p <= 0 for p in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("power grid must be positive and strictly ascending")
        object.__setattr__(self, "power_grid", grid)

    @property
    def epsilon(self) -> float:
        """SINR every sub-function must exceed on a sub-carrier."""
        return 2.0 ** (self.target_rate * self.K * self.N / (2 * self.M)) - self.N / self.M


def _ranks(cfg: OutageConfig, pair) -> tuple[int, int]:
    l1, l2 = pair
    B = cfg.K // cfg.M
    if not 1 <= l1 < l2 <= B:
        raise ConfigError(f"pair must satisfy 1 <= l1 < l2 <= {B}, got {pair}")
    return cfg.M * l1, cfg.M * l2


def _quad(fn, lo, hi, **kw):
    with warnings.catch_warnings():
        # convergence is judged from the returned error estimate below
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(fn, lo, hi, limit=200, **kw)
    tol = max(kw.get("epsabs", 1.49e-8), kw.get("epsrel", 1.49e-8) * abs(val))
    if err > 100 * tol:
        raise NumericalError(f"quadrature did not converge (estimate {val:.3e}, error {err:.1e})", err)
    return val


def _kinks(cfg: OutageConfig, P: float, y0: float, y_hi: float) -> list[float]:
    # y where phi1 or phi2 crosses the diagonal x = y; the integrands have corners there
    eps, ratio = cfg.epsilon, cfg.beta2 / cfg.beta1
    out = []
    slope = eps * ratio
    if slope < 1:
        out.append(eps / (cfg.N * P * cfg.beta1) / (1 - slope))
    if ratio < 1:
        out.append((1 / ratio - 1) / (cfg.N * P * cfg.beta2))
    return sorted(y for y in out if y0 < y < y_hi)


def _y_upper(K: int, b: int, y0: float) -> float:
    # X_(b) has density ~ exp(-b y) beyond its mode, which lies below ln K + 1
    return max(y0, math.log(K) + 1.0) + _TAIL / b


def pair_outage_subcarrier(cfg: OutageConfig, P: float, pair=(1, 2)) -> float:
    """Per-sub-carrier outage of groups ``pair`` by direct quadrature of the failure region.

    Failure is ``X_(b) < y0`` (second stage fails) or ``X_(a) < phi1(X_(b))``
    (first stage fails), with ``y0 = eps/(N P beta2)`` and
    ``phi1(y) = eps/(N P beta1) + eps (beta2/beta1) y``.
    """
    if not P > 0:
        raise ConfigError("P must be positive")
    a, b = _ranks(cfg, pair)
    eps = cfg.epsilon
    if eps <= 0:
        return 0.0
    K, N = cfg.K, cfg.N
    y0 = eps / (N * P * cfg.beta2)
    second = order_stat_cdf(K, b, y0)
    offset = eps / (N * P * cfg.beta1)
    slope = eps * cfg.beta2 / cfg.beta1
    y_hi = offset / (1 - slope) if slope < 1 else _y_upper(K, b, y0)
    if y_hi <= y0:
        return min(second, 1.0)

    def inner(y):
        top = offset + slope * y
        if top <= y:
            return 0.0
        return _quad(lambda x: joint_order_pdf_ranks(K, a, b, x, y), y, top, epsabs=0.0, epsrel=1e-10)

    first = _quad(inner, y0, y_hi, epsabs=0.0, epsrel=1e-9)
    return min(second + first, 1.0)


def outage_subcarrier_analytic(cfg: OutageConfig, P: float) -> float:
    """Per-sub-carrier outage of the two strongest groups."""
    return pair_outage_subcarrier(cfg, P, (1, 2))


def outage_analytic(cfg: OutageConfig, P: float) -> float:
    return outage_subcarrier_analytic(cfg, P) ** cfg.N


def pair_outage_analytic(cfg: OutageConfig, P: float, pair) -> float:
    return pair_outage_subcarrier(cfg, P, pair) ** cfg.N


def success_regions(cfg: OutageConfig, P: float) -> tuple[float, float]:
    """Probabilities of the two success events of the strongest pair.

    ``alpha1``: both stages clear the target and the second sub-function
    decodes faster; ``alpha2``: both clear it and the first decodes faster.
    Their sum is one minus the per-sub-carrier outage.
    """
    K, M, N = cfg.K, cfg.M, cfg.N
    eps = cfg.epsilon
    if eps <= 0:
        return 1.0, 0.0  # success is certain; the split is immaterial
    ratio = cfg.beta2 / cfg.beta1
    y0 = eps / (N * P * cfg.beta2)
    y_hi = _y_upper(K, 2 * M, y0)

    def phi1(y):
        return eps / (N * P * cfg.beta1) + eps * ratio * y

    def phi2(y):
        return ratio * y * (1 + N * P * cfg.beta2 * y)

    def density(x, y):
        return joint_order_pdf(K, M, x, y)

    def x_upper(y, lo):
        # given X_(2M) = y, X_(M) decays like exp(-M x) past y + ln M + 1
        return max(lo, y + math.log(M) + 1.0) + _TAIL / M

    def inner1(y):
        lo = max(y, phi1(y))
        hi = min(max(y, phi2(y)), x_upper(y, lo))
        return _quad(lambda x: density(x, y), lo, hi, epsabs=1e-13) if hi > lo else 0.0

    def inner2(y):
        lo = max(y, phi2(y))
        return _quad(lambda x: density(x, y), lo, x_upper(y, lo), epsabs=1e-13)

    kinks = _kinks(cfg, P, y0, y_hi) or None
    alpha1 = _quad(inner1, y0, y_hi, epsabs=1e-12, points=kinks)
    alpha2 = _quad(inner2, y0, y_hi, epsabs=1e-12, points=kinks)
    return alpha1, alpha2


def success_regions_series(cfg: OutageConfig, P: float) -> tuple[float, float]:
    """Same as :func:`success_regions` through the binomial expansion of the density.

    The expansion turns the inner integrals into exponentials; the
    alternating signs cancel badly for large K, so keep K small.
    """
    K, M, N = cfg.K, cfg.M, cfg.N
    eps = cfg.epsilon
    if eps <= 0:
        return 1.0, 0.0
    ratio = cfg.beta2 / cfg.beta1
    y0 = eps / (N * P * cfg.beta2)
    y_hi = _y_upper(K, 2 * M, y0)
    theta = math.factorial(K) / (math.factorial(M - 1) ** 2 * math.factorial(K - 2 * M))
    terms = []
    for u1 in range(M):
        for u2 in range(K - 2 * M + 1):
            coef = math.comb(M - 1, u1) * math.comb(K - 2 * M, u2) * (-1) ** (K - 2 * M + u1 - u2)
            terms.append((coef, M + u1, K - M - u1 - u2))

    def phi1(y):
        return eps / (N * P * cfg.beta1) + eps * ratio * y

    def phi2(y):
        return ratio * y * (1 + N * P * cfg.beta2 * y)

    def g1(y):
        lo, hi = max(y, phi1(y)), max(y, phi2(y))
        return sum(c * (math.exp(-ex * lo) - math.exp(-ex * hi)) / ex * math.exp(-ey * y) for c, ex, ey in terms)

    def g2(y):
        lo = max(y, phi2(y))
        return sum(c * math.exp(-ex * lo) / ex * math.exp(-ey * y) for c, ex, ey in terms)

    kinks = _kinks(cfg, P, y0, y_hi) or None
    return (theta * _quad(g1, y0, y_hi, epsabs=1e-13, points=kinks),
            theta * _quad(g2, y0, y_hi, epsabs=1e-13, points=kinks))


def outage_high_snr(cfg: OutageConfig, P: float) -> float:
    """Leading high-power term of the outage: the second stage failing.

    P{X_(2M) < y0} ~ C(K, K-2M+1) y0^(K-2M+1) per sub-carrier.
    """
    eps = cfg.epsilon
    if eps <= 0:
        return 0.0
    order = cfg.K - 2 * cfg.M + 1
    y0 = eps / (cfg.N * P * cfg.beta2)
    return (math.comb(cfg.K, order) * y0**order) ** cfg.N


def _pair_failures(x, cfg: OutageConfig, P: float, a: int, b: int, eps: float):
    levels = np.stack([P * cfg.beta1 * x[..., a - 1], P * cfg.beta2 * x[..., b - 1]], axis=-1)
    sinr = sic_sinr(levels, cfg.N)
    s1, s2 = sinr[..., 0], sinr[..., 1]
    second_faster = (s1 > eps) & (s2 > s1)
    first_faster = (s2 > eps) & (s1 > s2)
    failed = ~(second_faster | first_faster)
    return failed.all(axis=-1).astype(float)


def pair_choice_outage(cfg: OutageConfig, P: float, pair, trials: int, stream: TrialStream,
                       workers: int = 1) -> tuple[float, float]:
    """Monte Carlo outage when groups ``pair = (l1, l2)`` share each sub-carrier.

    Returns ``(probability, standard_error)``.
    """
    if trials < 1:
        raise ConfigError("trials must be positive")
    if not P > 0:
        raise ConfigError("P must be positive")
    a, b = _ranks(cfg, pair)
    eps = cfg.epsilon
    if eps <= 0:
        return 0.0, 0.0
    outcomes = map_trials(lambda x: _pair_failures(x, cfg, P, a, b, eps), stream, trials, cfg.N, cfg.K, workers)
    return mean_and_se(outcomes)


def outage_mc(cfg: OutageConfig, P: float, trials: int, stream: TrialStream, workers: int = 1):
    """Monte Carlo outage of the two strongest groups: ``(probability, standard_error)``."""
    return pair_choice_outage(cfg, P, (1, 2), trials, stream, workers)


@dataclass(frozen=True)
class OutageCurve:
    """Outage probability against linear power."""

    points: tuple
    method: str
    std_errors: Optional[tuple] = None
    fitted_slope: Optional[float] = None

    def __post_init__(self):
        if self.method not in CURVE_METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        points = tuple((float(p), float(q)) for p, q in self.points)
        object.__setattr__(self, "points", points)
        if any(not 0.0 <= q <= 1.0 for _, q in points):
            raise ValueError("outage probabilities must lie in [0, 1]")
        ses = self.std_errors or (0.0,) * len(points)
        for (_, q0), (_, q1), s0, s1 in zip(points, points[1:], ses, ses[1:]):
            slack = 3 * math.hypot(s0, s1) if self.method == "monte-carlo" else 1e-9
            if q1 > q0 + slack:
                raise ValueError("outage must not increase with power")

    @property
    def powers(self) -> np.ndarray:
        return np.array([p for p, _ in self.points])

    @property
    def outages(self) -> np.ndarray:
        return np.array([q for _, q in self.points])

    def with_slope(self, window) -> "OutageCurve":
        return OutageCurve(self.points, self.method, self.std_errors, diversity_fit(self, window))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["P_linear", "P_dB", "outage", "std_error", "method"])
        ses = self.std_errors or (None,) * len(self.points)
        for (p, q), se in zip(self.points, ses):
            writer.writerow([f"{p:.10g}", f"{10 * math.log10(p):.6g}", f"{q:.10e}",
                             "" if se is None else f"{se:.6e}", self.method])
        return buf.getvalue()


def outage_curve(cfg: OutageConfig, method: str = "analytic-quadrature", trials: int = 1_000_000,
                 stream: TrialStream | None = None, pair=(1, 2), workers: int = 1) -> OutageCurve:
    """Evaluate the outage over ``cfg.power_grid``."""
    if not cfg.power_grid:
        raise ConfigError("power grid is empty")
    if method == "analytic-quadrature":
        values = [pair_outage_analytic(cfg, P, pair) for P in cfg.power_grid]
        return OutageCurve(tuple(zip(cfg.power_grid, values)), method)
    if method == "high-snr-asymptote":
        if tuple(pair) != (1, 2):
            raise ConfigError("the high-SNR overlay covers the strongest pair only")
        values = [min(outage_high_snr(cfg, P), 1.0) for P in cfg.power_grid]
        return OutageCurve(tuple(zip(cfg.power_grid, values)), method)
    if method == "monte-carlo":
        if stream is None:
            raise ConfigError("monte-carlo curves need a stream")
        est = [pair_choice_outage(cfg, P, pair, trials, stream, workers) for P in cfg.power_grid]
        return OutageCurve(tuple(zip(cfg.power_grid, [e[0] for e in est])), method, tuple(e[1] for e in est))
    raise ConfigError(f"unknown method {method!r}")


def diversity_fit(curve: OutageCurve | Sequence, window) -> float:
    """Negated least-squares slope of log10(outage) against log10(P) inside ``window``.

    ``curve`` is an :class:`OutageCurve` or a sequence of ``(P, outage)`` pairs.
    """
    points = curve.points if isinstance(curve, OutageCurve) else tuple(curve)
    lo, hi = window
    inside = [(p, q) for p, q in points if lo <= p <= hi]
    if any(q <= 0 for _, q in inside):
        raise ValueError("zero outage inside the fitting window")
    if len(inside) < 3:
        raise ValueError(f"need at least 3 points in the window, got {len(inside)}")
    logp = np.log10([p for p, _ in inside])
    logq = np.log10([q for _, q in inside])
    slope = np.polyfit(logp, logq, 1)[0]
    return float(-slope)
