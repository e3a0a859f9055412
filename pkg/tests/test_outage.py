import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nomacomac.errors import ConfigError
from nomacomac.fading import TrialStream, map_trials
from nomacomac.outage import (
    OutageConfig,
    OutageCurve,
    diversity_fit,
    outage_analytic,
    outage_curve,
    outage_high_snr,
    outage_mc,
    outage_subcarrier_analytic,
    pair_choice_outage,
    pair_outage_analytic,
    success_regions,
    success_regions_series,
)


def test_config_invariants():
    cfg = OutageConfig(3, 1, 1, 0.5)
    assert cfg.epsilon == pytest.approx(2 ** 0.75 - 1)
    for bad in (dict(K=2, M=1), dict(K=4, M=2), dict(beta1=0.0), dict(target_rate=0.0),
                dict(power_grid=(10.0, 1.0)), dict(power_grid=(-1.0,))):
        kw = dict(K=3, M=1, N=1, target_rate=0.5)
        kw.update(bad)
        with pytest.raises(ConfigError):
            OutageConfig(**kw)


def test_non_positive_threshold_never_fails():
    cfg = OutageConfig(5, 1, 4, 0.01)  # 2^(0.1) - 4 < 0
    assert cfg.epsilon < 0
    assert outage_analytic(cfg, 1.0) == 0.0
    assert outage_mc(cfg, 1.0, 100, TrialStream(0)) == (0.0, 0.0)


def _brute_subcarrier(cfg, P, pair, n=400_000, seed=13):
    # direct sampling of the SIC condition on one sub-carrier, written out by hand
    a, b = cfg.M * pair[0], cfg.M * pair[1]
    x = map_trials(lambda s: s[:, 0, [a - 1, b - 1]], TrialStream(seed), n, 1, cfg.K).reshape(n, 2)
    s1 = cfg.N * P * cfg.beta1 * x[:, 0] / (1 + cfg.N * P * cfg.beta2 * x[:, 1])
    s2 = cfg.N * P * cfg.beta2 * x[:, 1]
    fail = (np.minimum(s1, s2) <= cfg.epsilon).astype(float)
    return fail.mean(), fail.std(ddof=1) / math.sqrt(n)


@pytest.mark.parametrize("K,M,rt,b1,b2,P,pair", [
    (3, 1, 0.5, 1.0, 1.0, 10.0, (1, 2)),
    (6, 2, 0.2, 1.0, 1.0, 3.0, (1, 2)),
    (5, 1, 0.4, 2.0, 0.5, 10.0, (1, 2)),
    (10, 1, 0.1, 1.0, 1.0, 1.0, (2, 5)),
    (4, 1, 0.6, 1.0, 1.0, 30.0, (1, 2)),  # interference floor: eps * beta2/beta1 > 1
])
def test_subcarrier_quadrature_against_sampling(K, M, rt, b1, b2, P, pair):
    cfg = OutageConfig(K, M, 1, rt, b1, b2)
    p, se = _brute_subcarrier(cfg, P, pair)
    assert abs(pair_outage_analytic(cfg, P, pair) - p) < 3.5 * se


@pytest.mark.parametrize("K,M,N,rt", [(3, 1, 1, 0.5), (4, 1, 2, 0.3), (6, 2, 1, 0.2), (7, 3, 1, 0.1)])
@pytest.mark.parametrize("db", [0.0, 10.0, 20.0])
def test_failure_region_complements_success_regions(K, M, N, rt, db):
    cfg = OutageConfig(K, M, N, rt)
    P = 10 ** (db / 10)
    a1, a2 = success_regions(cfg, P)
    s1, s2 = success_regions_series(cfg, P)
    direct = outage_subcarrier_analytic(cfg, P)
    assert direct == pytest.approx(1 - a1 - a2, abs=1e-8)
    assert a1 == pytest.approx(s1, abs=1e-8)
    assert a2 == pytest.approx(s2, abs=1e-8)


def test_all_subcarriers_must_fail():
    cfg = OutageConfig(4, 1, 2, 0.3)
    P = 1.0
    assert outage_analytic(cfg, P) == pytest.approx(outage_subcarrier_analytic(cfg, P) ** 2)
    p, se = outage_mc(cfg, P, 400_000, TrialStream(2))
    assert abs(p - outage_analytic(cfg, P)) < 3 * se


def test_mc_against_analytic_low_snr():
    cfg = OutageConfig(3, 1, 1, 0.5)
    for P in (1.0, 10.0):
        p, se = outage_mc(cfg, P, 200_000, TrialStream(5))
        assert abs(p - outage_analytic(cfg, P)) < 3 * se


@pytest.mark.parametrize("K,M,N,rt", [(3, 1, 1, 0.5), (4, 1, 2, 0.3), (7, 2, 1, 0.2), (5, 1, 2, 0.25)])
def test_diversity_is_n_times_k_minus_2m_plus_1(K, M, N, rt):
    cfg = OutageConfig(K, M, N, rt, power_grid=tuple(10 ** (d / 10) for d in (30, 32.5, 35, 37.5, 40)))
    slope = diversity_fit(outage_curve(cfg), (1e3, 1e4))
    assert slope == pytest.approx(N * (K - 2 * M + 1), rel=0.02)


def test_high_snr_overlay_is_leading_term():
    cfg = OutageConfig(5, 1, 2, 0.25)
    for P in (1e3, 1e4):
        assert outage_high_snr(cfg, P) == pytest.approx(outage_analytic(cfg, P), rel=0.05)


def test_interference_floor():
    cfg = OutageConfig(4, 1, 2, 0.5)  # eps = 2 > 1: first stage fails even at infinite power
    assert cfg.epsilon * cfg.beta2 / cfg.beta1 > 1
    high = outage_analytic(cfg, 1e6)
    assert high > 0.1
    assert outage_analytic(cfg, 1e8) == pytest.approx(high, rel=1e-3)


def test_pair_choice_mc_matches_analytic():
    cfg = OutageConfig(10, 1, 1, 0.1)
    for pair in ((1, 2), (1, 4), (3, 5)):
        p, se = pair_choice_outage(cfg, 1.0, pair, 200_000, TrialStream(7))
        assert abs(p - pair_outage_analytic(cfg, 1.0, pair)) < 3 * se
    with pytest.raises(ConfigError):
        pair_choice_outage(cfg, 1.0, (2, 2), 10, TrialStream(0))
    with pytest.raises(ConfigError):
        pair_outage_analytic(cfg, 1.0, (1, 11))


def test_mc_is_worker_invariant():
    cfg = OutageConfig(4, 1, 2, 0.3)
    a = outage_mc(cfg, 1.0, 10_000, TrialStream(3))
    b = outage_mc(cfg, 1.0, 10_000, TrialStream(3), workers=3)
    assert a == b


@settings(max_examples=15, deadline=None)
@given(st.integers(3, 7), st.floats(0.05, 0.5), st.floats(-5, 25), st.floats(0.5, 5))
def test_analytic_outage_decreases_with_power(K, rt, db, step):
    cfg = OutageConfig(K, 1, 1, rt)
    P = 10 ** (db / 10)
    lo, hi = outage_analytic(cfg, P), outage_analytic(cfg, P * 10 ** (step / 10))
    assert 0.0 <= hi <= lo + 1e-9 <= 1.0 + 1e-9


def test_diversity_fit_on_synthetic_curve():
    pts = [(p, 7.0 * p ** -3) for p in (10, 100, 1000, 10000)]
    assert diversity_fit(pts, (10, 1e4)) == pytest.approx(3.0)
    with pytest.raises(ValueError):
        diversity_fit(pts, (100, 1000))
    with pytest.raises(ValueError):
        diversity_fit([(1, 0.1), (2, 0.0), (3, 0.01)], (1, 3))


def test_curve_invariants_and_csv():
    curve = OutageCurve(((1.0, 0.5), (10.0, 0.1)), "analytic-quadrature")
    text = curve.to_csv().splitlines()
    assert text[0] == "P_linear,P_dB,outage,std_error,method"
    assert text[2].startswith("10,10,1.0000000000e-01,,")
    with pytest.raises(ValueError):
        OutageCurve(((1.0, 0.1), (10.0, 0.5)), "analytic-quadrature")
    with pytest.raises(ValueError):
        OutageCurve(((1.0, 1.5),), "analytic-quadrature")
    # MC noise within 3 standard errors is tolerated
    OutageCurve(((1.0, 0.10), (10.0, 0.101)), "monte-carlo", (0.001, 0.001))


def test_outage_curve_methods():
    cfg = OutageConfig(3, 1, 1, 0.5, power_grid=(10.0, 100.0, 1000.0))
    mc = outage_curve(cfg, "monte-carlo", 20_000, TrialStream(0))
    assert mc.std_errors is not None and len(mc.points) == 3
    with pytest.raises(ConfigError):
        outage_curve(cfg, "monte-carlo")
    with pytest.raises(ConfigError):
        outage_curve(OutageConfig(3, 1, 1, 0.5))
    assert outage_curve(cfg, "high-snr-asymptote").with_slope((10, 1000)).fitted_slope == pytest.approx(2.0)


def test_large_target_rate_means_certain_outage():
    cfg = OutageConfig(3, 1, 1, 20.0)
    assert outage_analytic(cfg, 100.0) == pytest.approx(1.0, abs=1e-12)


def test_three_node_example_at_20db():
    cfg = OutageConfig(3, 1, 1, 0.5)
    p, se = outage_mc(cfg, 100.0, 1_000_000, TrialStream(17))
    assert abs(p - outage_analytic(cfg, 100.0)) < 3 * se


def test_outage_power_law_over_subcarriers_and_small_power():
    one = OutageConfig(4, 1, 1, 0.3)
    assert outage_analytic(one, 5.0) == outage_subcarrier_analytic(one, 5.0)
    cfg = OutageConfig(6, 1, 3, 0.1)
    p = outage_subcarrier_analytic(cfg, 2.0)
    assert outage_analytic(cfg, 2.0) == pytest.approx(p**3)
    assert outage_analytic(OutageConfig(3, 1, 1, 0.5), 1e-6) == pytest.approx(1.0, abs=1e-9)
