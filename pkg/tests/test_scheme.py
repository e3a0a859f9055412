import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nomacomac.closedform import nb_rate, noma_pair_samples, wb_rate_samples
from nomacomac.errors import ConfigError
from nomacomac.fading import ChannelBlock, SystemConfig, TrialStream, draw_block
from nomacomac.orderstats import VarpiTable, estimate_varpi
from nomacomac.scheme import (
    allocate_power,
    beta_pair,
    beta_pair_array,
    enumeration_counts,
    ergodic_rate_mc,
    group_nodes,
    node_power_profile,
    sic_rates,
    sic_sinr,
    sub_function_rate,
    superposition_rate,
    symbol_rate,
    symbol_rate_samples,
)


def _brute_counts(K, M, L):
    nodes = range(K)
    subsets = list(itertools.combinations(nodes, M))
    superpositions = [
        seq for seq in itertools.permutations(subsets, L)
        if len(set().union(*map(set, seq))) == L * M
    ]
    tiling = [seq for seq in superpositions if len(set().union(*map(set, seq))) == K]
    return len(subsets), len(superpositions), len(tiling)


@pytest.mark.parametrize("K,M,L", [(2, 1, 2), (4, 2, 1), (4, 1, 2), (6, 2, 2), (6, 3, 2), (6, 2, 3), (5, 1, 3)])
def test_set_sizes_against_enumeration(K, M, L):
    S, H, X = enumeration_counts(K, M, L)
    bS, bH, bX = _brute_counts(K, M, L)
    assert (S, H) == (bS, bH)
    if (K // M) == L:
        # one superposition tiles everything: the combination count is exact
        assert X == bX


def test_combination_count_examples():
    assert enumeration_counts(2, 1, 2) == (2, 2, 2)
    assert enumeration_counts(4, 2, 1)[0] == 6
    assert enumeration_counts(4, 1, 2)[1] == 12
    assert enumeration_counts(6, 2, 2)[2] is None  # B = 3 not divisible by L
    with pytest.raises(ConfigError):
        enumeration_counts(5, 2, 1)


def test_sic_sinr_by_hand():
    levels = np.array([3.0, 2.0, 0.5])
    N = 2
    expected = [N * 3 / (1 + N * 2.5), N * 2 / (1 + N * 0.5), N * 0.5]
    np.testing.assert_allclose(sic_sinr(levels, N), expected)
    rates = sic_rates(levels, N, 1)
    np.testing.assert_allclose(rates, [max(0.5 * math.log2(N + s), 0) / N for s in expected])


def test_superposition_rate():
    assert superposition_rate([0.4, 0.2, 0.9]) == 0.2
    with pytest.raises(ValueError):
        superposition_rate([])
    with pytest.raises(ValueError):
        superposition_rate([0.1, -0.2])


def test_group_nodes_follow_ranks():
    block = ChannelBlock(np.array([[0.1], [0.7], [0.4], [1.5]]))
    groups = group_nodes(block, 2, 1)
    assert groups.groups[0] == ((4, 2), (3, 1))
    assert groups.chosen(0) == ((4, 2),)


def _varpi(K, M, trials=20_000, seed=0):
    return estimate_varpi(K, M, trials, TrialStream(seed, 1))


def test_members_arrive_at_common_level():
    cfg = SystemConfig(12, 3, 2, 2, 5.0)
    varpi = _varpi(12, 3)
    block = draw_block(cfg, TrialStream(1), 3)
    plan = allocate_power(block, cfg, varpi, [0.7, 1.0])
    for g in range(cfg.N):
        rx = block.gains[:, g] * plan.powers[:, g]
        ranks = block.ranks[g]
        for l in range(cfg.L):
            members = ranks[cfg.M * l: cfg.M * (l + 1)] - 1
            np.testing.assert_allclose(rx[members], rx[members[0]])
        assert (plan.powers[ranks[cfg.L * cfg.M:] - 1, g] == 0).all()


def test_power_budget_identity_with_fixed_betas():
    # with block-independent factors the budget holds exactly in expectation
    cfg = SystemConfig(16, 4, 2, 2, 10.0, trials=200_000, seed=5)
    varpi = _varpi(16, 4, 400_000, 9)
    mean, se = node_power_profile(cfg, "equal-beta", TrialStream(5), varpi)
    target = cfg.P / cfg.N
    # sampling error of the powers plus the error carried in from the estimated constants
    rel_varpi = max(e / v for e, v in zip(varpi.standard_errors, varpi.values))
    tol = 3 * (np.sqrt((se**2).sum()) / cfg.K + target * rel_varpi)
    assert abs(mean.mean() - target) < tol


def test_beta_pair_equalises_rates():
    rng = np.random.default_rng(0)
    cfg = SystemConfig(16, 4, 2, 4, 10.0)
    varpi = _varpi(16, 4)
    for _ in range(200):
        block = ChannelBlock(rng.exponential(size=(16, 4)))
        x = block.sorted_gains()
        betas = np.array([beta_pair(x[g, 3], x[g, 7], varpi[1], varpi[2], cfg) for g in range(4)])
        plan = allocate_power(block, cfg, varpi, betas)
        for g in range(4):
            r1 = sub_function_rate(block, plan, g, 1, cfg)
            r2 = sub_function_rate(block, plan, g, 2, cfg)
            assert abs(r1 - r2) < 1e-10


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 20), st.floats(0.01, 1.0), st.floats(0.3, 1.0), st.floats(0.3, 1.0), st.floats(0.01, 1e4))
def test_beta_pair_solves_quadratic(strong, frac, w1, w2, load):
    weak = strong * frac
    b1 = beta_pair_array(strong, weak, w1, w2, load)
    assert b1 > 0
    # equal-rate condition with beta2 = 1 written in the levels A = strong-level, B = weak-level
    norm = b1 * w1 + w2
    A = b1 * load * strong / norm
    Bl = load * weak / norm
    assert A / (1 + Bl) == pytest.approx(Bl, rel=1e-8)


def test_block_api_matches_batch_pipeline():
    cfg = SystemConfig(16, 4, 2, 4, 10.0, trials=50, seed=3)
    varpi = _varpi(16, 4)
    stream = TrialStream(3)
    batch = symbol_rate_samples(cfg, "pair-optimal", stream, varpi)
    for trial in (0, 17, 49):
        block = draw_block(cfg, stream, trial)
        x = block.sorted_gains()
        betas = [beta_pair(x[g, 3], x[g, 7], varpi[1], varpi[2], cfg) for g in range(cfg.N)]
        plan = allocate_power(block, cfg, varpi, betas)
        assert symbol_rate(block, plan, cfg) == pytest.approx(batch[trial], abs=1e-12)


@pytest.mark.parametrize("K,M,N", [(8, 2, 1), (16, 4, 4), (12, 3, 2)])
def test_single_group_reduces_to_oma_rates(K, M, N):
    cfg = SystemConfig(K, M, 1, N, 10.0, trials=5000, seed=1)
    varpi = _varpi(K, M)
    pipe = symbol_rate_samples(cfg, "equal-beta", TrialStream(1), varpi)
    wb = wb_rate_samples(K, M, N, 10.0, varpi, 5000, TrialStream(1))
    assert np.abs(pipe - wb).max() < 1e-12


def test_pair_pipeline_matches_closed_form_trialwise():
    cfg = SystemConfig(32, 8, 2, 4, 10.0, trials=5000, seed=2)
    varpi = _varpi(32, 8)
    pipe = symbol_rate_samples(cfg, "pair-optimal", TrialStream(2), varpi)
    closed = noma_pair_samples(32, 8, 4, 10.0, varpi, 5000, TrialStream(2))
    assert np.abs(pipe - closed).max() < 1e-12


def test_ergodic_rate_estimate_fields():
    cfg = SystemConfig(8, 2, 2, 2, 10.0, trials=3000)
    est = ergodic_rate_mc(cfg, "pair-optimal", TrialStream(0))
    assert est.method == "monte-carlo" and est.trials == 3000 and est.std_error > 0
    with pytest.raises(ConfigError):
        ergodic_rate_mc(cfg, "greedy", TrialStream(0))
    with pytest.raises(ConfigError):
        ergodic_rate_mc(SystemConfig(12, 2, 2), "pair-optimal", TrialStream(0), _varpi(8, 2))


def test_api_errors():
    cfg = SystemConfig(8, 2, 2, 1)
    varpi = _varpi(8, 2, 1000)
    block = draw_block(cfg, TrialStream(0))
    with pytest.raises(ValueError):
        allocate_power(block, cfg, varpi, [0.0, 0.0])
    plan = allocate_power(block, cfg, varpi, [1.0, 1.0])
    with pytest.raises(IndexError):
        sub_function_rate(block, plan, 0, 3, cfg)
    with pytest.raises(IndexError):
        sub_function_rate(block, plan, 1, 1, cfg)
    with pytest.raises(ValueError):
        beta_pair(0.1, 0.5, 1.0, 1.0, cfg)


def test_beta_pair_hand_value_and_small_power_limit():
    assert beta_pair_array(1.0, 1.0, 0.5, 0.5, 4.0) == pytest.approx(3.0)
    strong, weak = 2.0, 0.5
    assert beta_pair_array(strong, weak, 0.7, 0.6, 1e-12) == pytest.approx(weak / strong, rel=1e-6)


def test_single_node_spends_whole_budget():
    cfg = SystemConfig(1, 1, 1, 1, 7.0)
    varpi = VarpiTable(1, 1, (1.0,), 1, (0.0,))
    plan = allocate_power(ChannelBlock(np.array([[0.37]])), cfg, varpi, [1.0])
    assert plan.powers[0, 0] == pytest.approx(7.0)


def test_symbol_rate_hand_computed_block():
    gains = np.array([[0.9, 0.2], [0.3, 1.4], [1.7, 0.6], [0.1, 0.8]])
    cfg = SystemConfig(4, 1, 2, 2, 10.0)
    varpi = VarpiTable(4, 1, (1.0,) * 4, 1, (0.0,) * 4)
    block = ChannelBlock(gains)
    plan = allocate_power(block, cfg, varpi, [1.0, 1.0])
    total = 0.0
    c = 4 * 10.0 / (2 * 1 * 2)  # K P / (N M sum(beta varpi)) with unit betas and varpi
    for g in range(2):
        x1, x2 = sorted(gains[:, g], reverse=True)[:2]
        # each chosen node transmits c and arrives at c times its own gain
        r1 = max(0.5 * math.log2(2 + 2 * c * x1 / (1 + 2 * c * x2)), 0) / 2
        r2 = max(0.5 * math.log2(2 + 2 * c * x2), 0) / 2
        total += min(r1, r2)
        assert plan.powers[list(gains[:, g]).index(x1), g] == pytest.approx(c)
    assert symbol_rate(block, plan, cfg) == pytest.approx(1 * 2 / 4 * total)
