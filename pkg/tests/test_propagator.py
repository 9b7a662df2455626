import numpy as np
import pytest

import bookimpact.propagator as prop
import bookimpact.sim as sim
import bookimpact.stats as bstats
from bookimpact.errors import DimensionMismatch, SingularSystem
from bookimpact.stats import CorrelationSet, ResponseSet


def analytic_corr(probs, max_lag, signed=None):
    c = np.zeros((6, 6, max_lag + 1))
    np.fill_diagonal(c[:, :, 0],
                     np.where(probs > 0, 1.0 / np.where(probs > 0, probs, 1),
                              0.0))
    if signed is not None:
        c = signed
    return CorrelationSet(
        max_lag=max_lag, n_events=10 ** 6, same_day_only=True,
        probabilities=probs, type_counts=(probs * 10 ** 6).astype(np.int64),
        signed=c, unsigned=np.zeros_like(c),
        sign_autocorr=np.zeros(max_lag + 1),
        side_autocorr=np.zeros(max_lag + 1),
        pair_counts=np.ones((6, 6, max_lag + 1), np.int64),
        pair_totals=np.ones(max_lag + 1, np.int64),
        signed_pair_sums=np.zeros((6, 6, max_lag + 1), np.int64),
        sign_mean_by_type=np.zeros(6),
        low_count=np.zeros((6, 6, max_lag + 1), bool))


def flat_response(probs, target, max_lag):
    r = np.tile(np.asarray(target, dtype=float)[:, None], (1, max_lag + 1))
    r[:, 0] = 0.0
    return ResponseSet(max_lag=max_lag, same_day_only=True,
                       probabilities=probs, response=r)


def test_analytic_delta_correlations_reduce_to_identity():
    probs = np.full(6, 1.0 / 6.0)
    target = np.array([0.0, 0.4, 0.0, 0.0, 0.7, 0.3])
    corr = analytic_corr(probs, 40)
    resp = flat_response(probs, target, 40)
    ps = prop.solve_multi_event(corr, resp, lam=0.0)
    assert np.abs(ps.propagators - target[:, None]).max() < 1e-12
    assert ps.condition_estimate is not None
    # forward map reproduces the flat response exactly
    rhat = prop.apply_forward(corr, ps.propagators)
    assert np.abs(rhat - resp.response).max() < 1e-12


def test_ridge_limit_shrinks_to_zero():
    probs = np.full(6, 1.0 / 6.0)
    corr = analytic_corr(probs, 20)
    resp = flat_response(probs, np.full(6, 0.5), 20)
    ps = prop.solve_multi_event(corr, resp, lam=1e12)
    assert np.abs(ps.propagators).max() < 1e-6


@pytest.mark.filterwarnings("ignore::scipy.linalg.LinAlgWarning")
def test_singular_system_raises():
    probs = np.full(6, 1.0 / 6.0)
    corr = analytic_corr(probs, 10)
    corr.signed[:, :, 0] = 0.0         # kill the diagonal: singular system
    resp = flat_response(probs, np.full(6, 0.5), 10)
    with pytest.raises(SingularSystem):
        prop.solve_multi_event(corr, resp, lam=0.0)


def test_dimension_mismatch():
    probs = np.full(6, 1.0 / 6.0)
    corr = analytic_corr(probs, 10)
    resp = flat_response(probs, np.full(6, 0.5), 20)
    with pytest.raises(DimensionMismatch):
        prop.solve_multi_event(corr, resp)


def test_iid_stream_recovery(iid_stream):
    corr = bstats.estimate_correlations(iid_stream, max_lag=300,
                                        n_bootstrap=0)
    resp = bstats.estimate_response(iid_stream, max_lag=300, n_bootstrap=0)
    ps = prop.solve_multi_event(corr, resp)
    band = slice(0, 100)
    for code in (1, 4, 5):
        rel = np.sqrt(((ps.propagators[code, band] - 0.5) ** 2).mean()) / 0.5
        assert rel < 0.05
    assert ps.reliable_lag == 100
    rhat = prop.apply_forward(corr, ps.propagators)
    resid = np.linalg.norm(rhat[:, 1:] - resp.response[:, 1:])
    assert resid / np.linalg.norm(resp.response[:, 1:]) < 1e-3


def test_single_event_delta_autocorr():
    L = 50
    c = np.zeros(L + 1)
    c[0] = 1.0
    r = np.full(L + 1, 0.3)
    r[0] = 0.0
    base = prop.solve_single_event(r, c, lam=0.0)
    assert np.abs(base.kernel - 0.3).max() < 1e-12


def test_single_event_constant_response():
    L = 30
    c = np.zeros(L + 1)
    c[0] = 2.0                          # non-unit flow variance
    r = np.concatenate([[0.0], np.full(L, 0.8)])
    base = prop.solve_single_event(r, c, lam=0.0)
    assert np.abs(base.kernel - 0.4).max() < 1e-12


def test_baseline_equivalence_market_orders_only():
    # a stream of market orders only: the multi-event solve restricted to
    # the one present type equals the single-flow deconvolution
    cfg = sim.GeneratorConfig(
        n_events=200_000, seed=21, n_days=1,
        type_probabilities=np.array([0.0, 1.0, 0.0, 0.0, 0.0, 0.0]),
        sign_process="per_type", sign_persistence=np.full(6, 0.7),
        gap_process="constant",
        delta_r=np.array([0.0, 0.5, 0.0, 0.0, 0.5, 0.5]))
    s = sim.generate(cfg)
    L = 200
    corr = bstats.estimate_correlations(s, max_lag=L, n_bootstrap=0)
    resp = bstats.estimate_response(s, max_lag=L, n_bootstrap=0)
    lam = 1e-6
    multi = prop.solve_multi_event(corr, resp, lam=lam)
    prices, flow, days = prop.market_order_flow(s)
    prices = np.append(prices, s.mid_after[-1])   # close the trade-time path
    r = prop.series_response(prices, flow, L, days)
    c = prop.series_autocorr(flow, L, days)
    single = prop.solve_single_event(r, c, lam=lam)
    assert np.abs(multi.propagators[1] - single.kernel).max() < 1e-9


def test_exponent_relation_gamma_half():
    rng = np.random.default_rng(33)
    n = 400_000
    gamma = 0.5
    eps = sim.longmem_signs(n, gamma, rng).astype(float)
    kernel = sim.power_law_kernel(2000, (1 - gamma) / 2)
    p = sim.propagator_price(eps, kernel)
    L = 600
    r = prop.series_response(p, eps, L)
    c = prop.series_autocorr(eps, L)
    base = prop.solve_single_event(r, c)
    lags = np.arange(10, 301)
    slope = np.polyfit(np.log(lags),
                       np.log(np.clip(base.kernel[9:300], 1e-12, None)),
                       1)[0]
    assert abs(slope + 0.25) < 0.1


def test_series_response_brute_force():
    rng = np.random.default_rng(2)
    n = 500
    flow = rng.choice([-1.0, 1.0], n)
    prices = np.cumsum(rng.normal(0, 1, n + 1))
    L = 20
    got = prop.series_response(prices, flow, L)
    want = np.zeros(L + 1)
    for lag in range(L + 1):
        acc = [flow[t] * (prices[t + lag] - prices[t])
               for t in range(n) if t + lag <= n]
        want[lag] = np.mean(acc)
    assert np.abs(got - want).max() < 1e-10


def test_diffusion_temporary_zero_and_flat():
    probs = np.full(6, 1.0 / 6.0)
    corr = analytic_corr(probs, 50)
    zero = prop.PropagatorSet(
        max_lag=50, propagators=np.zeros((6, 50)), probabilities=probs,
        solved_types=np.ones(6, bool), residual_norm=0.0,
        relative_residual=0.0, lam=0.0, reliable_lag=16)
    assert np.abs(prop.predict_diffusion_temporary(zero, corr, 20)).max() == 0
    flat = prop.PropagatorSet(
        max_lag=50, propagators=np.tile(np.array([0., .5, 0., 0., .5, .5]
                                                 )[:, None], (1, 50)),
        probabilities=probs, solved_types=np.ones(6, bool),
        residual_norm=0.0, relative_residual=0.0, lam=0.0, reliable_lag=16)
    d = prop.predict_diffusion_temporary(flat, corr, 20)
    expect = np.arange(21) * (probs * np.array([0., .25, 0., 0., .25, .25])
                              ).sum()
    assert np.abs(d - expect).max() < 1e-12


def test_diffusion_temporary_matches_empirical(large_tick_stream):
    # feed the true flat kernels: the model variance must match the data
    corr = bstats.estimate_correlations(large_tick_stream, max_lag=300,
                                        n_bootstrap=0)
    dif = bstats.estimate_diffusion(large_tick_stream, max_lag=300,
                                    n_bootstrap=0)
    flat = prop.PropagatorSet(
        max_lag=300,
        propagators=np.tile(np.array([0., .5, 0., 0., .5, .5])[:, None],
                            (1, 300)),
        probabilities=corr.probabilities, solved_types=np.ones(6, bool),
        residual_norm=0.0, relative_residual=0.0, lam=0.0, reliable_lag=100)
    dhat = prop.predict_diffusion_temporary(flat, corr, 100)
    ratio = dhat[1:] / dif.diffusion[1:101]
    assert np.abs(ratio - 1.0).max() < 0.05


def test_market_order_flow_theta(small_tick_stream):
    with pytest.raises(Exception):
        prop.market_order_flow(small_tick_stream,
                               prop.SignedFlowConfig(theta=0.5))
    prices, flow, days = prop.market_order_flow(small_tick_stream)
    mo = np.isin(small_tick_stream.event_types, [0, 1])
    assert len(flow) == mo.sum()
    assert set(np.unique(flow)) <= {-1.0, 1.0}
