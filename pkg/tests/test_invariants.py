"""Cross-module invariants and corner cases tied to specific claims."""

import numpy as np
import pandas as pd

import bookimpact as bi
import bookimpact.gapmodel as gm
import bookimpact.stats as bstats
from bookimpact.events import assemble_stream
from bookimpact.ingest import IngestConfig, classify

NS_DAY = 86_400_000_000_000
BASE = 13940 * NS_DAY + int(9.5 * 3600) * 10 ** 9


def test_alternating_signs_are_perfectly_antipersistent():
    # every event the same type, signs strictly alternating: the signed
    # correlation at lag one is minus one over the (unit) probability
    n = 10_000
    types = np.zeros(n, dtype=np.int8)
    signs = np.where(np.arange(n) % 2 == 0, 1, -1).astype(np.int8)
    ts = BASE + np.arange(n, dtype=np.int64) * 10 ** 6
    s = assemble_stream("T", 0.01, ts, np.zeros(n, np.int32), types, signs,
                        np.zeros(n), 100.0, 1.0)
    corr = bstats.estimate_correlations(s, max_lag=5, n_bootstrap=0)
    assert abs(corr.signed[0, 0, 1] + 1.0) < 1e-9
    assert abs(corr.signed[0, 0, 2] - 1.0) < 1e-9


def test_simultaneous_two_side_change_decomposes_bid_first():
    bbo = pd.DataFrame([
        (BASE, 10.00, 10.03, 100, 100),
        # one raw record moves both sides: becomes two events, bid first,
        # sharing the timestamp
        (BASE + 10 ** 6, 10.01, 10.02, 50, 60),
    ], columns=["timestamp_ns", "bid_price", "ask_price", "bid_size",
                "ask_size"])
    trades = pd.DataFrame(
        [], columns=["timestamp_ns", "price", "size", "aggressor_side"])
    stream, report = classify(bbo, trades, IngestConfig(tick_size=0.01))
    assert len(stream) == 2
    assert stream.timestamps[0] == stream.timestamps[1]
    first, second = stream[0], stream[1]
    assert first.event_type is bi.EventType.LOP and first.sign == 1
    assert first.side == -1                       # the bid side moved first
    assert second.event_type is bi.EventType.LOP and second.sign == -1
    # chains stay exact through the shared timestamp
    assert first.mid_after == second.mid_before
    assert report.conserved()


def test_flow_softens_book_for_positive_kernel_sources(planted_stream):
    # sources planted with positive weight raise future queue-emptying
    # gaps: the calibrated cross kernel at short lags is positive
    corr = bstats.estimate_correlations(planted_stream, max_lag=200,
                                        n_bootstrap=0)
    ker = gm.calibrate_kernels(planted_stream, corr, kernel_lag=30)
    assert ker.kernel[0, 0, 0] > 0        # MO0 source, MOP target, lag 1
    assert ker.kernel[1, 0, 0] > 0        # MOP source, MOP target, lag 1


def test_zero_noise_kernel_recovery():
    cfg = bi.planted_kernel_config(400_000, seed=77, n_days=10,
                                   kernel_lag=20, gap_noise=0.0)
    s = bi.generate(cfg)
    corr = bstats.estimate_correlations(s, max_lag=150, n_bootstrap=0)
    ker = gm.calibrate_kernels(s, corr, kernel_lag=20)
    planted = np.asarray(cfg.kappa)
    rel = np.linalg.norm(ker.kappa - planted) / np.linalg.norm(planted)
    assert rel < 0.05


def test_final_model_replay_reproduces_response(planted_stream):
    # calibrate on the source, regenerate gaps from the fitted model with
    # matched noise, and compare the measured responses of the two streams
    corr = bstats.estimate_correlations(planted_stream, max_lag=300,
                                        n_bootstrap=0)
    ker = gm.calibrate_kernels(planted_stream, corr, kernel_lag=30)
    rg = gm.realized_gaps(planted_stream)
    replay = bi.replay_with_model(
        planted_stream, rg.as_vector(), ker.kappa, ker.probabilities,
        seed=5, noise=float(np.sqrt(3.0) * ker.gap_residual_std.mean()))
    r_src = bstats.estimate_response(planted_stream, max_lag=300,
                                     n_bootstrap=150, seed=1)
    r_rep = bstats.estimate_response(replay, max_lag=300, n_bootstrap=150,
                                     seed=2)
    dev = np.abs(r_src.response[:, 1:301] - r_rep.response[:, 1:301])
    se = np.sqrt(r_src.response_se[:, 1:301] ** 2
                 + r_rep.response_se[:, 1:301] ** 2)
    z = dev / np.where(se > 0, se, np.inf)
    # statistical agreement across all types and lags
    assert (z > 3.0).mean() < 0.01
    assert z.max() < 6.0


def test_response_set_invariants(small_tick_stream):
    resp = bstats.estimate_response(small_tick_stream, max_lag=30,
                                    n_bootstrap=0)
    dif = bstats.estimate_diffusion(small_tick_stream, max_lag=30,
                                    n_bootstrap=0)
    assert np.all(resp.response[:, 0] == 0.0)
    assert dif.diffusion[0] == 0.0
    assert np.all(dif.diffusion >= 0.0)
