import numpy as np
import pytest

import bookimpact.sim as sim
import bookimpact.stats as bstats
import bookimpact.gapmodel as gm
from bookimpact.errors import ConfigInvalid
from bookimpact.simconfig import config_from_file, config_to_file


def test_determinism():
    cfg = sim.small_tick_config(50_000, seed=3, n_days=4)
    assert sim.generate(cfg).equals(sim.generate(cfg))


def test_presets_emit_valid_streams():
    for cfg in (sim.large_tick_config(20_000, seed=1, n_days=2),
                sim.small_tick_config(20_000, seed=1, n_days=2),
                sim.planted_kernel_config(20_000, seed=1, n_days=2,
                                          kernel_lag=10),
                sim.spread_model_config(20_000, seed=1, n_days=2)):
        stream = sim.generate(cfg)
        stream.validate()
        assert stream.n_days == 2


def test_config_validation():
    with pytest.raises(ConfigInvalid):
        sim.GeneratorConfig(n_events=0).validate()
    with pytest.raises(ConfigInvalid):
        sim.GeneratorConfig(n_events=10, type_process="bogus").validate()
    with pytest.raises(ConfigInvalid):
        sim.GeneratorConfig(n_events=10,
                            type_probabilities=np.ones(6)).validate()
    with pytest.raises(ConfigInvalid):
        sim.GeneratorConfig(
            n_events=10,
            delta_r=np.array([0.5, 0.5, 0, 0, 0.5, 0.5])).validate()
    with pytest.raises(ConfigInvalid):
        sim.GeneratorConfig(n_events=10, gap_process="kernels").validate()


def test_longmem_side_exponent():
    rng = np.random.default_rng(8)
    side = sim.longmem_signs(600_000, 0.7, rng).astype(float)
    lags = np.arange(10, 301)
    acf = np.array([side[:-l] @ side[l:] / (len(side) - l) for l in lags])
    pos = acf > 0
    slope = np.polyfit(np.log(lags[pos]), np.log(acf[pos]), 1)[0]
    assert abs(slope + 0.7) < 0.1


def test_longmem_stream_side_autocorr():
    cfg = sim.small_tick_config(400_000, seed=5, n_days=8,
                                sign_process="longmem", side_gamma=0.7)
    s = sim.generate(cfg)
    _eps, side = bstats.estimate_sign_autocorrs(s, max_lag=300)
    lags = np.arange(10, 301)
    vals = side[10:301]
    pos = vals > 0
    slope = np.polyfit(np.log(lags[pos]), np.log(vals[pos]), 1)[0]
    assert abs(slope + 0.7) < 0.12


def test_iid_stream_is_diffusive():
    cfg = sim.GeneratorConfig(
        n_events=1_000_000, seed=6, n_days=20,
        type_probabilities=np.full(6, 1 / 6),
        sign_process="iid", gap_process="constant",
        delta_r=np.array([0.0, 0.5, 0.0, 0.0, 0.5, 0.5]))
    s = sim.generate(cfg)
    dif = bstats.estimate_diffusion(s, max_lag=300, n_bootstrap=0)
    ratio = dif.diffusion[1:301] / np.arange(1, 301)
    level = ratio.mean()
    bands = [ratio[:10].mean(), ratio[10:50].mean(), ratio[50:150].mean(),
             ratio[150:300].mean()]
    for b in bands:
        assert abs(b / level - 1.0) < 0.02


def test_replay_with_model(planted_stream):
    corr = bstats.estimate_correlations(planted_stream, max_lag=200,
                                        n_bootstrap=0)
    ker = gm.calibrate_kernels(planted_stream, corr, kernel_lag=30)
    rg = gm.realized_gaps(planted_stream)
    # zero kernels and no noise: every gap equals its realized mean
    replayed = sim.replay_with_model(
        planted_stream, rg.as_vector(), np.zeros_like(ker.kappa),
        ker.probabilities, seed=1, noise=0.0)
    for k, code in enumerate(gm.PC_CODES):
        sel = replayed.event_types == code
        assert np.abs(replayed.gaps[sel] - rg.delta_r[k]).max() < 1e-12
    # full model replay: the diffusion curve is reproduced
    full = sim.replay_with_model(
        planted_stream, rg.as_vector(), ker.kappa, ker.probabilities,
        seed=2, noise=float(np.sqrt(3.0) * ker.gap_residual_std.mean()))
    d1 = bstats.estimate_diffusion(planted_stream, max_lag=200,
                                   n_bootstrap=0)
    d2 = bstats.estimate_diffusion(full, max_lag=200, n_bootstrap=0)
    band = slice(5, 201)
    rel = np.abs(d2.diffusion[band] / d1.diffusion[band] - 1.0).max()
    assert rel < 0.03


def test_replay_empty_stream(planted_stream):
    from bookimpact.ingest import _empty_stream

    empty = _empty_stream("X", 0.01)
    out = sim.replay_with_model(empty, np.zeros(6), np.zeros((6, 3, 5)),
                                np.full(6, 1 / 6), seed=0)
    assert len(out) == 0


def test_flip_signs_mirrors_mid(planted_stream):
    flipped = sim.flip_signs(planted_stream)
    up = planted_stream.mid_after - planted_stream.mid_before
    down = flipped.mid_after - flipped.mid_before
    assert np.array_equal(up, -down)
    assert np.array_equal(planted_stream.spread_after, flipped.spread_after)


def test_simconfig_roundtrip(tmp_path):
    cfg = sim.planted_kernel_config(30_000, seed=9, n_days=3, kernel_lag=8)
    path = str(tmp_path / "gen.txt")
    config_to_file(cfg, path)
    back = config_from_file(path)
    assert sim.generate(cfg).equals(sim.generate(back))


def test_simconfig_preset(tmp_path):
    path = tmp_path / "c.txt"
    path.write_text("preset = large_tick\nn_events = 5000\nseed = 2\n"
                    "n_days = 2\n")
    cfg = config_from_file(str(path))
    stream = sim.generate(cfg)
    assert len(stream) == 5000
    with pytest.raises(ConfigInvalid):
        config_from_file(str(path)) if path.write_text(
            "preset = nope\nn_events = 10\n") else None


def test_gap_floor_counts():
    # kernels strong enough to push gaps negative: flooring keeps them
    # positive and the stream valid
    kappa = np.full((6, 3, 5), 0.3)
    cfg = sim.GeneratorConfig(
        n_events=20_000, seed=11, n_days=2,
        type_probabilities=np.full(6, 1 / 6),
        sign_process="iid", gap_process="kernels",
        delta_r=np.array([0.0, 0.3, 0.0, 0.0, 0.3, 0.3]),
        kappa=kappa, gap_noise=0.1)
    stream = sim.generate(cfg)
    stream.validate()
    assert stream.gaps[np.isin(stream.event_types, (1, 4, 5))].min() > 0
