import numpy as np
import pytest

from bookimpact.errors import BrokenChain, InvariantViolation
from bookimpact.events import (
    EventStream,
    EventType,
    MarketEvent,
    assemble_stream,
    derive_side,
    reconstruct_mid,
    reconstruct_spread,
    trim_session,
)

NS_DAY = 86_400_000_000_000
BASE = 13940 * NS_DAY + int(9.5 * 3600) * 10 ** 9


def make_stream(types, signs, gaps, mid0=100.0, spread0=1.0, days=None):
    n = len(types)
    if days is None:
        days = np.zeros(n, dtype=np.int32)
    ts = BASE + np.asarray(days, dtype=np.int64) * NS_DAY \
        + np.arange(n, dtype=np.int64) * 10 ** 6
    return assemble_stream("T", 0.01, ts, days, types, signs, gaps,
                           mid0, spread0)


SIDE_TABLE = [
    (EventType.MO0, 1, 1), (EventType.MO0, -1, -1),
    (EventType.MOP, 1, 1), (EventType.MOP, -1, -1),
    (EventType.CA0, 1, 1), (EventType.CA0, -1, -1),
    (EventType.CAP, 1, 1), (EventType.CAP, -1, -1),
    (EventType.LO0, 1, -1), (EventType.LO0, -1, 1),
    (EventType.LOP, 1, -1), (EventType.LOP, -1, 1),
]


@pytest.mark.parametrize("ev,sign,side", SIDE_TABLE)
def test_derive_side_table(ev, sign, side):
    assert derive_side(ev, sign) == side


def test_derive_side_odd_in_sign():
    for ev in EventType:
        assert derive_side(ev, 1) == -derive_side(ev, -1)


def test_market_event_validation():
    good = MarketEvent(0, 0, EventType.MOP, 1, 0.5, 100.0, 100.5, 1.0, 2.0)
    good.validate()
    with pytest.raises(InvariantViolation):
        MarketEvent(0, 0, EventType.MO0, 1, 0.5, 100.0, 100.5, 1.0, 1.0
                    ).validate()          # gap on a non-price-changing type
    with pytest.raises(InvariantViolation):
        MarketEvent(0, 0, EventType.MOP, 1, 0.0, 100.0, 100.0, 1.0, 1.0
                    ).validate()          # price changer without a gap
    with pytest.raises(InvariantViolation):
        MarketEvent(0, 0, EventType.MOP, 1, 0.5, 100.0, 100.4, 1.0, 2.0
                    ).validate()          # mid law broken
    with pytest.raises(InvariantViolation):
        MarketEvent(0, 0, EventType.LOP, 1, 0.5, 100.0, 100.5, 2.0, 2.0
                    ).validate()          # spread law broken


def test_constant_path_for_gap_free_events():
    types = np.array([0, 2, 3, 0, 3], dtype=np.int8)
    signs = np.array([1, -1, 1, -1, 1], dtype=np.int8)
    s = make_stream(types, signs, np.zeros(5))
    assert np.all(reconstruct_mid(s) == 100.0)
    assert np.all(reconstruct_spread(s) == 1.0)


def test_single_event_jumps():
    s = make_stream(np.array([1], dtype=np.int8), np.array([1], np.int8),
                    np.array([0.5]))
    assert reconstruct_mid(s)[-1] == 100.5
    assert reconstruct_spread(s)[-1] == 2.0   # MOP opens by 2*gap
    s = make_stream(np.array([5], dtype=np.int8), np.array([1], np.int8),
                    np.array([0.5]), spread0=2.0)
    assert reconstruct_spread(s)[-1] == 1.0   # LOP closes by 2*gap
    s = make_stream(np.array([4], dtype=np.int8), np.array([-1], np.int8),
                    np.array([1.0]), spread0=1.0)
    assert reconstruct_spread(s)[-1] == 3.0   # CAP opens by 2*gap


def test_reconstruction_exact_on_synthetic(planted_stream):
    mid = reconstruct_mid(planted_stream)
    spr = reconstruct_spread(planted_stream)
    assert np.array_equal(mid[:-1], planted_stream.mid_before)
    assert np.array_equal(mid[-1:], planted_stream.mid_after[-1:])
    assert np.array_equal(spr[:-1], planted_stream.spread_before)


def test_broken_chain_detected(iid_stream):
    bad = dict(
        symbol=iid_stream.symbol, tick_size=iid_stream.tick_size,
        timestamps=iid_stream.timestamps, day_index=iid_stream.day_index,
        event_types=iid_stream.event_types, signs=iid_stream.signs,
        gaps=iid_stream.gaps, mid_before=iid_stream.mid_before.copy(),
        mid_after=iid_stream.mid_after,
        spread_before=iid_stream.spread_before,
        spread_after=iid_stream.spread_after)
    bad["mid_before"][1000] += 0.5
    stream = EventStream(**bad)
    with pytest.raises(BrokenChain):
        reconstruct_mid(stream)


def test_validate_catches_day_disorder():
    types = np.zeros(4, dtype=np.int8)
    signs = np.ones(4, dtype=np.int8)
    days = np.array([0, 1, 0, 1], dtype=np.int32)
    with pytest.raises(InvariantViolation):
        make_stream(types, signs, np.zeros(4), days=days).validate()


def test_probabilities_partition(small_tick_stream):
    p = small_tick_stream.type_probabilities()
    assert abs(p.sum() - 1.0) < 1e-12
    assert np.all(p >= 0)


def test_trim_session_keeps_chains(small_tick_stream):
    trimmed = trim_session(small_tick_stream, 30, 40)
    assert 0 < len(trimmed) < len(small_tick_stream)
    trimmed.validate()
    reconstruct_mid(trimmed)
    assert trimmed.session_trim == (30, 40)
    # trimming cuts roughly the expected fraction of the 390-minute day
    frac = len(trimmed) / len(small_tick_stream)
    assert abs(frac - (390 - 70) / 390) < 0.02


def test_stream_equality_roundtrip(iid_stream):
    assert iid_stream.equals(iid_stream)
    other = make_stream(np.array([1], dtype=np.int8),
                        np.array([1], np.int8), np.array([0.5]))
    assert not iid_stream.equals(other)
