import numpy as np
import pandas as pd
import pytest

import bookimpact.sim as sim
from bookimpact.errors import InvariantViolation, NonHalfTickGap, SchemaError
from bookimpact.events import EventType, reconstruct_mid
from bookimpact.ingest import (
    IngestConfig,
    classify,
    load_event_csv,
    write_event_csv,
)

NS_DAY = 86_400_000_000_000
BASE = 13940 * NS_DAY + int(9.5 * 3600) * 10 ** 9
MS = 1_000_000


def t(ms, day=0):
    return BASE + day * NS_DAY + ms * MS


def frame(rows, cols):
    return pd.DataFrame(rows, columns=cols)


BBO_COLS = ["timestamp_ns", "bid_price", "ask_price", "bid_size", "ask_size"]
TRADE_COLS = ["timestamp_ns", "price", "size", "aggressor_side"]


@pytest.fixture()
def textbook():
    bbo = frame([
        (t(0), 10.00, 10.01, 500, 300),
        (t(10), 10.00, 10.01, 500, 200),    # MO0 (partial eat, trade below)
        (t(20), 10.00, 10.01, 600, 200),    # LO0 buy
        (t(30), 10.00, 10.03, 600, 400),    # MOP: queue emptied, gap 1.0
        (t(40), 10.01, 10.03, 250, 400),    # LOP buy inside spread, gap 0.5
        (t(50), 10.01, 10.03, 150, 400),    # CA0 (no matching trade)
        (t(60), 10.00, 10.03, 500, 400),    # CAP bid vanishes, gap 0.5
        (t(70), 10.00, 10.02, 500, 100),    # LOP sell, gap 0.5
    ], BBO_COLS)
    trades = frame([
        (t(10) - MS // 2, 10.01, 100, 1),
        (t(30) - MS // 2, 10.01, 120, 1),   # these two are one market order
        (t(30) - MS // 10, 10.01, 80, 1),   # (0.4 ms apart, same side)
    ], TRADE_COLS)
    return bbo, trades


def test_classify_textbook_sequence(textbook):
    stream, report = classify(*textbook, IngestConfig(tick_size=0.01))
    got = [(EventType(int(k)).name, int(s), float(g))
           for k, s, g in zip(stream.event_types, stream.signs, stream.gaps)]
    assert got == [
        ("MO0", 1, 0.0),
        ("LO0", 1, 0.0),
        ("MOP", 1, 1.0),     # half of the revealed two-tick move
        ("LOP", 1, 0.5),     # one tick inside the spread
        ("CA0", -1, 0.0),
        ("CAP", -1, 0.5),
        ("LOP", -1, 0.5),
    ]
    sides = stream.sides
    assert sides[3] == -1            # buy limit order sits on the bid
    assert report.trades_aggregated == 2
    assert report.trades_consumed == 2
    assert report.conserved()
    # classified events replay the raw mid path exactly
    mid = reconstruct_mid(stream)
    assert mid[0] == 1000.5 and mid[-1] == 1001.0
    stream.validate()


def test_classify_deterministic(textbook):
    s1, _ = classify(*textbook, IngestConfig(tick_size=0.01))
    s2, _ = classify(*textbook, IngestConfig(tick_size=0.01))
    assert s1.equals(s2)


def test_crossed_quotes_counted_and_skipped():
    bbo = frame([
        (t(0), 10.00, 10.01, 100, 100),
        (t(10), 10.02, 10.01, 100, 100),   # crossed: discard, reset state
        (t(20), 10.00, 10.01, 100, 100),
        (t(30), 10.00, 10.01, 150, 100),   # LO0 after recovery
    ], BBO_COLS)
    trades = frame([], TRADE_COLS)
    stream, report = classify(bbo, trades, IngestConfig(tick_size=0.01))
    assert report.crossed_quotes == 1
    assert [EventType(int(k)).name for k in stream.event_types] == ["LO0"]
    assert report.conserved()


def test_unmatched_trade_counted():
    bbo = frame([
        (t(0), 10.00, 10.01, 100, 100),
        (t(10), 10.00, 10.01, 100, 150),   # LO0 sell; no size decrease
    ], BBO_COLS)
    trades = frame([(t(5), 10.01, 50, 1)], TRADE_COLS)
    stream, report = classify(bbo, trades, IngestConfig(tick_size=0.01))
    assert report.unmatched_trades == 1
    assert report.conserved()


def test_marketable_limit_order_removed():
    # trade prints inside the prevailing spread: marketable limit order;
    # the trade and the price move it causes are discarded together
    bbo = frame([
        (t(0), 10.00, 10.04, 100, 100),
        (t(10), 10.00, 10.02, 100, 80),    # ask improves after the print
    ], BBO_COLS)
    trades = frame([(t(10) - MS // 2, 10.02, 50, -1)], TRADE_COLS)
    stream, report = classify(bbo, trades, IngestConfig(tick_size=0.01))
    assert report.crossing_removed_trades == 1
    assert report.crossing_removed_side_changes == 1
    assert len(stream) == 0
    assert report.conserved()


def test_out_of_session_discarded():
    bbo = frame([
        (BASE - 3600 * 10 ** 9, 10.00, 10.01, 100, 100),
        (t(0), 10.00, 10.01, 100, 100),
        (t(10), 10.00, 10.01, 200, 100),
    ], BBO_COLS)
    trades = frame([(BASE - 3600 * 10 ** 9, 10.00, 10, -1)], TRADE_COLS)
    stream, report = classify(bbo, trades, IngestConfig(tick_size=0.01))
    assert report.out_of_session_quotes == 1
    assert report.out_of_session_trades == 1
    assert len(stream) == 1


def test_wrong_tick_size_rejected():
    bbo = frame([(t(0), 10.003, 10.007, 100, 100)], BBO_COLS)
    with pytest.raises(NonHalfTickGap):
        classify(bbo, frame([], TRADE_COLS), IngestConfig(tick_size=0.01))


def test_csv_roundtrip(tmp_path, small_tick_stream):
    path = tmp_path / "events.csv"
    write_event_csv(small_tick_stream, path)
    back = load_event_csv(path)
    assert small_tick_stream.equals(back)


def test_csv_roundtrip_with_volumes(tmp_path, textbook):
    stream, _ = classify(*textbook, IngestConfig(symbol="TT", tick_size=0.01))
    path = tmp_path / "events.csv"
    write_event_csv(stream, path)
    back = load_event_csv(path)
    assert stream.equals(back)
    assert back.symbol == "TT"


def test_empty_csv_with_header(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text(
        "timestamp_ns,day,type,sign,gap_halfticks,mid_before_halfticks,"
        "spread_before_halfticks,volume\n")
    stream = load_event_csv(path)
    assert len(stream) == 0


def test_invariant_violation_on_load(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text(
        "timestamp_ns,day,type,sign,gap_halfticks,mid_before_halfticks,"
        "spread_before_halfticks,volume\n"
        "0,0,MO0,1,1.0,200.0,2.0,\n")         # gap on a non-changing type
    with pytest.raises(InvariantViolation):
        load_event_csv(path)


def test_schema_errors(tmp_path):
    path = tmp_path / "junk.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(SchemaError):
        load_event_csv(path)
    path.write_text(
        "timestamp_ns,day,type,sign,gap_halfticks,mid_before_halfticks,"
        "spread_before_halfticks,volume\n"
        "0,0,WAT,1,0.0,200.0,2.0,\n")
    with pytest.raises(SchemaError) as err:
        load_event_csv(path)
    assert "line 2" in str(err.value)


def test_replay_matches_bbo_mid_path():
    # longer random book walk: classified events must reproduce the raw
    # BBO mid at every event index
    rng = np.random.default_rng(5)
    bid, ask = 1000, 1002                       # in half-ticks (even)
    rows = [(t(0), bid / 200.0, ask / 200.0, 100, 100)]
    for i in range(1, 300):
        move = rng.choice(["lo0", "ca0", "lop", "cap_b", "cap_a"])
        bsz, asz = rows[-1][3], rows[-1][4]
        if move == "lo0":
            bsz += 10
        elif move == "ca0":
            asz = max(10, asz - 10)
        elif move == "lop" and ask - bid >= 4:
            bid += 2
        elif move == "cap_b":
            bid -= 2
        elif move == "cap_a":
            ask += 2
        if ask - bid < 2:
            ask = bid + 2
        rows.append((t(10 * i), bid / 200.0, ask / 200.0, bsz, asz))
    bbo = frame(rows, BBO_COLS)
    stream, report = classify(bbo, frame([], TRADE_COLS),
                              IngestConfig(tick_size=0.01))
    assert report.conserved()
    stream.validate()
    mids = (bbo["bid_price"].to_numpy() + bbo["ask_price"].to_numpy()) / 2
    # compare final mid in ticks
    assert abs(stream.mid_after[-1] * 0.01 - mids[-1]) < 1e-12


def build_tape(n_events, seed):
    """Emit a raw quote/trade tape realizing a known event sequence.

    Returns the two data frames plus the expected per-event columns; the
    book starts deep enough that partial cancellations never exhaust it.
    """
    rng = np.random.default_rng(seed)
    bid, ask = 2000, 2004          # half-ticks, one-tick grid
    bsz, asz = 50_000, 50_000
    quote_rows = [(t(0), bid / 200.0, ask / 200.0, bsz, asz)]
    trade_rows = []
    expect = []
    ms = 0
    for _ in range(n_events):
        ms += int(rng.integers(5, 20))
        when = t(ms)
        sign = 1 if rng.random() < 0.5 else -1
        depth = bsz if sign < 0 else asz         # side a CA0/MO0 would hit
        choices = ["LO0"]
        if depth > 500:
            choices += ["CA0", "MO0"]
        if ask - bid >= 4:
            choices += ["LOP"]
        choices += ["MOP", "CAP"]
        kind = rng.choice(choices)
        gap_ht = 0
        vol = int(rng.integers(5, 30))
        if kind == "LO0":
            if sign > 0:
                bsz += vol
            else:
                asz += vol
        elif kind == "CA0":
            if sign < 0:
                bsz -= vol
            else:
                asz -= vol
        elif kind == "MO0":
            px = bid if sign < 0 else ask
            trade_rows.append((when - MS // 4, px / 200.0, vol, sign))
            if sign < 0:
                bsz -= vol
            else:
                asz -= vol
        elif kind == "LOP":
            gap_ht = 1                      # one-tick improvement
            vol = int(rng.integers(100, 200))
            if sign > 0:
                bid += 2
                bsz = vol
            else:
                ask -= 2
                asz = vol
        elif kind in ("MOP", "CAP"):
            gap_ht = int(rng.integers(1, 3))    # reveal one or two ticks
            if kind == "MOP":
                px = bid if sign < 0 else ask
                qsz = bsz if sign < 0 else asz
                trade_rows.append((when - MS // 4, px / 200.0, qsz, sign))
                vol = qsz
            else:
                vol = bsz if sign < 0 else asz
            fresh = int(rng.integers(30_000, 60_000))
            if sign < 0:
                bid -= 2 * gap_ht
                bsz = fresh
            else:
                ask += 2 * gap_ht
                asz = fresh
        quote_rows.append((when, bid / 200.0, ask / 200.0, bsz, asz))
        expect.append((kind, sign, gap_ht / 2.0, vol))
    bbo = frame(quote_rows, BBO_COLS)
    trades = frame(trade_rows, TRADE_COLS)
    return bbo, trades, expect


def test_tape_roundtrip_recovers_every_event():
    bbo, trades, expect = build_tape(4000, seed=9)
    stream, report = classify(bbo, trades, IngestConfig(symbol="TAPE",
                                                        tick_size=0.01))
    assert len(stream) == len(expect)
    assert report.conserved()
    assert report.unmatched_trades == 0
    assert report.crossed_quotes == 0
    for ev, (kind, sign, gap, vol) in zip(stream, expect):
        assert ev.event_type.name == kind
        assert ev.sign == sign
        assert ev.gap == gap
        assert ev.volume == vol
    # the classified mid path replays the raw quote mids exactly
    mids = (bbo["bid_price"].to_numpy() + bbo["ask_price"].to_numpy()) / 2
    got = np.append(stream.mid_before, stream.mid_after[-1]) * 0.01
    assert np.abs(got - mids).max() < 1e-9
    stream.validate()
