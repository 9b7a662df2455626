"""Tick-data ingestion: classify raw trades-and-quotes into event streams.

The classifier walks the best-quote feed one day at a time, attributing
every change of the best bid or ask to exactly one event:

* a size increase at an unchanged best price is a limit order at the best;
* a size decrease is a market order if a matching trade printed within the
  matching window, otherwise a cancellation;
* a receding best price is a queue-emptying market order (with a matching
  trade) or a complete cancellation, with the gap equal to half the
  revealed price move;
* an improving best price is a limit order inside the spread, gap again
  half the move.

Trades on the same book side within the aggregation window collapse into
one market order first, so a sweep printing as several executions counts
as a single event.  Records that cannot be classified are discarded and
counted, never silently dropped: crossed or locked quotes reset the book
state, trades printing inside the previous spread are treated as
marketable limit orders and removed together with the quote changes they
cause, and trades that match no quote effect are counted as unmatched.

Prices are converted to integer half-ticks on entry; a price off the tick
grid aborts the file since it almost always means the configured tick size
is wrong.  All downstream gap arithmetic is integer until the final
conversion to float ticks, which keeps the mid/spread identities exact.

The classifier is deterministic: identical inputs and configuration give
byte-identical streams.  Days are independent, so concurrent per-day runs
are safe; within a day the book state forces sequential processing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import InvariantViolation, NonHalfTickGap, SchemaError
from .events import EventStream, EventType

__all__ = [
    "BboRecord",
    "TradeRecord",
    "IngestConfig",
    "IngestReport",
    "classify",
    "load_bbo_csv",
    "load_trades_csv",
    "load_event_csv",
    "write_event_csv",
]

NS_PER_DAY = 86_400_000_000_000
NS_PER_MINUTE = 60_000_000_000

BBO_COLUMNS = ["timestamp_ns", "bid_price", "ask_price", "bid_size", "ask_size"]
TRADE_COLUMNS = ["timestamp_ns", "price", "size", "aggressor_side"]
EVENT_COLUMNS = ["timestamp_ns", "day", "type", "sign", "gap_halfticks",
                 "mid_before_halfticks", "spread_before_halfticks", "volume"]

_TYPE_BY_NAME = {t.name: t for t in EventType}


@dataclass(frozen=True)
class BboRecord:
    """One best-quote snapshot."""

    timestamp: int
    bid_price: float
    ask_price: float
    bid_size: int
    ask_size: int


@dataclass(frozen=True)
class TradeRecord:
    """One trade print; aggressor +1 buy, -1 sell, 0 unknown."""

    timestamp: int
    price: float
    size: int
    aggressor_side: int = 0


@dataclass(frozen=True)
class IngestConfig:
    symbol: str = "UNKNOWN"
    tick_size: float = 0.01
    aggregation_window_ns: int = 1_000_000       # merge same-side trades
    trade_match_window_ns: int = 1_000_000       # trade-to-quote tolerance
    session_start_minute: int = 570              # 09:30
    session_end_minute: int = 960                # 16:00
    price_tolerance: float = 1e-6                # fraction of a tick


@dataclass
class IngestReport:
    """Bookkeeping of everything seen, emitted and discarded."""

    quote_records: int = 0
    quote_side_changes: int = 0
    trades_raw: int = 0
    trades_aggregated: int = 0
    events: int = 0
    trades_consumed: int = 0
    crossed_quotes: int = 0
    crossed_side_changes: int = 0
    crossing_removed_trades: int = 0
    crossing_removed_side_changes: int = 0
    unmatched_trades: int = 0
    out_of_session_trades: int = 0
    out_of_session_quotes: int = 0
    by_type: dict = field(default_factory=dict)

    def conserved(self) -> bool:
        """Every processed unit became an event or a counted discard."""
        sides_ok = self.quote_side_changes == (
            self.events + self.crossed_side_changes
            + self.crossing_removed_side_changes)
        trades_ok = self.trades_aggregated == (
            self.trades_consumed + self.unmatched_trades
            + self.crossing_removed_trades)
        return sides_ok and trades_ok


def _to_halfticks(prices, tick_size, tolerance, what):
    scaled = np.asarray(prices, dtype=float) * (2.0 / tick_size)
    ht = np.rint(scaled).astype(np.int64)
    err = np.abs(scaled - ht)
    if err.size and err.max() > 2.0 * tolerance:
        bad = int(np.argmax(err))
        raise NonHalfTickGap(
            f"{what} price {prices[bad]} is off the half-tick grid for "
            f"tick_size={tick_size}; wrong tick size?")
    return ht


def _aggregate_trades(ts, price_ht, size, side, window):
    """Merge same-side runs within the window into single market orders."""
    out = []
    i, n = 0, len(ts)
    while i < n:
        j = i + 1
        total = int(size[i])
        last_px = price_ht[i]
        while (j < n and side[j] == side[i]
               and ts[j] - ts[i] <= window):
            total += int(size[j])
            last_px = price_ht[j]
            j += 1
        out.append((int(ts[i]), int(side[i]), total,
                    int(price_ht[i]), int(last_px)))
        i = j
    return out


def classify(bbo: pd.DataFrame, trades: pd.DataFrame,
             config: IngestConfig) -> tuple[EventStream, IngestReport]:
    """Turn raw best-quote and trade feeds into a validated event stream.

    Inputs are time-sorted data frames with the documented columns; the
    returned report carries the discard counters and satisfies the
    conservation identity on well-formed feeds.
    """
    for col in BBO_COLUMNS:
        if col not in bbo.columns:
            raise SchemaError(f"bbo frame missing column {col!r}")
    for col in TRADE_COLUMNS:
        if col not in trades.columns:
            raise SchemaError(f"trades frame missing column {col!r}")

    report = IngestReport()
    report.quote_records = len(bbo)
    report.trades_raw = len(trades)

    q_ts = bbo["timestamp_ns"].to_numpy(np.int64)
    bid = _to_halfticks(bbo["bid_price"].to_numpy(), config.tick_size,
                        config.price_tolerance, "bid")
    ask = _to_halfticks(bbo["ask_price"].to_numpy(), config.tick_size,
                        config.price_tolerance, "ask")
    bsz = bbo["bid_size"].to_numpy(np.int64)
    asz = bbo["ask_size"].to_numpy(np.int64)
    if len(bsz) and (bsz.min() <= 0 or asz.min() <= 0):
        raise InvariantViolation("quoted sizes must be positive")

    t_ts = trades["timestamp_ns"].to_numpy(np.int64)
    t_px = _to_halfticks(trades["price"].to_numpy(), config.tick_size,
                         config.price_tolerance, "trade")
    t_sz = trades["size"].to_numpy(np.int64)
    t_side = trades["aggressor_side"].to_numpy(np.int64)
    if np.any(t_sz <= 0):
        raise InvariantViolation("trade with non-positive size")

    lo = config.session_start_minute * NS_PER_MINUTE
    hi = config.session_end_minute * NS_PER_MINUTE
    in_session_q = (q_ts % NS_PER_DAY >= lo) & (q_ts % NS_PER_DAY < hi)
    in_session_t = (t_ts % NS_PER_DAY >= lo) & (t_ts % NS_PER_DAY < hi)
    report.out_of_session_quotes = int((~in_session_q).sum())
    report.out_of_session_trades = int((~in_session_t).sum())

    rows = []           # event tuples
    days_q = q_ts // NS_PER_DAY
    days_t = t_ts // NS_PER_DAY
    all_days = sorted(set(days_q[in_session_q]) | set(days_t[in_session_t]))
    day_number = {d: i for i, d in enumerate(all_days)}

    for day in all_days:
        qi = np.flatnonzero((days_q == day) & in_session_q)
        ti = np.flatnonzero((days_t == day) & in_session_t)
        _classify_day(
            day_number[day],
            q_ts[qi], bid[qi], ask[qi], bsz[qi], asz[qi],
            t_ts[ti], t_px[ti], t_sz[ti], t_side[ti],
            config, rows, report)

    report.events = len(rows)
    if rows:
        arr = list(zip(*rows))
        ts = np.array(arr[0], dtype=np.int64)
        day_idx = np.array(arr[1], dtype=np.int32)
        types = np.array(arr[2], dtype=np.int8)
        signs = np.array(arr[3], dtype=np.int8)
        gap_ht = np.array(arr[4], dtype=np.int64)
        mid_ht = np.array(arr[5], dtype=np.int64)
        spr_ht = np.array(arr[6], dtype=np.int64)
        vol = np.array(arr[7], dtype=np.int64)
        starts = np.concatenate([[0], np.flatnonzero(np.diff(day_idx)) + 1])
        stream = EventStream(
            symbol=config.symbol,
            tick_size=config.tick_size,
            timestamps=ts,
            day_index=day_idx,
            event_types=types,
            signs=signs,
            gaps=gap_ht / 2.0,
            mid_before=mid_ht / 2.0,
            mid_after=(mid_ht + signs * gap_ht) / 2.0,
            spread_before=spr_ht / 2.0,
            spread_after=(spr_ht + _spread_coef(types) * gap_ht) / 2.0,
            volumes=vol,
            day_starts=starts.astype(np.int64),
        )
    else:
        stream = _empty_stream(config.symbol, config.tick_size)
    stream.validate()
    counts = np.bincount(stream.event_types, minlength=6)
    report.by_type = {t.name: int(counts[t.value]) for t in EventType}
    return stream, report


def _spread_coef(types):
    coef = np.array([0, 2, 0, 0, 2, -2], dtype=np.int64)
    return coef[types]


def _empty_stream(symbol, tick_size):
    z = np.zeros(0)
    return EventStream(
        symbol=symbol, tick_size=tick_size,
        timestamps=np.zeros(0, np.int64), day_index=np.zeros(0, np.int32),
        event_types=np.zeros(0, np.int8), signs=np.zeros(0, np.int8),
        gaps=z, mid_before=z.copy(), mid_after=z.copy(),
        spread_before=z.copy(), spread_after=z.copy(),
        volumes=np.zeros(0, np.int64), day_starts=np.zeros(0, np.int64),
    )


def _classify_day(day_no, q_ts, bid, ask, bsz, asz,
                  t_ts, t_px, t_sz, t_side, config, rows, report):
    # infer unknown aggressor sides from the prevailing quote
    sides = t_side.copy()
    if len(t_ts):
        pos = np.searchsorted(q_ts, t_ts, side="right") - 1
        for k in range(len(t_ts)):
            if sides[k] == 0:
                p = pos[k]
                if p >= 0:
                    mid2 = bid[p] + ask[p]
                    sides[k] = 1 if 2 * t_px[k] >= mid2 else -1
                else:
                    sides[k] = 1
    agg = _aggregate_trades(t_ts, t_px, t_sz, sides,
                            config.aggregation_window_ns)
    report.trades_aggregated += len(agg)
    consumed = [False] * len(agg)
    crossing = [False] * len(agg)

    # flag trades printing strictly inside the prevailing spread as
    # marketable limit orders (no resting level there)
    if len(q_ts):
        for k, (ats, aside, asz_k, px0, _px1) in enumerate(agg):
            p = int(np.searchsorted(q_ts, ats, side="right")) - 1
            if p >= 0 and bid[p] < px0 < ask[p]:
                crossing[k] = True
                report.crossing_removed_trades += 1

    state = None
    ptr = 0
    n_agg = len(agg)

    start = [0]               # trades before this index can never match again

    def match_trade(side_book, lo_px, hi_px, when):
        """First unconsumed same-side aggregated trade near this change.

        Trades are time-sorted, so everything older than the matching
        window is skipped permanently; the scan stays linear overall.
        """
        k = start[0]
        while k < len(agg) and (consumed[k] or crossing[k]
                                or when - agg[k][0]
                                > config.trade_match_window_ns):
            k += 1
        start[0] = k
        for k in range(start[0], len(agg)):
            ats, aside, _size_k, px0, px1 = agg[k]
            if ats > when:
                break
            if consumed[k] or crossing[k] or aside != side_book:
                continue
            if when - ats > config.trade_match_window_ns:
                continue
            if not (lo_px <= px0 <= hi_px or lo_px <= px1 <= hi_px):
                continue
            return k
        return None

    for i in range(len(q_ts)):
        b, a, qb, qa = int(bid[i]), int(ask[i]), int(bsz[i]), int(asz[i])
        if b >= a:
            report.crossed_quotes += 1
            state = None
            continue
        if state is None:
            state = [b, a, qb, qa]
            continue
        pb, pa, pqb, pqa = state
        when = int(q_ts[i])
        changes = []
        if (b, qb) != (pb, pqb):
            changes.append(("bid", b, qb, pb, pqb))
        if (a, qa) != (pa, pqa):
            changes.append(("ask", a, qa, pa, pqa))
        for side_name, new_px, new_sz, old_px, old_sz in changes:
            report.quote_side_changes += 1
            is_bid = side_name == "bid"
            side_book = -1 if is_bid else 1
            mid2 = (state[0] + state[1]) // 2    # integer half-ticks
            spr2 = state[1] - state[0]
            receded = (new_px < old_px) if is_bid else (new_px > old_px)
            improved = (new_px > old_px) if is_bid else (new_px < old_px)
            gap_ht, ev, sign, vol = 0, None, 0, 0
            if new_px == old_px:
                if new_sz > old_sz:
                    ev = EventType.LO0
                    sign = 1 if is_bid else -1
                    vol = new_sz - old_sz
                elif new_sz < old_sz:
                    k = match_trade(side_book, old_px, old_px, when)
                    if k is not None:
                        consumed[k] = True
                        report.trades_consumed += 1
                        ev = EventType.MO0
                        vol = agg[k][2]
                    else:
                        ev = EventType.CA0
                        vol = old_sz - new_sz
                    sign = -1 if is_bid else 1
            elif receded:
                move = abs(new_px - old_px)
                gap_ht = move // 2
                if move % 2:
                    raise NonHalfTickGap(
                        f"odd half-tick move {move} at {when}; wrong tick size?")
                lo_px, hi_px = (min(new_px, old_px), max(new_px, old_px))
                k = match_trade(side_book, lo_px, hi_px, when)
                if k is not None:
                    consumed[k] = True
                    report.trades_consumed += 1
                    ev = EventType.MOP
                    vol = agg[k][2]
                else:
                    ev = EventType.CAP
                    vol = old_sz
                sign = -1 if is_bid else 1
            elif improved:
                move = abs(new_px - old_px)
                if move % 2:
                    raise NonHalfTickGap(
                        f"odd half-tick move {move} at {when}; wrong tick size?")
                # an improvement past the opposite best would have crossed;
                # those were filtered above as crossed quotes
                gap_ht = move // 2
                ev = EventType.LOP
                sign = 1 if is_bid else -1
                vol = new_sz
            if ev is None:
                continue
            # a price change caused by a flagged marketable limit order is
            # removed together with the trade
            if gap_ht and _near_crossing(agg, crossing, consumed,
                                         when, config):
                report.crossing_removed_side_changes += 1
                _apply_side(state, is_bid, new_px, new_sz)
                continue
            rows.append((when, day_no, int(ev), sign,
                         int(gap_ht), mid2, spr2, vol))
            _apply_side(state, is_bid, new_px, new_sz)
    # leftover aggregated trades never matched a book effect
    for k in range(n_agg):
        if not consumed[k] and not crossing[k]:
            report.unmatched_trades += 1


def _near_crossing(agg, crossing, consumed, when, config):
    # a crossing print poisons any adjacent price change regardless of
    # which side it lands on (the remainder may post on either side)
    for k in range(len(agg)):
        if crossing[k] and not consumed[k]:
            ats = agg[k][0]
            if 0 <= when - ats <= config.trade_match_window_ns:
                consumed[k] = True
                return True
    return False


def _apply_side(state, is_bid, new_px, new_sz):
    if is_bid:
        state[0], state[2] = new_px, new_sz
    else:
        state[1], state[3] = new_px, new_sz


# ---------------------------------------------------------------------------
# CSV interfaces

def load_bbo_csv(path) -> pd.DataFrame:
    frame = pd.read_csv(path)
    for col in BBO_COLUMNS:
        if col not in frame.columns:
            raise SchemaError(f"{path}: missing column {col!r}")
    return frame


def load_trades_csv(path) -> pd.DataFrame:
    frame = pd.read_csv(path)
    for col in TRADE_COLUMNS:
        if col not in frame.columns:
            raise SchemaError(f"{path}: missing column {col!r}")
    return frame


def write_event_csv(stream: EventStream, path) -> None:
    """Write the documented event schema; lossless for round-tripping.

    Prices and gaps are stored in half-ticks.  A comment line carries the
    symbol, tick size and session trim so loading restores the stream
    field for field.
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# bookimpact-events v1 symbol={stream.symbol} "
                 f"tick_size={stream.tick_size!r} "
                 f"trim={stream.session_trim[0]},{stream.session_trim[1]}\n")
        fh.write(",".join(EVENT_COLUMNS) + "\n")
        vols = stream.volumes
        for t in range(len(stream)):
            vol = "" if vols is None or vols[t] < 0 else str(int(vols[t]))
            fh.write(
                f"{int(stream.timestamps[t])},{int(stream.day_index[t])},"
                f"{EventType(int(stream.event_types[t])).name},"
                f"{int(stream.signs[t])},{float(stream.gaps[t] * 2.0)!r},"
                f"{float(stream.mid_before[t] * 2.0)!r},"
                f"{float(stream.spread_before[t] * 2.0)!r},{vol}\n")


def load_event_csv(path, symbol=None, tick_size=None) -> EventStream:
    """Load the event schema back into a validated stream.

    Raises SchemaError (with a line number where possible) for malformed
    files and InvariantViolation when a row contradicts the event laws,
    e.g. a gap on a non-price-changing type.
    """
    meta = {"symbol": symbol or "UNKNOWN",
            "tick_size": tick_size if tick_size is not None else 0.01,
            "trim": (0, 0)}
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline()
    if first.startswith("#"):
        for token in first[1:].split():
            if token.startswith("symbol="):
                meta["symbol"] = token[7:]
            elif token.startswith("tick_size="):
                meta["tick_size"] = float(token[10:])
            elif token.startswith("trim="):
                a, b = token[5:].split(",")
                meta["trim"] = (int(a), int(b))
    try:
        frame = pd.read_csv(path, comment="#", dtype={"type": str},
                            keep_default_na=False, na_values=[],
                            float_precision="round_trip")
    except Exception as exc:
        raise SchemaError(f"{path}: {exc}") from exc
    if list(frame.columns) != EVENT_COLUMNS:
        raise SchemaError(
            f"{path}: expected header {','.join(EVENT_COLUMNS)}, got "
            f"{','.join(map(str, frame.columns))}")
    offset = 3 if first.startswith("#") else 2     # 1-based data line offset
    if len(frame) == 0:
        return _empty_stream(meta["symbol"], meta["tick_size"])
    type_names = frame["type"].to_numpy()
    codes = np.empty(len(frame), dtype=np.int8)
    for i, name in enumerate(type_names):
        t = _TYPE_BY_NAME.get(name)
        if t is None:
            raise SchemaError(f"unknown event type {name!r}", line=i + offset)
        codes[i] = int(t)
    try:
        ts = frame["timestamp_ns"].to_numpy(np.int64)
        day = frame["day"].to_numpy(np.int32)
        signs = frame["sign"].to_numpy(np.int64)
        gap_ht = frame["gap_halfticks"].to_numpy(float)
        mid_ht = frame["mid_before_halfticks"].to_numpy(float)
        spr_ht = frame["spread_before_halfticks"].to_numpy(float)
    except (ValueError, TypeError) as exc:
        raise SchemaError(f"{path}: {exc}") from exc
    vol_raw = frame["volume"].to_numpy()
    vols = np.full(len(frame), -1, dtype=np.int64)
    for i, v in enumerate(vol_raw):
        if v != "" and not (isinstance(v, float) and np.isnan(v)):
            vols[i] = int(v)
    if np.any(np.abs(signs) != 1):
        bad = int(np.flatnonzero(np.abs(signs) != 1)[0])
        raise InvariantViolation(f"line {bad + offset}: sign must be +/-1")
    signs = signs.astype(np.int8)
    gaps = gap_ht / 2.0
    mid_before = mid_ht / 2.0
    spread_before = spr_ht / 2.0
    coef = np.array([0.0, 2.0, 0.0, 0.0, 2.0, -2.0])
    stream = EventStream(
        symbol=meta["symbol"],
        tick_size=meta["tick_size"],
        timestamps=ts,
        day_index=day,
        event_types=codes,
        signs=signs,
        gaps=gaps,
        mid_before=mid_before,
        mid_after=mid_before + signs * gaps,
        spread_before=spread_before,
        spread_after=spread_before + coef[codes] * gaps,
        volumes=vols if (vols >= 0).any() else None,
        session_trim=meta["trim"],
    )
    stream.validate()
    return stream
