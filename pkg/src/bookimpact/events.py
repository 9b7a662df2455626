"""Event taxonomy and exact mid-price / spread bookkeeping.

Every change of the best quotes is one of six event types:

* ``MO0`` / ``MOP`` -- market order that leaves the best price intact /
  removes the whole best queue and moves it,
* ``CA0`` / ``CAP`` -- partial / complete cancellation of the best queue,
* ``LO0`` / ``LOP`` -- limit order at the best / inside the spread.

Each event carries a sign (its expected long-term push on the price), a
side (bid or ask), and a gap: half the mid-quote jump it causes, in ticks.
Non-price-changing events have gap 0 by definition.  The mid and the
spread are then pure jump processes::

    mid_{t+1}    = mid_t    + sign_t * gap_t
    spread_{t+1} = spread_t + dbar_t        (dbar = +2*gap for MOP/CAP,
                                             -2*gap for LOP, else 0)

These identities are exact, so reconstruction must reproduce the recorded
paths bit for bit; any mismatch is a defect upstream, not noise.

Prices are kept in ticks as floats.  Ingested data is validated to sit on
the half-tick grid, where binary floating point is exact; synthetic gaps
may be real-valued, and all paths are built by one sequential cumulative
sum so the step identity holds at the bit level either way.

All containers are immutable after construction and every function here is
pure, so concurrent use needs no locking.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .errors import BrokenChain, InvariantViolation

__all__ = [
    "EventType",
    "PRICE_CHANGING",
    "MarketEvent",
    "EventStream",
    "derive_side",
    "reconstruct_mid",
    "reconstruct_spread",
    "assemble_stream",
    "trim_session",
    "spread_step_coefficient",
]

NS_PER_MINUTE = 60_000_000_000
NS_PER_DAY = 86_400_000_000_000


class EventType(IntEnum):
    """The six best-quote event types; the trailing P marks price changers."""

    MO0 = 0
    MOP = 1
    CA0 = 2
    LO0 = 3
    CAP = 4
    LOP = 5


#: Event types that move the mid-price (market order / cancellation that
#: empties the best queue, limit order inside the spread).
PRICE_CHANGING = (EventType.MOP, EventType.CAP, EventType.LOP)

_PC_MASK = np.zeros(6, dtype=bool)
_PC_MASK[[e.value for e in PRICE_CHANGING]] = True

#: spread change per unit gap: +2 for MOP/CAP, -2 for LOP, 0 otherwise.
_SPREAD_COEF = np.array([0.0, 2.0, 0.0, 0.0, 2.0, -2.0])

#: side = sign for MO/CA, -sign for LO (limit orders add volume, so they
#: push the price away from the side where they rest).
_SIDE_COEF = np.array([1, 1, 1, -1, 1, -1], dtype=np.int8)


def derive_side(event_type: EventType, sign: int) -> int:
    """Return the book side (+1 ask, -1 bid) implied by type and sign."""
    return int(_SIDE_COEF[int(event_type)] * sign)


def spread_step_coefficient(event_type: EventType) -> float:
    """Spread change per unit gap for this event type (+2, -2 or 0)."""
    return float(_SPREAD_COEF[int(event_type)])


@dataclass(frozen=True)
class MarketEvent:
    """One classified best-quote event.

    Prices are in ticks; ``gap`` is half the mid-quote jump and is zero
    exactly for the non-price-changing types.
    """

    timestamp: int
    day_index: int
    event_type: EventType
    sign: int
    gap: float
    mid_before: float
    mid_after: float
    spread_before: float
    spread_after: float
    volume: int | None = None

    @property
    def side(self) -> int:
        return derive_side(self.event_type, self.sign)

    def validate(self) -> None:
        ev = self.event_type
        if self.sign not in (-1, 1):
            raise InvariantViolation(f"sign must be +/-1, got {self.sign}")
        if self.gap < 0:
            raise InvariantViolation(f"negative gap {self.gap}")
        price_changing = ev in PRICE_CHANGING
        if price_changing and self.gap == 0.0:
            raise InvariantViolation(f"{ev.name} event with zero gap")
        if not price_changing and self.gap != 0.0:
            raise InvariantViolation(f"{ev.name} event with gap {self.gap}")
        if self.mid_after != self.mid_before + self.sign * self.gap:
            raise InvariantViolation(
                f"mid_after {self.mid_after} != mid_before + sign*gap "
                f"({self.mid_before} + {self.sign}*{self.gap})"
            )
        want = self.spread_before + spread_step_coefficient(ev) * self.gap
        if self.spread_after != want:
            raise InvariantViolation(
                f"spread_after {self.spread_after} != {want} for {ev.name}"
            )
        if self.volume is not None and self.volume < 0:
            raise InvariantViolation(f"negative volume {self.volume}")


@dataclass(frozen=True)
class EventStream:
    """A per-symbol, time-ordered sequence of events in columnar form.

    Event time is the array index; wall-clock timestamps are carried for
    session trimming only and never enter the estimators.  ``day_starts``
    holds the first index of each trading day; mid/spread chains are exact
    within a day and may jump across days (overnight).
    """

    symbol: str
    tick_size: float
    timestamps: np.ndarray      # int64 ns
    day_index: np.ndarray       # int32
    event_types: np.ndarray     # int8 EventType codes
    signs: np.ndarray           # int8 +/-1
    gaps: np.ndarray            # float64 ticks
    mid_before: np.ndarray      # float64 ticks
    mid_after: np.ndarray       # float64 ticks
    spread_before: np.ndarray   # float64 ticks
    spread_after: np.ndarray    # float64 ticks
    volumes: np.ndarray | None = None   # int64, -1 when unknown
    day_starts: np.ndarray = field(default=None)  # int64 first index per day
    session_trim: tuple[int, int] = (0, 0)        # minutes cut at open/close

    def __post_init__(self):
        if self.day_starts is None:
            object.__setattr__(self, "day_starts", _day_starts(self.day_index))
        for name in (
            "timestamps", "day_index", "event_types", "signs", "gaps",
            "mid_before", "mid_after", "spread_before", "spread_after",
            "volumes", "day_starts",
        ):
            arr = getattr(self, name)
            if arr is not None:
                arr.setflags(write=False)

    def __len__(self) -> int:
        return len(self.event_types)

    def __getitem__(self, t: int) -> MarketEvent:
        vol = None
        if self.volumes is not None and self.volumes[t] >= 0:
            vol = int(self.volumes[t])
        return MarketEvent(
            timestamp=int(self.timestamps[t]),
            day_index=int(self.day_index[t]),
            event_type=EventType(int(self.event_types[t])),
            sign=int(self.signs[t]),
            gap=float(self.gaps[t]),
            mid_before=float(self.mid_before[t]),
            mid_after=float(self.mid_after[t]),
            spread_before=float(self.spread_before[t]),
            spread_after=float(self.spread_after[t]),
            volume=vol,
        )

    def __iter__(self):
        for t in range(len(self)):
            yield self[t]

    @property
    def sides(self) -> np.ndarray:
        return (_SIDE_COEF[self.event_types] * self.signs).astype(np.int8)

    @property
    def n_days(self) -> int:
        return len(self.day_starts)

    def day_slices(self) -> list[slice]:
        """One slice per trading day, in order."""
        edges = np.append(self.day_starts, len(self))
        return [slice(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]

    def type_counts(self) -> np.ndarray:
        return np.bincount(self.event_types, minlength=6).astype(np.int64)

    def type_probabilities(self) -> np.ndarray:
        if len(self) == 0:
            raise InvariantViolation("empty stream has no type probabilities")
        return self.type_counts() / len(self)

    def validate(self) -> None:
        """Check every structural invariant; raise InvariantViolation."""
        n = len(self)
        if n == 0:
            return
        types = self.event_types
        if types.min() < 0 or types.max() > 5:
            raise InvariantViolation("event type code outside 0..5")
        if not np.all(np.abs(self.signs) == 1):
            raise InvariantViolation("signs must be +/-1")
        if np.any(self.gaps < 0):
            raise InvariantViolation("negative gap")
        pc = _PC_MASK[types]
        if np.any(self.gaps[~pc] != 0.0):
            raise InvariantViolation("non-price-changing event with gap != 0")
        if np.any(self.gaps[pc] == 0.0):
            raise InvariantViolation("price-changing event with gap == 0")
        if np.any(np.diff(self.day_index) < 0):
            raise InvariantViolation("day_index decreases")
        mid_step = self.mid_before + self.signs * self.gaps
        if not np.array_equal(self.mid_after, mid_step):
            raise InvariantViolation("mid_after != mid_before + sign*gap")
        spread_step = self.spread_before + _SPREAD_COEF[types] * self.gaps
        if not np.array_equal(self.spread_after, spread_step):
            raise InvariantViolation("spread_after violates the gap law")
        for sl in self.day_slices():
            if np.any(np.diff(self.timestamps[sl]) < 0):
                raise InvariantViolation("timestamps decrease within a day")
            if sl.stop - sl.start < 2:
                continue
            if not np.array_equal(self.mid_before[sl][1:], self.mid_after[sl][:-1]):
                raise InvariantViolation("mid chain broken within a day")
            if not np.array_equal(
                self.spread_before[sl][1:], self.spread_after[sl][:-1]
            ):
                raise InvariantViolation("spread chain broken within a day")

    def equals(self, other: "EventStream") -> bool:
        """Field-for-field equality (used by the CSV round-trip contract)."""
        if self.symbol != other.symbol or self.tick_size != other.tick_size:
            return False
        if self.session_trim != other.session_trim:
            return False
        if (self.volumes is None) != (other.volumes is None):
            return False
        pairs = [
            (self.timestamps, other.timestamps),
            (self.day_index, other.day_index),
            (self.event_types, other.event_types),
            (self.signs, other.signs),
            (self.gaps, other.gaps),
            (self.mid_before, other.mid_before),
            (self.mid_after, other.mid_after),
            (self.spread_before, other.spread_before),
            (self.spread_after, other.spread_after),
            (self.day_starts, other.day_starts),
        ]
        if self.volumes is not None:
            pairs.append((self.volumes, other.volumes))
        return all(np.array_equal(a, b) for a, b in pairs)


def _day_starts(day_index: np.ndarray) -> np.ndarray:
    if len(day_index) == 0:
        return np.zeros(0, dtype=np.int64)
    change = np.flatnonzero(np.diff(day_index)) + 1
    return np.concatenate([[0], change]).astype(np.int64)


def _chained_path(first: float, steps: np.ndarray) -> np.ndarray:
    # Single sequential cumsum including the opening value, so that
    # path[i+1] == path[i] + steps[i] holds exactly in floating point.
    return np.cumsum(np.concatenate([[first], steps]))


def reconstruct_mid(stream: EventStream) -> np.ndarray:
    """Rebuild the mid path from signs and gaps; verify it matches.

    Returns an array of length ``len(stream) + 1`` whose entry ``t`` is the
    mid just before event ``t`` (the last entry is the final mid).  Across
    day boundaries the path restarts from the recorded opening mid.

    Raises BrokenChain if the rebuilt path disagrees with the recorded
    ``mid_before``/``mid_after`` columns anywhere -- the identity is exact,
    so any mismatch signals an ingest bug.
    """
    return _reconstruct(stream, stream.mid_before, stream.mid_after,
                        stream.signs * stream.gaps, "mid")


def reconstruct_spread(stream: EventStream) -> np.ndarray:
    """Rebuild the spread path from gaps; verify it matches the records.

    Same conventions as :func:`reconstruct_mid`; the step is +2*gap for
    MOP/CAP, -2*gap for LOP and 0 otherwise.
    """
    steps = _SPREAD_COEF[stream.event_types] * stream.gaps
    return _reconstruct(stream, stream.spread_before, stream.spread_after,
                        steps, "spread")


def _reconstruct(stream, before, after, steps, what):
    n = len(stream)
    out = np.empty(n + 1)
    if n == 0:
        return out[:0]
    for sl in stream.day_slices():
        path = _chained_path(before[sl.start], steps[sl])
        if not np.array_equal(path[:-1], before[sl]):
            t = sl.start + int(np.flatnonzero(path[:-1] != before[sl])[0])
            raise BrokenChain(
                f"{what} chain mismatch at event {t}: rebuilt "
                f"{path[t - sl.start]} vs recorded {before[t]}"
            )
        if path[-1] != after[sl.stop - 1]:
            raise BrokenChain(
                f"{what} chain mismatch at end of day slice {sl}: rebuilt "
                f"{path[-1]} vs recorded {after[sl.stop - 1]}"
            )
        out[sl.start:sl.stop] = path[:-1]
    out[n] = after[n - 1]
    return out


def assemble_stream(
    symbol: str,
    tick_size: float,
    timestamps: np.ndarray,
    day_index: np.ndarray,
    event_types: np.ndarray,
    signs: np.ndarray,
    gaps: np.ndarray,
    mid_open,
    spread_open,
    volumes: np.ndarray | None = None,
    session_trim: tuple[int, int] = (0, 0),
    validate: bool = True,
) -> EventStream:
    """Build a stream from raw event columns plus per-day opening quotes.

    ``mid_open`` / ``spread_open`` are scalars (one day) or one value per
    day.  Mid and spread paths are accumulated sequentially so the exact
    step identities hold bitwise.
    """
    day_index = np.asarray(day_index, dtype=np.int32)
    event_types = np.asarray(event_types, dtype=np.int8)
    signs = np.asarray(signs, dtype=np.int8)
    gaps = np.asarray(gaps, dtype=np.float64)
    starts = _day_starts(day_index)
    mid_open = np.broadcast_to(np.asarray(mid_open, dtype=np.float64),
                               (len(starts),))
    spread_open = np.broadcast_to(np.asarray(spread_open, dtype=np.float64),
                                  (len(starts),))
    n = len(event_types)
    mid_before = np.empty(n)
    mid_after = np.empty(n)
    spread_before = np.empty(n)
    spread_after = np.empty(n)
    edges = np.append(starts, n)
    mid_steps = signs * gaps
    spread_steps = _SPREAD_COEF[event_types] * gaps
    for d, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        mp = _chained_path(mid_open[d], mid_steps[a:b])
        sp = _chained_path(spread_open[d], spread_steps[a:b])
        mid_before[a:b], mid_after[a:b] = mp[:-1], mp[1:]
        spread_before[a:b], spread_after[a:b] = sp[:-1], sp[1:]
    stream = EventStream(
        symbol=symbol,
        tick_size=float(tick_size),
        timestamps=np.asarray(timestamps, dtype=np.int64),
        day_index=day_index,
        event_types=event_types,
        signs=signs,
        gaps=gaps,
        mid_before=mid_before,
        mid_after=mid_after,
        spread_before=spread_before,
        spread_after=spread_after,
        volumes=None if volumes is None else np.asarray(volumes, np.int64),
        day_starts=starts,
        session_trim=session_trim,
    )
    if validate:
        stream.validate()
    return stream


def trim_session(stream: EventStream, minutes_start: int,
                 minutes_end: int) -> EventStream:
    """Drop the first/last minutes of every day; chains stay exact.

    Trimming keeps one contiguous block per day, so the within-day
    mid/spread identities survive untouched.
    """
    if minutes_start == 0 and minutes_end == 0:
        return stream
    keep = np.zeros(len(stream), dtype=bool)
    for sl in stream.day_slices():
        ts = stream.timestamps[sl]
        day_ns = (ts // NS_PER_DAY) * NS_PER_DAY
        tod = ts - day_ns
        lo = tod.min() + minutes_start * NS_PER_MINUTE
        hi = tod.max() - minutes_end * NS_PER_MINUTE
        keep[sl] = (tod >= lo) & (tod <= hi)
    idx = np.flatnonzero(keep)
    vols = None if stream.volumes is None else stream.volumes[idx]
    return EventStream(
        symbol=stream.symbol,
        tick_size=stream.tick_size,
        timestamps=stream.timestamps[idx],
        day_index=stream.day_index[idx],
        event_types=stream.event_types[idx],
        signs=stream.signs[idx],
        gaps=stream.gaps[idx],
        mid_before=stream.mid_before[idx],
        mid_after=stream.mid_after[idx],
        spread_before=stream.spread_before[idx],
        spread_after=stream.spread_after[idx],
        volumes=vols,
        day_starts=None,
        session_trim=(minutes_start, minutes_end),
    )
