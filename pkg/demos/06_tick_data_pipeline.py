"""Raw tick data to classified events.

Builds a tiny trades-and-quotes tape by hand, runs the classifier, and
shows the resulting events plus the bookkeeping report: how trades on the
same side within a millisecond merge into one market order, how a queue
wipe-out becomes a price-changing market order whose gap is half the
revealed move, and how everything unclassifiable is counted rather than
dropped.  Real files go through the same two CSV loaders.

Run:  python demos/06_tick_data_pipeline.py
"""

import pandas as pd

import bookimpact as bi

DAY = 86_400_000_000_000
OPEN = 13_940 * DAY + int(9.5 * 3600) * 10 ** 9
MS = 1_000_000


def at(ms):
    return OPEN + ms * MS


bbo = pd.DataFrame([
    # ts, bid, ask, bid size, ask size
    (at(0),   25.40, 25.41, 800, 600),
    (at(12),  25.40, 25.41, 800, 450),   # partial eat of the ask queue
    (at(25),  25.40, 25.41, 950, 450),   # fresh bid depth
    (at(40),  25.40, 25.44, 950, 300),   # ask queue emptied, book jumps
    (at(55),  25.42, 25.44, 200, 300),   # bid improves into the spread
    (at(70),  25.42, 25.44, 120, 300),   # bid partially cancelled
], columns=["timestamp_ns", "bid_price", "ask_price", "bid_size",
            "ask_size"])

trades = pd.DataFrame([
    # two buy prints 0.4 ms apart: one aggressor, one market order
    (at(12) - MS // 2, 25.41, 90, 1),
    (at(40) - MS // 2, 25.41, 300, 1),
    (at(40) - MS // 10, 25.41, 150, 1),
], columns=["timestamp_ns", "price", "size", "aggressor_side"])

config = bi.IngestConfig(symbol="DEMO", tick_size=0.01)
stream, report = bi.classify(bbo, trades, config)

print("classified events:")
for ev in stream:
    print(f"  {ev.event_type.name:>3} sign {ev.sign:+d} gap {ev.gap:4.2f} "
          f"mid {ev.mid_before:8.2f} -> {ev.mid_after:8.2f}  vol {ev.volume}")

print("\nreport:")
for key in ("quote_records", "quote_side_changes", "trades_raw",
            "trades_aggregated", "events", "trades_consumed",
            "unmatched_trades", "crossed_quotes"):
    print(f"  {key}: {getattr(report, key)}")
print("  conservation holds:", report.conserved())

bi.write_event_csv(stream, "/tmp/demo_ingested.csv")
print("\nwrote /tmp/demo_ingested.csv; feed it to the stats demo or the "
      "command line:\n  bookimpact stats --in /tmp/demo_ingested.csv "
      "--out /tmp/stats.json --max-lag 2")
