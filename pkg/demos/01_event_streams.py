"""Event streams: generate, inspect, reconstruct, round-trip.

Walks the basic data model: the six event types, signs and sides, the gap
of each price-changing event, and the exact jump identities that tie gaps
to the mid and the spread.  Everything downstream rests on these being
exact, so we check them here on a freshly generated stream.

Run:  python demos/01_event_streams.py
"""

import numpy as np

import bookimpact as bi

# a small-tick-like synthetic stream: fluctuating gaps, sticky signs
config = bi.small_tick_config(n_events=100_000, seed=42, n_days=5)
stream = bi.generate(config)

print(f"stream: {len(stream)} events over {stream.n_days} days, "
      f"tick size {stream.tick_size}")
probs = stream.type_probabilities()
for t in bi.EventType:
    print(f"  P({t.name}) = {probs[t.value]:.4f}")

# look at a few events
for ev in list(stream)[:5]:
    print(f"  {ev.event_type.name:>3} sign {ev.sign:+d} side {ev.side:+d} "
          f"gap {ev.gap:5.3f}  mid {ev.mid_before:9.3f} -> {ev.mid_after:9.3f}")

# the mid and spread are pure jump processes; rebuilding them from signs
# and gaps must agree with the recorded paths bit for bit
mid = bi.reconstruct_mid(stream)
spread = bi.reconstruct_spread(stream)
assert np.array_equal(mid[:-1], stream.mid_before)
assert np.array_equal(spread[:-1], stream.spread_before)
print("mid/spread reconstruction: exact")

# event CSV round trip is lossless
bi.write_event_csv(stream, "/tmp/demo_events.csv")
back = bi.load_event_csv("/tmp/demo_events.csv")
assert stream.equals(back)
print("CSV round trip: exact (wrote /tmp/demo_events.csv)")

# session trimming drops the opening/closing minutes but keeps the chains
trimmed = bi.trim_session(stream, 30, 40)
print(f"trimmed stream: {len(trimmed)} events "
      f"({len(trimmed) / len(stream):.1%} of the session)")
