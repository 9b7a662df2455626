"""Correlation and response functions of the event flow.

Estimates the signed and unsigned event-event correlations, the sign and
side autocorrelations, the price response per event type, and the
diffusion curve.  The interesting contrast: the side of the order flow is
long-range correlated (persistent pressure on one side of the book) while
the signed flow decorrelates fast -- the compensation that keeps prices
close to diffusive.

Run:  python demos/02_correlations_and_response.py
"""

import numpy as np

import bookimpact as bi

stream = bi.generate(bi.small_tick_config(
    n_events=300_000, seed=7, n_days=10,
    sign_process="longmem", side_gamma=0.7))

corr = bi.estimate_correlations(stream, max_lag=300)
resp = bi.estimate_response(stream, max_lag=300)
dif = bi.estimate_diffusion(stream, max_lag=300)

print("lag-zero identities:")
print("  C(0) diagonal * P :",
      np.round(np.diag(corr.signed[:, :, 0]) * corr.probabilities, 12))

print("\nside vs sign autocorrelation (long vs short memory):")
for lag in (1, 5, 20, 80, 250):
    print(f"  lag {lag:3d}: side {corr.side_autocorr[lag]:+.4f}   "
          f"sign {corr.sign_autocorr[lag]:+.4f}")

print("\nresponse at selected lags (ticks):")
for t in bi.EventType:
    r = resp.response[t.value]
    print(f"  {t.name:>3}: R(1) = {r[1]:+.4f}  R(10) = {r[10]:+.4f}  "
          f"R(100) = {r[100]:+.4f}")

print("\ndiffusion D(l)/l (ticks^2):")
for lag in (1, 10, 100, 300):
    print(f"  l = {lag:3d}: {dif.diffusion[lag] / lag:.4f}")

# dump everything for plotting
np.savez("/tmp/demo_curves.npz",
         lags=corr.lags, C=corr.signed, PI=corr.unsigned,
         R=resp.response, D=dif.diffusion)
print("\nwrote curve arrays to /tmp/demo_curves.npz")
