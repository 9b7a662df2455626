"""Spread dynamics: mean reversion, response, autocorrelation.

The spread widens when a market order or cancellation empties the best
queue and narrows when a limit order lands inside it; on average the two
balance, and the balance tightens when the spread is far from its mean.
This demo generates a stream with that adaptation planted, measures the
spread response per event type, recovers the reversion strength by grid
search, and shows the implied (exponential) spread autocorrelation.

Run:  python demos/05_spread_dynamics.py
"""

import numpy as np

import bookimpact as bi

stream = bi.generate(bi.spread_model_config(
    n_events=400_000, seed=31, n_days=10, alpha=1e-2))
stream = bi.trim_session(stream, 30, 40)

drift, se = bi.spread_drift(stream)
print(f"one-step spread drift: {drift:+.2e} ticks (s.e. {se:.2e}) "
      "-- openings and closings balance")

corr = bi.estimate_correlations(stream, max_lag=500, n_bootstrap=0)
rs = bi.estimate_spread_response(stream, max_lag=500, n_bootstrap=0)
model = bi.build_spread_model(stream)
alpha_hat, grid, objective = bi.fit_alpha(model, corr, rs.spread_response,
                                          ell_max=300)
print(f"recovered mean-reversion strength: {alpha_hat:.4f} (planted 0.01)")

best = bi.build_spread_model(stream, alpha=alpha_hat)
pred = bi.predict_spread_response(best, corr, 300)
print("\nspread response, measured vs model (ticks):")
for t in (bi.EventType.MOP, bi.EventType.LOP, bi.EventType.MO0):
    k = t.value
    print(f"  {t.name}: RS(1) {rs.spread_response[k, 1]:+.3f}/"
          f"{pred[k, 1]:+.3f}   RS(100) {rs.spread_response[k, 100]:+.3f}/"
          f"{pred[k, 100]:+.3f}")

acf, rate, diag = bi.spread_autocorrelation(stream, 300)
print(f"\nspread autocorrelation: decay rate {rate:.4f} per event "
      f"(log-fit R^2 {diag['r_squared']:.3f}); "
      f"near unit root: {diag['near_unit_root']}")

# realized gaps against the prevailing spread: the adaptation profile
profile = bi.gaps_vs_spread(stream, np.arange(8.0, 23.0, 1.5))
mids = 0.5 * (profile.spread_bin_edges[:-1] + profile.spread_bin_edges[1:])
print("\ndoubled MOP gap by spread bin (narrow book opens wider):")
for m, g, n in zip(mids, profile.spread_bin_gaps[0],
                   profile.spread_bin_counts[0]):
    if n > 200:
        print(f"  spread ~{m:5.1f}: 2*gap = {2 * g:.3f}  (n = {n})")
