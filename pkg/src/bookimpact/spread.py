"""Bid-ask spread dynamics under the event-flow framework.

The spread is an exact jump process too: market orders and cancellations
that empty the best queue open it by twice the gap, limit orders inside
the spread close it by twice theirs.  Unlike the mid it mean-reverts, so a
frozen-gap description needs one extra ingredient: gaps and event rates
adjust to pull the spread back toward its mean.  The model here folds both
adjustments into a single linear strength ``alpha``: the expected signed
spread step of an event is its mean step plus ``alpha`` times the distance
of the spread from its type-conditional mean.

With ``alpha = 0`` the predicted spread response is a pure convolution of
the unsigned event-event correlations with the mean signed steps; positive
``alpha`` adds geometric relaxation toward the mean, which also implies an
exponentially decaying spread autocorrelation -- adequate at short lags,
visibly too fast at long ones, and the fit diagnostics say so rather than
hiding it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._xcorr import xcorr_sums
from .errors import AlphaOutOfRange, DimensionMismatch, InsufficientData
from .events import EventStream, PRICE_CHANGING, EventType
from .gapmodel import RealizedGaps, realized_gaps
from .stats import CorrelationSet

__all__ = [
    "SpreadModel",
    "build_spread_model",
    "gaps_vs_spread",
    "predict_spread_response",
    "spread_autocorrelation",
    "spread_drift",
    "fit_alpha",
]

PC_CODES = np.array([e.value for e in PRICE_CHANGING])
#: signed doubled-gap coefficient per type code
_DBAR_COEF = np.array([0.0, 2.0, 0.0, 0.0, 2.0, -2.0])


@dataclass(frozen=True)
class SpreadModel:
    """Mean-reversion description of the spread.

    ``dbar_r[pi]`` is the signed mean spread step of type pi: +2 times the
    realized gap for queue-emptying market orders and cancellations, -2
    times it for spread-improving limit orders, zero otherwise.  On a
    stationary stream the probability-weighted sum of these steps balances
    to zero -- openings and closings cancel on average.
    """

    alpha: float
    mean_spread: float                 # ticks
    mean_spread_by_type: np.ndarray    # (6,) ticks
    dbar_r: np.ndarray                 # (6,) signed mean steps, ticks
    probabilities: np.ndarray          # (6,)

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise AlphaOutOfRange(f"alpha = {self.alpha} outside [0, 1)")


def build_spread_model(stream: EventStream, alpha: float = 0.0,
                       gaps: RealizedGaps | None = None) -> SpreadModel:
    """Estimate the spread model ingredients from a (trimmed) stream."""
    if len(stream) == 0:
        raise InsufficientData("empty stream")
    if gaps is None:
        gaps = realized_gaps(stream)
    dbar = _DBAR_COEF * gaps.as_vector()
    s = stream.spread_before
    mean_by_type = np.zeros(6)
    probs = stream.type_probabilities()
    for k in range(6):
        sel = stream.event_types == k
        if sel.any():
            mean_by_type[k] = s[sel].mean()
    return SpreadModel(
        alpha=float(alpha),
        mean_spread=float(s.mean()),
        mean_spread_by_type=mean_by_type,
        dbar_r=dbar,
        probabilities=probs,
    )


def gaps_vs_spread(stream: EventStream, bins: np.ndarray) -> RealizedGaps:
    """Realized gaps conditioned on the spread just before the event.

    Empty bins stay NaN with a zero count -- flagged, never interpolated.
    """
    return realized_gaps(stream, spread_bins=np.asarray(bins, dtype=float))


def _adjusted_unsigned(corr: CorrelationSet, model: SpreadModel) -> np.ndarray:
    """Rescale the tail of the closing-type excess probabilities so the
    frozen-gap spread prediction has zero drift at large lags.

    Multiplicative on (PI + 1) for the spread-closing column at lags past
    half the cutoff; on a stationary stream the factor is close to one.
    """
    pis = corr.unsigned.copy()
    L = corr.max_lag
    half = L // 2
    m = model.dbar_r * model.probabilities          # (6,) signed weights
    lop = int(EventType.LOP)
    tail = slice(half + 1, L + 1)
    for p1 in range(6):
        sub = pis[p1, :, tail]                      # (6, tail length)
        others = float((np.delete(m, lop)[:, None]
                        * np.delete(sub, lop, axis=0)).sum(axis=0).mean())
        lop_tail = float(np.mean(sub[lop]))
        denom = m[lop] * (lop_tail + 1.0)
        if denom == 0.0:
            continue
        # choose f with zero tail drift on average:
        # others + m_lop * (f * (PI_lop + 1) - 1) = 0
        f = (m[lop] - others) / denom
        pis[p1, lop, tail] = f * (sub[lop] + 1.0) - 1.0
    return pis


def predict_spread_response(
    model: SpreadModel,
    corr: CorrelationSet,
    ell_max: int,
    adjust_tails: bool = True,
) -> np.ndarray:
    """Spread response implied by the mean-reversion model.

    Two pieces: relaxation of the type-conditional spread toward the
    unconditional mean, plus the geometrically damped convolution of the
    unsigned event correlations with the mean signed steps.  At alpha = 0
    the first piece vanishes and the damping weights are all one.
    """
    if ell_max > corr.max_lag:
        raise DimensionMismatch("ell_max exceeds correlation lag range")
    alpha = model.alpha
    pis = _adjusted_unsigned(corr, model) if adjust_tails else corr.unsigned
    m = model.dbar_r * model.probabilities
    w = np.einsum("j,ijl->il", m, pis[:, :, :ell_max])   # (6, ell_max)
    out = np.zeros((6, ell_max + 1))
    conv = np.zeros(6)
    for ell in range(1, ell_max + 1):
        conv = (1.0 - alpha) * conv + w[:, ell - 1]
        relax = (model.mean_spread - model.mean_spread_by_type) \
            * (1.0 - (1.0 - alpha) ** ell)
        out[:, ell] = relax + conv
    return out


def spread_autocorrelation(stream: EventStream, max_lag: int,
                           fit_lags: int = 100):
    """Normalized spread autocorrelation plus an exponential-decay fit.

    Returns ``(acf, rate, diagnostics)``: the fitted rate is per event;
    the diagnostics report the log-linear fit quality and flag near unit
    roots (no measurable mean reversion over the fitted window).
    """
    if len(stream) <= max_lag:
        raise InsufficientData("stream shorter than max_lag")
    s = stream.spread_before
    mean = s.mean()
    raw = np.zeros(max_lag + 1)
    cnt = np.zeros(max_lag + 1)
    for sl in stream.day_slices():
        t = sl.stop - sl.start
        if t == 0:
            continue
        x = s[sl] - mean
        raw += xcorr_sums(x[None], x[None], max_lag)[0, 0]
        cnt += np.clip(t - np.arange(max_lag + 1), 0, None)
    with np.errstate(invalid="ignore", divide="ignore"):
        cov = np.nan_to_num(raw / cnt)
    if cov[0] <= 0:
        raise InsufficientData("spread has zero variance")
    acf = cov / cov[0]
    n_fit = min(fit_lags, max_lag)
    lags = np.arange(1, n_fit + 1)
    vals = acf[1:n_fit + 1]
    pos = vals > 0.05
    if pos.sum() >= 5:
        slope, intercept = np.polyfit(lags[pos], np.log(vals[pos]), 1)
        rate = -float(slope)
        fitted = slope * lags[pos] + intercept
        ssr = float(((np.log(vals[pos]) - fitted) ** 2).sum())
        sst = float(((np.log(vals[pos]) - np.log(vals[pos]).mean()) ** 2).sum())
        r2 = 1.0 - ssr / sst if sst > 0 else 1.0
    else:
        rate, r2 = 0.0, 0.0
    diagnostics = {
        "fit_lags": int(n_fit),
        "r_squared": r2,
        "near_unit_root": bool(rate < 1e-4 or acf[n_fit] > 0.98),
    }
    return acf, rate, diagnostics


def spread_drift(stream: EventStream):
    """Mean one-step spread change and its day-block standard error.

    Zero within noise on any stationary stream: the spread-opening effect
    of market orders and cancellations balances the closing effect of
    limit orders on average.
    """
    diffs = stream.spread_after - stream.spread_before
    mean = float(diffs.mean())
    per_day = [diffs[sl].mean() for sl in stream.day_slices()
               if sl.stop > sl.start]
    if len(per_day) > 1:
        se = float(np.std(per_day, ddof=1) / np.sqrt(len(per_day)))
    else:
        se = float(diffs.std() / np.sqrt(max(len(diffs), 1)))
    return mean, se


def fit_alpha(
    model: SpreadModel,
    corr: CorrelationSet,
    empirical: np.ndarray,
    ell_max: int,
    grid: np.ndarray | None = None,
    adjust_tails: bool = True,
):
    """Grid-search the mean-reversion strength against a measured response.

    ``empirical`` is the (6, >= ell_max + 1) measured spread response.
    Returns ``(alpha_hat, grid, objective)`` where the objective is the
    mean squared prediction error over types present and lags up to
    ``ell_max``.
    """
    if grid is None:
        grid = np.concatenate([[0.0], np.logspace(-4, -0.5, 25)])
    present = model.probabilities > 0
    obj = np.empty(len(grid))
    for i, a in enumerate(grid):
        trial = SpreadModel(
            alpha=float(a),
            mean_spread=model.mean_spread,
            mean_spread_by_type=model.mean_spread_by_type,
            dbar_r=model.dbar_r,
            probabilities=model.probabilities,
        )
        pred = predict_spread_response(trial, corr, ell_max,
                                       adjust_tails=adjust_tails)
        err = pred[present, 1:ell_max + 1] - empirical[present, 1:ell_max + 1]
        obj[i] = float((err ** 2).mean())
    best = int(np.argmin(obj))
    return float(grid[best]), grid, obj
