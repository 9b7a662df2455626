"""Empirical correlation, response and diffusion estimators.

Everything here is a plain time average over event pairs ``(t, t + lag)``.
With ``same_day_only`` (the default) pairs straddling a day boundary are
excluded.  The estimators are linear in the per-day raw sums, which are
kept on the result objects: combining two disjoint substreams by adding
raw sums and counts reproduces the full-stream estimate exactly, and
standard errors come from a non-overlapping block bootstrap with one
trading day per block.

Conventions
-----------
* ``C[p1, p2, l]`` is the signed event-event correlation: the covariance
  of sign-times-indicator at lag ``l``, normalized by the product of the
  two event-type probabilities.  The first index is the chronologically
  earlier event.  At lag 0 the diagonal is ``1 / P(pi)`` and off-diagonal
  entries vanish (one event per step).
* ``PI[p1, p2, l]`` is the unsigned analogue minus one, i.e. the excess
  probability of seeing type ``p2`` a lag ``l`` after a ``p1`` event.
* ``R[pi, l]`` is the mean signed mid move ``l`` events after a ``pi``
  event; the spread response uses the raw (unsigned) spread change.
* ``D[l]`` is the second moment of the mid change over ``l`` events.

No mean is subtracted anywhere: residual sign imbalance is reported as a
per-type diagnostic instead of being silently removed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._xcorr import xcorr_sums
from .errors import InsufficientData
from .events import EventStream

__all__ = [
    "CorrelationSet",
    "ResponseSet",
    "estimate_correlations",
    "estimate_sign_autocorrs",
    "estimate_response",
    "estimate_spread_response",
    "estimate_diffusion",
    "signed_covariance",
]

DEFAULT_MAX_LAG = 1000
DEFAULT_MIN_COUNT = 25
DEFAULT_BOOTSTRAP = 200


@dataclass(frozen=True)
class CorrelationSet:
    """All event-event correlation functions of one stream."""

    max_lag: int
    n_events: int
    same_day_only: bool
    probabilities: np.ndarray       # (6,)
    type_counts: np.ndarray         # (6,) int64
    signed: np.ndarray              # C, (6, 6, L+1)
    unsigned: np.ndarray            # PI, (6, 6, L+1)
    sign_autocorr: np.ndarray       # (L+1,)
    side_autocorr: np.ndarray       # (L+1,)
    pair_counts: np.ndarray         # (6, 6, L+1) int64 joint occurrences
    pair_totals: np.ndarray         # (L+1,) int64 pairs entering each lag
    signed_pair_sums: np.ndarray    # (6, 6, L+1) int64: same-sign minus
                                    # opposite-sign pair counts
    sign_mean_by_type: np.ndarray   # (6,) diagnostic <eps | pi>
    low_count: np.ndarray           # (6, 6, L+1) bool, too few joint samples
    signed_se: np.ndarray | None = None    # bootstrap s.e. of C
    day_signed: np.ndarray | None = field(default=None, repr=False)
    day_pairs: np.ndarray | None = field(default=None, repr=False)
    day_totals: np.ndarray | None = field(default=None, repr=False)
    day_type_counts: np.ndarray | None = field(default=None, repr=False)

    @property
    def lags(self) -> np.ndarray:
        return np.arange(self.max_lag + 1)

    def signed_raw(self) -> np.ndarray:
        """P(p1) * P(p2) * C -- the raw signed covariance used by solvers."""
        pp = self.probabilities[:, None] * self.probabilities[None, :]
        return self.signed * pp[:, :, None]


@dataclass(frozen=True)
class ResponseSet:
    """Price response, spread response and diffusion curves."""

    max_lag: int
    same_day_only: bool
    probabilities: np.ndarray
    response: np.ndarray | None = None          # (6, L+1)
    response_se: np.ndarray | None = None
    response_counts: np.ndarray | None = None   # (6, L+1) int64
    spread_response: np.ndarray | None = None   # (6, L+1)
    spread_response_se: np.ndarray | None = None
    spread_response_counts: np.ndarray | None = None
    diffusion: np.ndarray | None = None         # (L+1,)
    diffusion_se: np.ndarray | None = None
    diffusion_counts: np.ndarray | None = None
    day_raw: dict | None = field(default=None, repr=False)

    @property
    def lags(self) -> np.ndarray:
        return np.arange(self.max_lag + 1)


def _check_length(stream: EventStream, max_lag: int) -> None:
    if len(stream) < 10 * max_lag:
        raise InsufficientData(
            f"stream has {len(stream)} events; need at least 10 * max_lag "
            f"= {10 * max_lag}"
        )


def _segments(stream: EventStream, same_day_only: bool) -> list[slice]:
    if same_day_only:
        return stream.day_slices()
    return [slice(0, len(stream))]


def _bootstrap_se(day_num, day_den, n_boot, seed, extra=None):
    """S.e. of ratio-of-sums statistics under a day-block bootstrap.

    day_num/day_den: arrays with leading day axis.  ``extra`` optionally
    maps resampled day weights to a per-resample normalizer (used for the
    probability products in C).
    """
    n_days = day_num.shape[0]
    if n_days < 2 or n_boot <= 0:
        return None
    rng = np.random.default_rng(seed)
    acc = np.zeros(day_num.shape[1:])
    acc2 = np.zeros(day_num.shape[1:])
    for _ in range(n_boot):
        w = np.bincount(rng.integers(0, n_days, n_days),
                        minlength=n_days).astype(np.float64)
        num = np.tensordot(w, day_num, axes=(0, 0))
        den = np.tensordot(w, day_den, axes=(0, 0))
        with np.errstate(invalid="ignore", divide="ignore"):
            val = num / den
        if extra is not None:
            val = extra(w, val)
        val = np.nan_to_num(val)
        acc += val
        acc2 += val * val
    var = acc2 / n_boot - (acc / n_boot) ** 2
    return np.sqrt(np.clip(var, 0.0, None))


def estimate_correlations(
    stream: EventStream,
    max_lag: int = DEFAULT_MAX_LAG,
    same_day_only: bool = True,
    min_count: int = DEFAULT_MIN_COUNT,
    n_bootstrap: int = DEFAULT_BOOTSTRAP,
    seed: int = 0,
) -> CorrelationSet:
    """Estimate P, C, PI and the sign/side autocorrelations in one pass."""
    _check_length(stream, max_lag)
    segs = _segments(stream, same_day_only)
    nseg = len(segs)
    L = max_lag

    day_signed = np.zeros((nseg, 6, 6, L + 1))
    day_pairs = np.zeros((nseg, 6, 6, L + 1))
    day_sign = np.zeros((nseg, L + 1))
    day_side = np.zeros((nseg, L + 1))
    day_totals = np.zeros((nseg, L + 1))
    day_counts = np.zeros((nseg, 6))

    types = stream.event_types
    signs = stream.signs.astype(np.float64)
    sides = stream.sides.astype(np.float64)
    for d, sl in enumerate(segs):
        t = sl.stop - sl.start
        if t == 0:
            continue
        ind = np.zeros((6, t))
        ind[types[sl], np.arange(t)] = 1.0
        xi = ind * signs[sl]
        day_signed[d] = np.rint(xcorr_sums(xi, xi, L))
        day_pairs[d] = np.rint(xcorr_sums(ind, ind, L))
        day_sign[d] = np.rint(xcorr_sums(signs[sl][None], signs[sl][None], L))[0, 0]
        day_side[d] = np.rint(xcorr_sums(sides[sl][None], sides[sl][None], L))[0, 0]
        day_totals[d] = np.clip(t - np.arange(L + 1), 0, None)
        day_counts[d] = np.bincount(types[sl], minlength=6)

    counts = day_counts.sum(axis=0)
    n = int(counts.sum())
    prob = counts / n
    totals = day_totals.sum(axis=0)
    signed_sums = day_signed.sum(axis=0)
    pair_sums = day_pairs.sum(axis=0)

    pp = prob[:, None] * prob[None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        mean_signed = signed_sums / totals[None, None, :]
        mean_pairs = pair_sums / totals[None, None, :]
        signed = np.where(pp[:, :, None] > 0, mean_signed / pp[:, :, None], 0.0)
        unsigned = np.where(pp[:, :, None] > 0,
                            mean_pairs / pp[:, :, None] - 1.0, 0.0)
        sign_ac = day_sign.sum(axis=0) / totals
        side_ac = day_side.sum(axis=0) / totals
    signed = np.nan_to_num(signed)
    unsigned = np.where(totals[None, None, :] > 0, np.nan_to_num(unsigned), 0.0)

    sign_sums = np.zeros(6)
    np.add.at(sign_sums, types, signs)
    with np.errstate(invalid="ignore", divide="ignore"):
        sign_mean = np.where(counts > 0, sign_sums / counts, 0.0)

    def _c_from_resample(w, _ignored):
        cnt = np.tensordot(w, day_counts, axes=(0, 0))
        pb = cnt / cnt.sum()
        ppb = pb[:, None] * pb[None, :]
        num = np.tensordot(w, day_signed, axes=(0, 0))
        den = np.tensordot(w, day_totals, axes=(0, 0))
        with np.errstate(invalid="ignore", divide="ignore"):
            return num / den[None, None, :] / ppb[:, :, None]

    signed_se = _bootstrap_se(
        day_signed, np.broadcast_to(day_totals[:, None, None, :],
                                    day_signed.shape),
        n_bootstrap, seed,
        extra=lambda w, _v: _c_from_resample(w, _v),
    )

    return CorrelationSet(
        max_lag=L,
        n_events=n,
        same_day_only=same_day_only,
        probabilities=prob,
        type_counts=counts.astype(np.int64),
        signed=signed,
        unsigned=unsigned,
        sign_autocorr=np.nan_to_num(sign_ac),
        side_autocorr=np.nan_to_num(side_ac),
        pair_counts=pair_sums.astype(np.int64),
        pair_totals=totals.astype(np.int64),
        signed_pair_sums=signed_sums.astype(np.int64),
        sign_mean_by_type=sign_mean,
        low_count=pair_sums < min_count,
        signed_se=signed_se,
        day_signed=day_signed,
        day_pairs=day_pairs,
        day_totals=day_totals,
        day_type_counts=day_counts,
    )


def estimate_sign_autocorrs(
    stream: EventStream,
    max_lag: int = DEFAULT_MAX_LAG,
    same_day_only: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Plain <eps_t eps_{t+l}> and <s_t s_{t+l}> autocorrelations."""
    if len(stream) <= max_lag:
        raise InsufficientData("stream shorter than max_lag")
    segs = _segments(stream, same_day_only)
    sign_sum = np.zeros(max_lag + 1)
    side_sum = np.zeros(max_lag + 1)
    totals = np.zeros(max_lag + 1)
    signs = stream.signs.astype(np.float64)
    sides = stream.sides.astype(np.float64)
    for sl in segs:
        t = sl.stop - sl.start
        if t == 0:
            continue
        sign_sum += np.rint(xcorr_sums(signs[sl][None], signs[sl][None],
                                       max_lag))[0, 0]
        side_sum += np.rint(xcorr_sums(sides[sl][None], sides[sl][None],
                                       max_lag))[0, 0]
        totals += np.clip(t - np.arange(max_lag + 1), 0, None)
    with np.errstate(invalid="ignore", divide="ignore"):
        return (np.nan_to_num(sign_sum / totals),
                np.nan_to_num(side_sum / totals))


def _path_engine(stream, max_lag, same_day_only, want):
    """Shared per-day pass for the path-based estimators (R, RS, D).

    Each day contributes a (T+1)-point price/spread path (mid before every
    event plus the final mid), so the lag-1 window covers every event and
    the tautological identities R(1) = mean realized gap hold over the
    exact same sample as the gap statistics.  Returns per-day raw sums and
    counts; each statistic is a ratio of the summed raws, so day blocks
    recombine exactly.
    """
    segs = _segments(stream, same_day_only)
    L = max_lag
    nseg = len(segs)
    out = {}
    if "R" in want:
        out["R_raw"] = np.zeros((nseg, 6, L + 1))
        out["R_cnt"] = np.zeros((nseg, 6, L + 1))
    if "RS" in want:
        out["RS_raw"] = np.zeros((nseg, 6, L + 1))
        out["RS_cnt"] = np.zeros((nseg, 6, L + 1))
    if "D" in want:
        out["D_raw"] = np.zeros((nseg, L + 1))
        out["D_cnt"] = np.zeros((nseg, L + 1))

    types = stream.event_types
    signs = stream.signs.astype(np.float64)
    lvec = np.arange(L + 1)
    for d, sl in enumerate(segs):
        t = sl.stop - sl.start
        if t == 0:
            continue
        valid = lvec <= t
        p = np.empty(t + 1)
        p[:t] = stream.mid_before[sl]
        p[t] = stream.mid_after[sl.stop - 1]
        s = np.empty(t + 1)
        s[:t] = stream.spread_before[sl]
        s[t] = stream.spread_after[sl.stop - 1]
        ind = np.zeros((6, t + 1))
        ind[types[sl], np.arange(t)] = 1.0

        if "R" in want or "RS" in want:
            cnt_prefix = np.cumsum(ind[:, :t], axis=1)   # (6, t)
            win_cnt = np.zeros((6, L + 1))
            win_cnt[:, valid] = cnt_prefix[:, np.minimum(t - lvec[valid],
                                                         t - 1)]
        if "R" in want:
            a = ind.copy()
            a[:, :t] *= signs[sl]
            xc = xcorr_sums(a, p[None], L)[:, 0, :]
            ap = np.cumsum(a * p, axis=1)
            term2 = np.zeros((6, L + 1))
            term2[:, valid] = ap[:, t - lvec[valid]]
            raw = xc - term2
            raw[:, ~valid] = 0.0
            raw[:, 0] = 0.0            # identically zero; drop FFT roundoff
            out["R_raw"][d] = raw
            out["R_cnt"][d] = win_cnt
        if "RS" in want:
            xc = xcorr_sums(ind, s[None], L)[:, 0, :]
            bs = np.cumsum(ind * s, axis=1)
            term2 = np.zeros((6, L + 1))
            term2[:, valid] = bs[:, t - lvec[valid]]
            raw = xc - term2
            raw[:, ~valid] = 0.0
            raw[:, 0] = 0.0
            out["RS_raw"][d] = raw
            out["RS_cnt"][d] = win_cnt
        if "D" in want:
            pc = p - p.mean()
            xc = xcorr_sums(pc[None], pc[None], L)[0, 0]
            p2 = np.cumsum(pc * pc)
            total = p2[-1]
            raw = np.zeros(L + 1)
            lv = lvec[valid]
            head = np.empty(len(lv))
            head[0] = 0.0
            head[1:] = p2[lv[1:] - 1]
            tail = p2[t - lv]
            raw[: len(lv)] = (total - head) + tail - 2.0 * xc[: len(lv)]
            raw[0] = 0.0
            out["D_raw"][d] = raw
            out["D_cnt"][d] = np.clip(t + 1 - lvec, 0, None)
    return out


def _ratio(raw, cnt):
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.nan_to_num(raw / cnt)


def estimate_response(
    stream: EventStream,
    max_lag: int = DEFAULT_MAX_LAG,
    same_day_only: bool = True,
    n_bootstrap: int = DEFAULT_BOOTSTRAP,
    seed: int = 0,
) -> ResponseSet:
    """Mean signed mid move l events after each event type.

    ``R[pi, 1]`` equals the mean realized gap of price-changing types and
    is exactly zero for the others, over the identical sample set.
    """
    _check_length(stream, max_lag)
    day = _path_engine(stream, max_lag, same_day_only, ("R",))
    raw, cnt = day["R_raw"].sum(0), day["R_cnt"].sum(0)
    se = _bootstrap_se(day["R_raw"], day["R_cnt"], n_bootstrap, seed)
    return ResponseSet(
        max_lag=max_lag,
        same_day_only=same_day_only,
        probabilities=stream.type_probabilities(),
        response=_ratio(raw, cnt),
        response_se=se,
        response_counts=cnt.astype(np.int64),
        day_raw=day,
    )


def estimate_spread_response(
    stream: EventStream,
    max_lag: int = DEFAULT_MAX_LAG,
    same_day_only: bool = True,
    n_bootstrap: int = DEFAULT_BOOTSTRAP,
    seed: int = 0,
) -> ResponseSet:
    """Mean spread change l events after each event type.

    Callers studying intraday data should trim the session first (the
    conventional cut is 30 minutes after the open, 40 before the close).
    """
    _check_length(stream, max_lag)
    day = _path_engine(stream, max_lag, same_day_only, ("RS",))
    raw, cnt = day["RS_raw"].sum(0), day["RS_cnt"].sum(0)
    se = _bootstrap_se(day["RS_raw"], day["RS_cnt"], n_bootstrap, seed)
    return ResponseSet(
        max_lag=max_lag,
        same_day_only=same_day_only,
        probabilities=stream.type_probabilities(),
        spread_response=_ratio(raw, cnt),
        spread_response_se=se,
        spread_response_counts=cnt.astype(np.int64),
        day_raw=day,
    )


def estimate_diffusion(
    stream: EventStream,
    max_lag: int = DEFAULT_MAX_LAG,
    same_day_only: bool = True,
    n_bootstrap: int = DEFAULT_BOOTSTRAP,
    seed: int = 0,
) -> ResponseSet:
    """Second moment of the mid change over l events (ticks squared)."""
    if len(stream) <= max_lag:
        raise InsufficientData("stream shorter than max_lag")
    day = _path_engine(stream, max_lag, same_day_only, ("D",))
    raw, cnt = day["D_raw"].sum(0), day["D_cnt"].sum(0)
    se = _bootstrap_se(day["D_raw"], day["D_cnt"], n_bootstrap, seed)
    return ResponseSet(
        max_lag=max_lag,
        same_day_only=same_day_only,
        probabilities=stream.type_probabilities(),
        diffusion=_ratio(raw, cnt),
        diffusion_se=se,
        diffusion_counts=cnt.astype(np.int64),
        day_raw=day,
    )


def signed_covariance(corr: CorrelationSet, p1: int, p2: int,
                      lag: int) -> float:
    """Raw signed covariance at any integer lag (negative lags swap types)."""
    if lag >= 0:
        if lag > corr.max_lag:
            return 0.0
        return float(corr.signed_raw()[p1, p2, lag])
    if -lag > corr.max_lag:
        return 0.0
    return float(corr.signed_raw()[p2, p1, -lag])
