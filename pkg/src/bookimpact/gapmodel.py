"""History-dependent gap models: realized gaps, kernels, closure.

The mid is an exact sum of signed gaps, so modeling price dynamics splits
into (i) how events induce further events -- the correlation functions --
and (ii) how the order flow moves the gap sizes themselves.  This module
owns (ii):

* the constant-impact model, which freezes every gap at its per-type mean
  realized value and predicts responses and diffusion from correlations
  alone;
* the linear gap-flow regressions: the signed realized gap of each
  price-changing type regressed on the past signed event flow (kernel K),
  the same regression with the mean gap as regressand (kernel Ktilde),
  and their difference kappa = K - Ktilde, which isolates how the flow
  bends future gap sizes away from their mean;
* the impact decomposition: the total average price change attributed to
  an event (own jump plus induced flow plus induced gap changes) versus
  the bare propagator where the event flow is held fixed;
* a factorized diffusion closure evaluating the model variance from
  two-point functions only.

Kernel storage convention
-------------------------
``K``, ``Ktilde`` and ``kappa`` are stored exactly as the regressions
deliver them.  The generative gap recursion divides the kernel by the
probability of the realized target type; the regression reabsorbs that
factor, so calibrating a stream generated from stored-convention kernels
returns those same kernels, and the impact decomposition sums stored
kernels directly.  Formulas needing the generative kernel divide by the
target probability explicitly (``GapKernelSet.model_kernel``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, toeplitz

from ._xcorr import next_fast_len, xcorr_sums
from .errors import (
    DimensionMismatch,
    InsufficientData,
    SingularSystem,
    WindowTooShort,
)
from .events import EventStream, PRICE_CHANGING
from .stats import CorrelationSet

__all__ = [
    "RealizedGaps",
    "GapKernelSet",
    "ImpactDecomposition",
    "JumpForecast",
    "realized_gaps",
    "predict_response_constant",
    "predict_diffusion_constant",
    "calibrate_kernels",
    "predict_next_jump",
    "decompose_impact",
    "predict_diffusion_closure",
    "kappa_plus",
    "kappa_plus_plus",
    "PC_CODES",
]

PC_CODES = np.array([e.value for e in PRICE_CHANGING])
PC_NAMES = tuple(e.name for e in PRICE_CHANGING)
DEFAULT_KERNEL_LAG = 100
DEFAULT_RIDGE_FACTOR = 1e-4
DEFAULT_D0 = 0.04


@dataclass(frozen=True)
class RealizedGaps:
    """Mean realized gaps of the three price-changing types (ticks).

    ``unconditional_gap`` pools the gaps revealed by queue-emptying events
    on both sides (market orders and cancellations); with best-quote data
    only, the gap behind the book is observable exactly at those moments,
    so this is the observable stand-in for the unconditional average gap.
    The conditional (realized) means typically exceed it on sparse books,
    where a wide gap behind the quote invites the orders that consume the
    queue -- reported, never asserted.
    """

    delta_r: np.ndarray            # (3,) over MOP, CAP, LOP
    counts: np.ndarray             # (3,) int64
    unconditional_gap: float
    spread_bin_edges: np.ndarray | None = None
    spread_bin_gaps: np.ndarray | None = None     # (3, nbins)
    spread_bin_counts: np.ndarray | None = None   # (3, nbins) int64

    def as_vector(self) -> np.ndarray:
        """Six-vector indexed by event-type code (zero for gap-free types)."""
        v = np.zeros(6)
        v[PC_CODES] = self.delta_r
        return v


@dataclass(frozen=True)
class GapKernelSet:
    """Calibrated gap-flow kernels with regression diagnostics."""

    max_lag: int
    kernel: np.ndarray             # K, (6, 3, max_lag), lags 1..max_lag
    kernel_mean: np.ndarray        # Ktilde, same shape
    kappa: np.ndarray              # K - Ktilde, exact by construction
    kappa_se: np.ndarray           # per-entry standard error
    probabilities: np.ndarray      # (6,) event-type probabilities used
    delta_r: np.ndarray            # (3,) realized gaps used for Ktilde
    residual_variance: np.ndarray  # (3,) mean squared regression residual
    gap_residual_std: np.ndarray   # (3,) residual gap scatter per pc type
    lam: float
    pair_count: float              # average sample count behind the moments

    def model_kernel(self) -> np.ndarray:
        """Generative-convention kernel: stored kappa over target probability."""
        p = self.probabilities[PC_CODES]
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.kappa / p[None, :, None]
        return np.nan_to_num(out)


@dataclass(frozen=True)
class ImpactDecomposition:
    """Total vs bare average impact of each event type.

    ``total[pi, l]`` is the mean price change up to lag l attributed to a
    type-pi event including all induced future activity; ``bare`` holds
    the event flow fixed and keeps only the own jump plus the induced gap
    deformation ``delta_star``.  ``bare[pi, 1]`` equals the mean realized
    gap exactly (the deformation sum is empty after one step).
    """

    ell_max: int
    total: np.ndarray              # (6, ell_max + 1); lag 0 entry is zero
    delta_star: np.ndarray         # same shape
    bare: np.ndarray               # delta_r + delta_star
    kappa_plus: np.ndarray | None = field(default=None, repr=False)
    kappa_plus_span: int | None = None


@dataclass(frozen=True)
class JumpForecast:
    """Expected signed price contribution of the next event, per type."""

    by_type: dict
    total: float


def realized_gaps(stream: EventStream, spread_bins: np.ndarray | None = None
                  ) -> RealizedGaps:
    """Per-type mean gaps, optionally profiled against the prior spread."""
    types = stream.event_types
    gaps = stream.gaps
    delta = np.zeros(3)
    counts = np.zeros(3, dtype=np.int64)
    for k, code in enumerate(PC_CODES):
        sel = types == code
        counts[k] = int(sel.sum())
        if counts[k] == 0:
            raise InsufficientData(
                f"no {PC_NAMES[k]} events; realized gap undefined")
        delta[k] = gaps[sel].mean()
    reveal = np.isin(types, PC_CODES[:2])       # MOP and CAP reveal the book
    uncond = float(gaps[reveal].mean()) if reveal.any() else float("nan")
    if spread_bins is None:
        edges = bin_gaps = bin_counts = None
    else:
        edges = np.asarray(spread_bins, dtype=float)
        nb = len(edges) - 1
        bin_gaps = np.full((3, nb), np.nan)
        bin_counts = np.zeros((3, nb), dtype=np.int64)
        which = np.digitize(stream.spread_before, edges) - 1
        for k, code in enumerate(PC_CODES):
            sel = types == code
            for b in range(nb):
                m = sel & (which == b)
                bin_counts[k, b] = int(m.sum())
                if bin_counts[k, b]:
                    bin_gaps[k, b] = gaps[m].mean()
    return RealizedGaps(
        delta_r=delta,
        counts=counts,
        unconditional_gap=uncond,
        spread_bin_edges=edges,
        spread_bin_gaps=bin_gaps,
        spread_bin_counts=bin_counts,
    )


def predict_response_constant(gaps: RealizedGaps, corr: CorrelationSet,
                              ell_max: int) -> np.ndarray:
    """Response functions under frozen per-type gaps.

    The lag-l response of type pi is the cumulative signed correlation of
    pi with all later events, each weighted by the mean price jump the
    later event carries.  Exact (up to sampling) for constant-gap streams;
    on fluctuating-gap streams the history dependence shows up as a
    systematic deviation from the measured response.
    """
    if ell_max > corr.max_lag:
        raise DimensionMismatch("ell_max exceeds correlation lag range")
    dv = gaps.as_vector()
    w = np.einsum("j,j,ijl->il", dv, corr.probabilities,
                  corr.signed[:, :, :ell_max])
    out = np.zeros((6, ell_max + 1))
    out[:, 1:] = np.cumsum(w, axis=1)
    return out


def predict_diffusion_constant(gaps: RealizedGaps, corr: CorrelationSet,
                               ell_max: int) -> np.ndarray:
    """Mid variance under frozen gaps: double sum of weighted correlations."""
    if ell_max > corr.max_lag:
        raise DimensionMismatch("ell_max exceeds correlation lag range")
    if ell_max == 0:
        return np.zeros(1)
    dv = gaps.as_vector()
    craw = corr.signed_raw()
    rho = np.einsum("i,j,ijd->d", dv, dv, craw[:, :, :ell_max])
    return _even_window_sum(rho, ell_max)


def _even_window_sum(h: np.ndarray, ell_max: int) -> np.ndarray:
    """out[l] = sum over |t| < l of (l - |t|) h(|t|), h given at t >= 0."""
    n = len(h)
    ts = np.arange(n)
    h2 = h.copy() * 2.0
    h2[0] = h[0]
    c0 = np.concatenate([[0.0], np.cumsum(h2)])
    c1 = np.concatenate([[0.0], np.cumsum(ts * h2)])
    out = np.zeros(ell_max + 1)
    for ell in range(1, ell_max + 1):
        m = min(ell, n)
        out[ell] = ell * c0[m] - c1[m]
    return out


def _moment_matrix(corr: CorrelationSet, lk: int) -> np.ndarray:
    """Covariance matrix of the lagged signed-flow regressors.

    Entry ((p1, l), (p2, n)) is the signed covariance at lag l - n, with
    the index swap for negative lags; taken from the correlation set
    rather than re-estimated so the kernel system is internally consistent
    with the published correlations.
    """
    craw = corr.signed_raw()
    m = np.empty((6 * lk, 6 * lk))
    for i in range(6):
        for j in range(6):
            block = toeplitz(craw[i, j, :lk], craw[j, i, :lk])
            m[i * lk:(i + 1) * lk, j * lk:(j + 1) * lk] = block
    return m


def calibrate_kernels(
    stream: EventStream,
    corr: CorrelationSet,
    kernel_lag: int = DEFAULT_KERNEL_LAG,
    lam: float | None = None,
) -> GapKernelSet:
    """Fit the gap-flow kernels K and Ktilde; kappa is their difference.

    Solves, for each price-changing target, the normal equations matching
    the lagged cross-moments of the signed realized gap against the signed
    event flow.  Both regressions share the same regressor covariance
    matrix and the mean-gap part of the regressand cancels sample-exactly
    in the difference, which is what makes small planted kernels
    recoverable: the dominant jump-size variance never enters kappa.

    The stream should be session-trimmed by the caller when intraday
    effects matter; the correlation set must come from the same stream.
    """
    lk = int(kernel_lag)
    if lk < 1 or lk > corr.max_lag:
        raise DimensionMismatch("kernel_lag must lie in [1, corr.max_lag]")
    if len(stream) < 10 * lk:
        raise InsufficientData("stream too short for the kernel lag range")
    rg = realized_gaps(stream)

    types = stream.event_types
    signs = stream.signs.astype(np.float64)
    y_full = np.zeros((3, len(stream)))
    y_mean = np.zeros((3, len(stream)))
    for k, code in enumerate(PC_CODES):
        sel = types == code
        y_full[k, sel] = stream.gaps[sel] * signs[sel]
        y_mean[k, sel] = rg.delta_r[k] * signs[sel]

    d_raw = np.zeros((6, 3, lk + 1))
    dm_raw = np.zeros((6, 3, lk + 1))
    totals = np.zeros(lk + 1)
    segs = (stream.day_slices() if corr.same_day_only
            else [slice(0, len(stream))])
    for sl in segs:
        t = sl.stop - sl.start
        if t == 0:
            continue
        ind = np.zeros((6, t))
        ind[types[sl], np.arange(t)] = 1.0
        xi = ind * signs[sl]
        d_raw += xcorr_sums(xi, y_full[:, sl], lk)
        dm_raw += xcorr_sums(xi, y_mean[:, sl], lk)
        totals += np.clip(t - np.arange(lk + 1), 0, None)

    with np.errstate(invalid="ignore", divide="ignore"):
        d_mom = np.nan_to_num(d_raw / totals[None, None, :])
        dm_mom = np.nan_to_num(dm_raw / totals[None, None, :])

    m = _moment_matrix(corr, lk)
    if lam is None:
        lam = DEFAULT_RIDGE_FACTOR * float(np.einsum("ij,ij->", m, m)) / (6 * lk)
    mr = m.copy()
    idx = np.arange(6 * lk)
    mr[idx, idx] += lam
    rhs_k = d_mom[:, :, 1:].transpose(0, 2, 1).reshape(6 * lk, 3)
    rhs_km = dm_mom[:, :, 1:].transpose(0, 2, 1).reshape(6 * lk, 3)
    try:
        cf = cho_factor(mr, overwrite_a=True)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(
            f"kernel system not positive definite ({exc}); raise lambda"
        ) from exc
    sol_k = cho_solve(cf, rhs_k)
    sol_km = cho_solve(cf, rhs_km)
    kernel = sol_k.reshape(6, lk, 3).transpose(0, 2, 1)
    kernel_mean = sol_km.reshape(6, lk, 3).transpose(0, 2, 1)
    kappa = kernel - kernel_mean

    # residual diagnostics on the difference regressand
    probs = corr.probabilities
    conv = _flow_convolution(types, signs, kappa)     # (n, 3) stored space
    resid_var = np.zeros(3)
    gap_resid_std = np.zeros(3)
    for k, code in enumerate(PC_CODES):
        sel = types == code
        scale = 1.0 / probs[code] if probs[code] > 0 else 0.0
        dev = (stream.gaps[sel] - rg.delta_r[k]
               - signs[sel] * conv[sel, k] * scale)
        gap_resid_std[k] = float(dev.std()) if sel.any() else 0.0
        ybar = y_full[k] - y_mean[k]
        resid_var[k] = float(np.mean((ybar - conv[:, k]) ** 2))

    # s.e.: cov(kappa) ~ resid_var * Minv / mean pair count
    minv_diag = np.diag(cho_solve(cf, np.eye(6 * lk)))
    nbar = float(totals[1:].mean()) if lk >= 1 else float(totals[0])
    se = np.sqrt(np.clip(minv_diag[:, None] * resid_var[None, :] / nbar,
                         0.0, None))
    kappa_se = se.reshape(6, lk, 3).transpose(0, 2, 1)

    return GapKernelSet(
        max_lag=lk,
        kernel=kernel,
        kernel_mean=kernel_mean,
        kappa=kappa,
        kappa_se=kappa_se,
        probabilities=probs.copy(),
        delta_r=rg.delta_r.copy(),
        residual_variance=resid_var,
        gap_residual_std=gap_resid_std,
        lam=float(lam),
        pair_count=nbar,
    )


def _flow_convolution(types, signs, kernel):
    """conv[t, j] = sum over past flow of kernel[source, j, lag] (FFT)."""
    n = len(types)
    lk = kernel.shape[2]
    xi = np.zeros((6, n))
    xi[types, np.arange(n)] = signs
    nfft = next_fast_len(n + lk + 1)
    fx = np.fft.rfft(xi, nfft)
    pad = np.zeros((6, 3, lk + 1))
    pad[:, :, 1:] = kernel
    fk = np.fft.rfft(pad, nfft)
    spectrum = np.einsum("sf,stf->tf", fx, fk)
    return np.fft.irfft(spectrum, nfft)[:, :n].T


def predict_next_jump(types_hist, signs_hist, kernels: GapKernelSet
                      ) -> JumpForecast:
    """Forecast each type's expected signed price contribution next step.

    The per-type value is the regression forecast of sign times gap times
    the type indicator, i.e. already weighted by the probability of that
    outcome; the three values therefore sum to the expected signed mid
    change of the next event.
    """
    types_hist = np.asarray(types_hist)
    signs_hist = np.asarray(signs_hist, dtype=np.float64)
    lk = kernels.max_lag
    if len(types_hist) < lk:
        raise WindowTooShort(f"need at least {lk} past events")
    out = np.zeros(3)
    for tau in range(1, lk + 1):
        src = int(types_hist[-tau])
        out += kernels.kernel[src, :, tau - 1] * signs_hist[-tau]
    by_type = {PC_NAMES[k]: float(out[k]) for k in range(3)}
    return JumpForecast(by_type=by_type, total=float(out.sum()))


def decompose_impact(gaps: RealizedGaps, kernels: GapKernelSet,
                     ell_max: int, corr: CorrelationSet | None = None,
                     keep_kappa_plus: bool = False) -> ImpactDecomposition:
    """Split average impact into total and bare (flow-frozen) parts."""
    dv = gaps.as_vector()
    lk = kernels.max_lag
    ck = np.concatenate([np.zeros((6, 1)),
                         np.cumsum(kernels.kernel.sum(axis=1), axis=1)], axis=1)
    cc = np.concatenate([np.zeros((6, 1)),
                         np.cumsum(kernels.kappa.sum(axis=1), axis=1)], axis=1)
    total = np.zeros((6, ell_max + 1))
    dstar = np.zeros((6, ell_max + 1))
    for ell in range(1, ell_max + 1):
        m = min(ell - 1, lk)
        total[:, ell] = dv + ck[:, m]
        dstar[:, ell] = cc[:, m]
    bare = np.zeros_like(total)
    bare[:, 1:] = dv[:, None] + dstar[:, 1:]
    kp = None
    span = None
    if keep_kappa_plus:
        if corr is None:
            raise DimensionMismatch("kappa_plus needs the correlation set")
        span = max(ell_max - 1, 0)
        kp = kappa_plus(kernels, corr, span)
    return ImpactDecomposition(
        ell_max=ell_max,
        total=total,
        delta_star=dstar,
        bare=bare,
        kappa_plus=kp,
        kappa_plus_span=span,
    )


def _extended_cov(corr: CorrelationSet, span: int) -> np.ndarray:
    """Signed raw covariance on lags -span..span (swap convention, 0 beyond)."""
    craw = corr.signed_raw()
    L = corr.max_lag
    out = np.zeros((6, 6, 2 * span + 1))
    m = min(span, L)
    out[:, :, span:span + m + 1] = craw[:, :, :m + 1]
    out[:, :, span - m:span] = np.swapaxes(craw, 0, 1)[:, :, 1:m + 1][:, :, ::-1]
    return out


def _pc_pair_weight(corr: CorrelationSet, t: int) -> np.ndarray:
    """(3, 3) excess-probability weight of two price-changing targets."""
    if t <= corr.max_lag:
        return corr.unsigned[np.ix_(PC_CODES, PC_CODES)][:, :, t] + 1.0
    return np.ones((3, 3))


def kappa_plus(kernels: GapKernelSet, corr: CorrelationSet,
               t_max: int) -> np.ndarray:
    """Gap-kernel/event cross tensor on relative times t in [-t_max, t_max].

    Shape (6, 6, lag, 2 t_max + 1) over (flow source, jump type, kernel
    lag, t + t_max).  Three branches: at t = 0 the jump event is the
    kernel's own target; at t = -lag the jump event is the kernel's source
    (an extra excess-probability term); generically the target is summed
    against its stationary probability.
    """
    km = kernels.model_kernel()
    lk = kernels.max_lag
    ksum = kernels.kappa.sum(axis=1)                 # (6, lag)
    out = np.zeros((6, 6, lk, 2 * t_max + 1))
    out += ksum[:, None, :, None]
    out[:, :, :, t_max] = 0.0
    # mixed advanced/basic indexing puts the indexed axis first
    out[:, PC_CODES, :, t_max] = km.transpose(1, 0, 2)
    for tau in range(1, min(lk, t_max) + 1):
        if tau > corr.max_lag:
            break
        pi_tau = corr.unsigned[:, PC_CODES, tau]     # (6, 3)
        extra = (kernels.kappa[:, :, tau - 1] * pi_tau).sum(axis=1)
        out[:, :, tau - 1, t_max - tau] += extra[:, None]
    return out


def kappa_plus_plus(kernels: GapKernelSet, corr: CorrelationSet,
                    tau: int, tau_p: int, t: int) -> np.ndarray:
    """Pointwise (6, 6) slice of the kernel-pair tensor over flow sources.

    Negative relative times use the swap symmetry (exchange the two kernel
    factors and negate t).  Kept pointwise: the dense tensor is quadratic
    in the kernel lag range and linear in the time span, far too large to
    materialize.
    """
    if not (1 <= tau <= kernels.max_lag and 1 <= tau_p <= kernels.max_lag):
        raise DimensionMismatch("kernel lags out of range")
    if t < 0:
        return kappa_plus_plus(kernels, corr, tau_p, tau, -t).T
    if t == tau_p:
        km = kernels.model_kernel()
        ksum2 = kernels.kappa.sum(axis=1)[:, tau_p - 1]
        out = np.zeros((6, 6))
        for j4, code in enumerate(PC_CODES):
            out[:, code] = km[:, j4, tau - 1] * ksum2[code]
        return out
    ks1 = kernels.kappa[:, :, tau - 1]          # km * P(target), (6, 3)
    ks2 = kernels.kappa[:, :, tau_p - 1]
    w = _pc_pair_weight(corr, t)
    return np.einsum("aj,jk,bk->ab", ks1, w, ks2)


def predict_diffusion_closure(
    gaps: RealizedGaps,
    kernels: GapKernelSet,
    corr: CorrelationSet,
    ell_max: int,
    d0: float = DEFAULT_D0,
) -> np.ndarray:
    """Model mid variance including the gap-fluctuation kernels.

    Three stationary-increment pieces: the frozen-gap double sum, a cross
    term between mean jumps and kernel-driven gap shifts, and the
    kernel-kernel term with the higher-order correlations factorized into
    pair functions.  With zero kernels the last two vanish identically and
    the constant-gap curve is returned.  ``d0`` adds a lag-independent
    offset modeling measurement/high-frequency noise (ticks squared).
    """
    if ell_max > corr.max_lag:
        raise DimensionMismatch("ell_max exceeds correlation lag range")
    base = predict_diffusion_constant(gaps, corr, ell_max)
    if ell_max == 0:
        return base
    lk = kernels.max_lag
    span = ell_max - 1
    ce = _extended_cov(corr, span + lk + 1)
    off = span + lk + 1                          # index of lag 0 in ce
    dv = gaps.as_vector()
    p = kernels.probabilities
    ks = kernels.kappa                           # (6, 3, lk) stored
    ksum = ks.sum(axis=1)                        # (6, lk)
    km = kernels.model_kernel()

    # ---- cross term F(t), t in (-ell_max, ell_max)
    # generic: sum_{p2, tau} ksum[p2](tau) sum_{p3} dv[p3] ce[p2,p3](t+tau)
    wvec = np.einsum("j,ijs->is", dv, ce)        # (6, full lag axis)
    f = np.empty(2 * span + 1)
    for it, t in enumerate(range(-span, span + 1)):
        f[it] = float((ksum * wvec[:, off + t + 1: off + t + lk + 1]).sum())
    # t = 0: the jump event is the kernel target itself (replaces generic)
    ce_pc = ce[:, PC_CODES, off + 1: off + lk + 1]          # (6, 3, lk)
    f[span] = float(np.einsum("ijt,j,ijt->", km, dv[PC_CODES], ce_pc))
    # t = -tau: the flow source is the jump event (adds an excess term)
    for tau in range(1, min(lk, span) + 1):
        if tau > corr.max_lag:
            break
        pi_tau = corr.unsigned[:, PC_CODES, tau]            # (6, 3)
        extra = (ks[:, :, tau - 1] * pi_tau).sum(axis=1)    # over sources
        f[span - tau] += float((extra * dv * p).sum())
    d_cross = 2.0 * _signed_window_sum(f, span, ell_max)

    # ---- kernel-kernel term H(t); even in t, computed for t >= 0
    ks18 = ks.reshape(18, lk)
    xc = xcorr_sums(ks18, ks18, lk - 1)
    # rho[a, b, d] = sum_tp ks18[a, tp + d] ks18[b, tp], d = -(lk-1)..lk-1
    rho = np.empty((18, 18, 2 * lk - 1))
    rho[:, :, lk - 1:] = np.swapaxes(xc, 0, 1)
    rho[:, :, : lk - 1] = xc[:, :, 1:][:, :, ::-1]
    rho = rho.reshape(6, 3, 6, 3, 2 * lk - 1)
    # T1[p2, j1, p4] = sum_tau ks[p2, j1, tau] ce[p2, p4](tau)
    t1 = np.einsum("ajt,abt->ajb", ks, ce[:, :, off + 1: off + lk + 1])
    # T2[j4] = sum_{p2, tau} km[p2, j4, tau] ce[p2, pc_j4](tau)
    t2 = np.einsum("ajt,ajt->j", km,
                   ce[:, PC_CODES, off + 1: off + lk + 1])
    h = np.empty(span + 1)
    dgrid = np.arange(-(lk - 1), lk)
    for t in range(span + 1):
        w = _pc_pair_weight(corr, t)
        ce_win = ce[:, :, off + t + dgrid[0]: off + t + dgrid[-1] + 1]
        gen = np.einsum("ajbkd,abd,jk->", rho, ce_win, w)
        val = gen
        if 1 <= t <= lk:
            slice_gen = np.einsum("ajb,bk,jk->", t1, ks[:, :, t - 1], w)
            special = float((t2 * ksum[PC_CODES, t - 1]).sum())
            val = gen - slice_gen + special
        h[t] = val
    d_kk = _even_window_sum(h, ell_max)

    out = base + d_cross + d_kk
    if d0:
        out = out + np.where(np.arange(ell_max + 1) > 0, d0, 0.0)
    return out


def _signed_window_sum(f, span, ell_max):
    """out[l] = sum over -l < t < l of (l - |t|) f(t + span)."""
    ts = np.arange(-span, span + 1)
    out = np.zeros(ell_max + 1)
    for ell in range(1, ell_max + 1):
        m = np.abs(ts) < ell
        out[ell] = float(((ell - np.abs(ts[m])) * f[m]).sum())
    return out
