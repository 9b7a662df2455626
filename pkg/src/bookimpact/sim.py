"""Synthetic event-stream generation.

Configurable processes for event types, signs and gaps, including an exact
simulator of the history-dependent gap model: each price-changing event's
gap is its mean realized gap plus a kernel convolution of the past signed
event flow plus bounded noise, and the emitted mid path is exactly the
cumulative sum of sign times gap.  Streams from here are the ground truth
for every calibration round-trip in the test suite.

Kernel conventions
------------------
Planted kernels use the same storage convention as the calibrator: the
kernel ``kappa[source, target, lag]`` is what ``calibrate_kernels``
recovers.  Internally the gap recursion divides by the probability of the
realized target type, which is exactly the factor the regression-based
calibration absorbs; see :mod:`bookimpact.gapmodel`.

Sign processes
--------------
``longmem`` draws the *side* series from a fractionally differenced
Gaussian passed through a sign threshold, targeting a power-law side
autocorrelation with the requested exponent; the event sign is then the
side flipped for limit orders.  The achieved exponent is a measured
property, not an input guarantee, so tests fit it rather than assume it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from ._xcorr import next_fast_len
from .errors import ConfigInvalid
from .events import EventStream, PRICE_CHANGING, assemble_stream

__all__ = [
    "GeneratorConfig",
    "generate",
    "replay_with_model",
    "longmem_signs",
    "power_law_kernel",
    "propagator_price",
    "flip_signs",
    "large_tick_config",
    "small_tick_config",
    "planted_kernel_config",
    "spread_model_config",
]

NS_PER_DAY = 86_400_000_000_000
SESSION_OPEN_NS = int(9.5 * 3600) * 1_000_000_000
SESSION_NS = int(6.5 * 3600) * 1_000_000_000
BASE_DAY = 13_940              # 2008-03-03 in days since epoch

PC_CODES = np.array([e.value for e in PRICE_CHANGING])
_SIDE_COEF = np.array([1, 1, 1, -1, 1, -1], dtype=np.int8)

#: smallest gap a price-changing event may carry after noise flooring
MIN_GAP = 1e-3


@dataclass(frozen=True)
class GeneratorConfig:
    """Full specification of one synthetic stream.

    ``delta_r`` is indexed by event-type code and must be zero for the
    non-price-changing types.  ``kappa`` has shape (6, 3, lag) over
    (source type, price-changing target, lag >= 1).
    """

    n_events: int
    seed: int = 0
    n_days: int = 1
    symbol: str = "SYN"
    tick_size: float = 0.01
    mid_open: float = 2000.0          # ticks
    spread_open: float = 1.0          # ticks
    type_process: str = "iid"         # iid | markov | replay
    type_probabilities: np.ndarray = field(
        default_factory=lambda: np.full(6, 1.0 / 6.0))
    type_transition: np.ndarray | None = None
    replay_types: np.ndarray | None = None
    sign_process: str = "iid"         # iid | longmem | per_type
    side_gamma: float = 0.7           # longmem: target side-autocorr exponent
    sign_persistence: np.ndarray | None = None   # per_type: P(keep prev sign)
    gap_process: str = "constant"     # constant | kernels | spread_reverting
    delta_r: np.ndarray = field(
        default_factory=lambda: np.array([0, 0.5, 0, 0, 0.5, 0.5]))
    kappa: np.ndarray | None = None
    gap_noise: float = 0.0            # half-width of uniform gap noise
    alpha: float = 0.0                # spread mean reversion strength
    mean_spread_by_type: np.ndarray | None = None  # target <S>_pi, ticks

    def validate(self) -> None:
        if self.n_events <= 0:
            raise ConfigInvalid("n_events must be positive")
        if self.n_days < 1 or self.n_days > self.n_events:
            raise ConfigInvalid("n_days out of range")
        if self.type_process not in ("iid", "markov", "replay"):
            raise ConfigInvalid(f"unknown type_process {self.type_process!r}")
        if self.sign_process not in ("iid", "longmem", "per_type"):
            raise ConfigInvalid(f"unknown sign_process {self.sign_process!r}")
        if self.gap_process not in ("constant", "kernels", "spread_reverting"):
            raise ConfigInvalid(f"unknown gap_process {self.gap_process!r}")
        p = np.asarray(self.type_probabilities, dtype=float)
        if self.type_process == "iid":
            if p.shape != (6,) or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
                raise ConfigInvalid("type_probabilities must be a 6-simplex")
        if self.type_process == "markov":
            m = self.type_transition
            if m is None or np.asarray(m).shape != (6, 6):
                raise ConfigInvalid("markov type process needs a 6x6 matrix")
            m = np.asarray(m, dtype=float)
            if np.any(m < 0) or np.any(np.abs(m.sum(axis=1) - 1.0) > 1e-9):
                raise ConfigInvalid("transition rows must be distributions")
        if self.type_process == "replay" and self.replay_types is None:
            raise ConfigInvalid("replay type process needs replay_types")
        if self.sign_process == "longmem" and not 0.0 < self.side_gamma < 1.0:
            raise ConfigInvalid("side_gamma must lie in (0, 1)")
        d = np.asarray(self.delta_r, dtype=float)
        if d.shape != (6,) or np.any(d < 0):
            raise ConfigInvalid("delta_r must be six non-negative ticks")
        if np.any(d[[0, 2, 3]] != 0.0):
            raise ConfigInvalid("delta_r must be zero for MO0/CA0/LO0")
        if self.gap_process in ("constant", "kernels"):
            present = _present_types(self)
            if np.any(d[np.intersect1d(present, PC_CODES)] <= 0):
                raise ConfigInvalid(
                    "price-changing types need positive delta_r")
        if self.gap_process == "kernels":
            k = self.kappa
            if k is None or np.asarray(k).ndim != 3 or np.asarray(k).shape[:2] != (6, 3):
                raise ConfigInvalid("kernels gap process needs kappa (6,3,L)")
        if self.gap_noise < 0:
            raise ConfigInvalid("gap_noise must be >= 0")
        if not 0.0 <= self.alpha < 1.0:
            raise ConfigInvalid("alpha must lie in [0, 1)")


def _present_types(config: GeneratorConfig) -> np.ndarray:
    if config.type_process == "iid":
        return np.flatnonzero(np.asarray(config.type_probabilities) > 0)
    if config.type_process == "replay":
        return np.unique(np.asarray(config.replay_types))
    return np.arange(6)


def _draw_types(config: GeneratorConfig, rng) -> np.ndarray:
    n = config.n_events
    if config.type_process == "iid":
        cdf = np.cumsum(np.asarray(config.type_probabilities, dtype=float))
        u = rng.random(n)
        return np.searchsorted(cdf, u, side="right").clip(0, 5).astype(np.int8)
    if config.type_process == "replay":
        types = np.asarray(config.replay_types, dtype=np.int8)
        if len(types) < n:
            raise ConfigInvalid("replay_types shorter than n_events")
        return types[:n].copy()
    # markov: sequential by nature
    cdf = np.cumsum(np.asarray(config.type_transition, dtype=float), axis=1)
    u = rng.random(n)
    out = np.empty(n, dtype=np.int8)
    state = int(rng.integers(0, 6))
    rows = [cdf[i] for i in range(6)]
    for t in range(n):
        row = rows[state]
        state = int(np.searchsorted(row, u[t], side="right"))
        if state > 5:
            state = 5
        out[t] = state
    return out


def _draw_signs(config: GeneratorConfig, types: np.ndarray, rng) -> np.ndarray:
    n = config.n_events
    if config.sign_process == "iid":
        return (rng.integers(0, 2, n) * 2 - 1).astype(np.int8)
    if config.sign_process == "longmem":
        side = longmem_signs(n, config.side_gamma, rng)
        return (side * _SIDE_COEF[types]).astype(np.int8)
    stay = config.sign_persistence
    if stay is None:
        stay = np.full(6, 0.75)
    stay = np.asarray(stay, dtype=float)
    flip = rng.random(n) >= stay[types]
    steps = np.where(flip, -1, 1)
    steps[0] = 1 if rng.random() < 0.5 else -1
    return np.cumprod(steps).astype(np.int8)


def longmem_signs(n: int, gamma: float, rng) -> np.ndarray:
    """A +/-1 series whose autocorrelation decays like lag**(-gamma).

    Fractionally differenced Gaussian noise (d = (1 - gamma) / 2) pushed
    through a sign threshold.  The arcsine law maps the Gaussian
    autocorrelation onto the sign autocorrelation without changing the
    tail exponent.
    """
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    d = (1.0 - gamma) / 2.0
    n_weights = min(max(4 * n, 1024), 1 << 16)
    k = np.arange(1, n_weights)
    psi = np.concatenate([[1.0], np.cumprod((k - 1 + d) / k)])
    burn = n_weights
    z = rng.standard_normal(n + burn)
    x = fftconvolve(z, psi)[burn:burn + n]
    s = np.sign(x)
    s[s == 0] = 1
    return s.astype(np.int8)


def power_law_kernel(max_lag: int, beta: float, scale: float = 1.0) -> np.ndarray:
    """Kernel g with g[l] = scale * (l+1)**-beta for lags 1..max_lag."""
    return scale * np.arange(1, max_lag + 1, dtype=float) ** (-beta)


def propagator_price(flow: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Price path from a transient-impact superposition of past flow.

    ``kernel[i]`` is the impact remaining ``i + 1`` steps after an event.
    Returns a path of length ``len(flow) + 1`` starting at zero.
    """
    n = len(flow)
    p = np.empty(n + 1)
    p[0] = 0.0
    p[1:] = fftconvolve(np.asarray(flow, dtype=float), kernel)[:n]
    return p


def _kernel_convolution(types, signs, kappa):
    """conv[t, j] = sum over past flow of kappa[source, j, lag]."""
    n = len(types)
    lk = kappa.shape[2]
    xi = np.zeros((6, n))
    xi[types, np.arange(n)] = signs
    nfft = next_fast_len(n + lk + 1)
    fx = np.fft.rfft(xi, nfft)                      # (6, F)
    pad = np.zeros((6, 3, lk + 1))
    pad[:, :, 1:] = kappa
    fk = np.fft.rfft(pad, nfft)                     # (6, 3, F)
    spectrum = np.einsum("sf,stf->tf", fx, fk)
    conv = np.fft.irfft(spectrum, nfft)[:, :n]
    return conv.T                                   # (n, 3)


def _gaps_from_kernels(types, signs, delta_r, kappa, probs, noise, rng):
    """Exact gap recursion of the history-dependent model.

    gap_t = delta_r[type] + sign_t * conv_t / P(type) + noise, where conv
    is the kernel convolution of the past signed flow: the modulation is
    bilinear in the current and past signs, so mirroring the whole history
    leaves every gap unchanged.  Gaps of price-changing events are floored
    at a small positive value; the caller receives the floor count.
    """
    n = len(types)
    conv = _kernel_convolution(types, signs, kappa)
    pc_slot = np.full(6, -1)
    pc_slot[PC_CODES] = np.arange(3)
    slot = pc_slot[types]
    is_pc = slot >= 0
    own = np.where(is_pc, conv[np.arange(n), np.clip(slot, 0, 2)], 0.0)
    scale = np.where(probs[types] > 0,
                     1.0 / np.clip(probs[types], 1e-12, None), 0.0)
    u = rng.uniform(-noise, noise, n) if noise > 0 else np.zeros(n)
    gaps = delta_r[types] + signs * own * scale + u
    gaps[~is_pc] = 0.0
    floored = is_pc & (gaps < MIN_GAP)
    gaps[floored] = MIN_GAP
    return gaps, int(floored.sum())


def _gaps_spread_reverting(types, delta_r, alpha, mean_spread, s0, rng,
                           noise, pc_prob, day_starts):
    """Sequential mean-reverting gaps in the spread dimension.

    The signed spread step of each price-changing event is its mean step
    plus the reversion pull toward the target spread.  Only those events
    can move the spread, so the configured per-event rate ``alpha`` is
    rescaled by their total probability; the stream then relaxes at rate
    ``alpha`` per event, matching the analytic response formula.  Steps
    are clamped so every gap stays positive and the spread never falls
    below a small floor; clamp events are counted.  The recursion restarts
    from the opening spread at each day boundary, mirroring the assembled
    per-day paths.
    """
    coef = np.array([0.0, 2.0, 0.0, 0.0, 2.0, -2.0])
    dbar_r = coef * delta_r                     # signed mean spread steps
    pull = alpha / max(pc_prob, 1e-12)
    n = len(types)
    gaps = np.zeros(n)
    clamped = 0
    s = float(s0)
    s_floor = 0.5
    min_step = 2.0 * MIN_GAP
    day_set = set(int(d) for d in day_starts)
    u_all = (rng.uniform(-noise, noise, n) if noise > 0 else np.zeros(n))
    for t in range(n):
        if t in day_set:
            s = float(s0)
        ty = types[t]
        c = coef[ty]
        if c == 0.0:
            continue
        dbar = dbar_r[ty] + pull * (mean_spread[ty] - s) + u_all[t] * c
        if c > 0:
            if dbar < min_step:
                dbar = min_step
                clamped += 1
        else:
            if dbar > -min_step:
                dbar = -min_step
                clamped += 1
            if s + dbar < s_floor:
                # stop the close at the floor; if already there, emit the
                # minimal close and never let the spread reach zero
                dbar = s_floor - s
                if dbar > -min_step:
                    dbar = -min_step
                if s + dbar <= 0.0:
                    dbar = -s / 2.0
                clamped += 1
        gap = abs(dbar) / 2.0
        gaps[t] = gap
        s = s + c * gap
    return gaps, clamped


def _timestamps(n: int, n_days: int):
    sizes = np.full(n_days, n // n_days)
    sizes[: n % n_days] += 1
    ts = np.empty(n, dtype=np.int64)
    day_index = np.empty(n, dtype=np.int32)
    pos = 0
    for d, size in enumerate(sizes):
        base = (BASE_DAY + d) * NS_PER_DAY + SESSION_OPEN_NS
        dt = SESSION_NS // max(size, 1)
        ts[pos:pos + size] = base + np.arange(size) * dt
        day_index[pos:pos + size] = d
        pos += size
    return ts, day_index


def generate(config: GeneratorConfig) -> EventStream:
    """Draw one stream; deterministic given the config (seed included)."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    types = _draw_types(config, rng)
    signs = _draw_signs(config, types, rng)
    delta_r = np.asarray(config.delta_r, dtype=float)
    info = {}
    if config.gap_process == "constant":
        gaps = delta_r[types]
        if config.gap_noise > 0:
            pc = np.isin(types, PC_CODES)
            gaps = gaps + np.where(pc, rng.uniform(-config.gap_noise,
                                                   config.gap_noise,
                                                   len(types)), 0.0)
            low = pc & (gaps < MIN_GAP)
            gaps[low] = MIN_GAP
            info["floored"] = int(low.sum())
    elif config.gap_process == "kernels":
        counts = np.bincount(types, minlength=6)
        probs = counts / len(types)
        gaps, floored = _gaps_from_kernels(
            types, signs, delta_r, np.asarray(config.kappa, dtype=float),
            probs, config.gap_noise, rng)
        info["floored"] = floored
    else:
        mean_spread = config.mean_spread_by_type
        if mean_spread is None:
            mean_spread = np.full(6, config.spread_open)
        pc_prob = float(np.isin(types, PC_CODES).mean())
        sizes = np.full(config.n_days, config.n_events // config.n_days)
        sizes[: config.n_events % config.n_days] += 1
        day_starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
        gaps, clamped = _gaps_spread_reverting(
            types, delta_r, config.alpha,
            np.asarray(mean_spread, dtype=float),
            config.spread_open, rng, config.gap_noise, pc_prob, day_starts)
        info["clamped"] = clamped
    ts, day_index = _timestamps(config.n_events, config.n_days)
    stream = assemble_stream(
        symbol=config.symbol,
        tick_size=config.tick_size,
        timestamps=ts,
        day_index=day_index,
        event_types=types,
        signs=signs,
        gaps=gaps,
        mid_open=config.mid_open,
        spread_open=config.spread_open,
        validate=True,
    )
    return stream


def replay_with_model(stream: EventStream, delta_r, kappa, probabilities,
                      seed: int = 0, noise: float = 0.0) -> EventStream:
    """Keep the (type, sign) sequence; regenerate gaps from the model.

    ``delta_r`` is a six-vector of mean realized gaps, ``kappa`` the
    (6, 3, lag) calibrated kernel, ``probabilities`` the event-type
    probabilities the kernels were calibrated against.  The rebuilt mid
    and spread paths follow the exact jump identities.
    """
    if len(stream) == 0:
        return stream
    rng = np.random.default_rng(seed)
    delta_r = np.asarray(delta_r, dtype=float)
    gaps, _ = _gaps_from_kernels(
        stream.event_types, stream.signs, delta_r,
        np.asarray(kappa, dtype=float),
        np.asarray(probabilities, dtype=float), noise, rng)
    return assemble_stream(
        symbol=stream.symbol,
        tick_size=stream.tick_size,
        timestamps=stream.timestamps,
        day_index=stream.day_index,
        event_types=stream.event_types,
        signs=stream.signs,
        gaps=gaps,
        mid_open=stream.mid_before[stream.day_starts],
        spread_open=stream.spread_before[stream.day_starts],
        volumes=stream.volumes,
        session_trim=stream.session_trim,
        validate=True,
    )


def flip_signs(stream: EventStream) -> EventStream:
    """The mirror stream with every sign flipped (gaps unchanged)."""
    return assemble_stream(
        symbol=stream.symbol,
        tick_size=stream.tick_size,
        timestamps=stream.timestamps,
        day_index=stream.day_index,
        event_types=stream.event_types,
        signs=-stream.signs,
        gaps=stream.gaps,
        mid_open=stream.mid_before[stream.day_starts],
        spread_open=stream.spread_before[stream.day_starts],
        volumes=stream.volumes,
        session_trim=stream.session_trim,
        validate=True,
    )


# ---------------------------------------------------------------------------
# Preset configurations used by the self-test oracles and the demos.

LARGE_TICK_PROBS = np.array([0.048, 0.009, 0.398, 0.532, 0.0015, 0.0115])
SMALL_TICK_PROBS = np.array([0.043, 0.076, 0.32, 0.33, 0.071, 0.16])


def large_tick_config(n_events: int, seed: int = 0, n_days: int = 20,
                      **overrides) -> GeneratorConfig:
    """Dense-book regime: all gaps pinned at half a tick, sticky sides."""
    base = dict(
        n_events=n_events,
        seed=seed,
        n_days=n_days,
        type_probabilities=LARGE_TICK_PROBS.copy(),
        sign_process="per_type",
        sign_persistence=np.full(6, 0.75),
        gap_process="constant",
        delta_r=np.array([0.0, 0.5, 0.0, 0.0, 0.5, 0.5]),
        spread_open=1.0,
    )
    base.update(overrides)
    return GeneratorConfig(**base)


def small_tick_config(n_events: int, seed: int = 0, n_days: int = 20,
                      kappa_scale: float = 0.02, gap_noise: float = 0.15,
                      **overrides) -> GeneratorConfig:
    """Sparse-book regime with history-dependent gaps.

    Mean doubled gaps match a typical small-tick name (1.31 / 1.27 / 1.27
    ticks for the three price-changing types); the planted kernels make
    the order flow soften or harden the book depending on the source type.
    """
    kappa = _default_kappa(scale=kappa_scale, probabilities=SMALL_TICK_PROBS)
    base = dict(
        n_events=n_events,
        seed=seed,
        n_days=n_days,
        type_probabilities=SMALL_TICK_PROBS.copy(),
        sign_process="per_type",
        sign_persistence=np.full(6, 0.70),
        gap_process="kernels",
        delta_r=np.array([0.0, 0.655, 0.0, 0.0, 0.635, 0.635]),
        kappa=kappa,
        gap_noise=gap_noise,
        spread_open=3.3,
        mid_open=14000.0,
    )
    base.update(overrides)
    return GeneratorConfig(**base)


def planted_kernel_config(n_events: int, seed: int = 0, n_days: int = 20,
                          kernel_lag: int = 50, **overrides) -> GeneratorConfig:
    """Round-trip oracle preset: big realized gaps, strong planted kernels.

    Types are i.i.d. and independent of signs, which makes the regression
    recovery of the planted kernels exact in expectation.
    """
    kappa = _default_kappa(lag=kernel_lag, scale=0.045)
    base = dict(
        n_events=n_events,
        seed=seed,
        n_days=n_days,
        type_probabilities=np.full(6, 1.0 / 6.0),
        sign_process="per_type",
        sign_persistence=np.full(6, 0.65),
        gap_process="kernels",
        delta_r=np.array([0.0, 2.0, 0.0, 0.0, 2.0, 2.0]),
        kappa=kappa,
        gap_noise=0.2,
        spread_open=6.0,
        mid_open=20000.0,
    )
    base.update(overrides)
    return GeneratorConfig(**base)


def spread_model_config(n_events: int, seed: int = 0, n_days: int = 20,
                        alpha: float = 1e-2, target_spread: float = 15.0,
                        **overrides) -> GeneratorConfig:
    """Mean-reverting spread preset for the spread-dynamics oracles.

    Price-changing events dominate so the reversion acts often; opening
    and closing rates balance exactly, leaving the reversion term as the
    only systematic spread force.
    """
    probs = np.array([0.10, 0.15, 0.075, 0.075, 0.15, 0.45])
    delta = np.array([0.0, 0.75, 0.0, 0.0, 0.75, 0.5])
    # zero unconditional drift: opening rate*step balances closing
    open_rate = probs[1] * 2 * delta[1] + probs[4] * 2 * delta[4]
    delta[5] = open_rate / (2 * probs[5])
    base = dict(
        n_events=n_events,
        seed=seed,
        n_days=n_days,
        type_probabilities=probs,
        sign_process="iid",
        gap_process="spread_reverting",
        delta_r=delta,
        alpha=alpha,
        spread_open=target_spread,
        mean_spread_by_type=np.full(6, target_spread),
        gap_noise=0.05,
    )
    base.update(overrides)
    return GeneratorConfig(**base)


def _default_kappa(lag: int = 50, scale: float = 0.02,
                   probabilities: np.ndarray | None = None) -> np.ndarray:
    """A sign-structured kernel family: market orders and cancellations
    soften the book (gaps grow after same-sign flow), limit orders harden
    it.  The probability-weighted source sum is balanced to zero so the
    kernel modulation has no conditional mean under persistent signs and
    the mean realized gaps stay at their configured values.
    """
    tau = np.arange(1, lag + 1, dtype=float)
    shape = tau ** -1.5
    source_sign = np.array([1.0, 1.2, 0.6, -0.8, 1.0, -1.0])
    p = (np.full(6, 1.0 / 6.0) if probabilities is None
         else np.asarray(probabilities, dtype=float))
    pos = source_sign > 0
    balance = (p[pos] * source_sign[pos]).sum() / max(
        (p[~pos] * -source_sign[~pos]).sum(), 1e-12)
    source_sign = np.where(pos, source_sign, source_sign * balance)
    target_w = np.array([1.0, 0.8, 0.9])
    kappa = (source_sign[:, None, None] * target_w[None, :, None]
             * shape[None, None, :] * scale)
    return kappa
