"""Order-book event flow analytics.

Classify best-quote events into six types, estimate their correlation and
response structure, calibrate nested price-impact models (per-event
propagators, frozen-gap impact, history-dependent gap kernels), predict
diffusion and spread dynamics, and validate everything against built-in
synthetic-stream oracles.
"""

from .errors import (
    AlphaOutOfRange,
    BookImpactError,
    BrokenChain,
    ConfigInvalid,
    DimensionMismatch,
    InsufficientData,
    InvariantViolation,
    NonHalfTickGap,
    SchemaError,
    SingularSystem,
    WindowTooShort,
)
from .events import (
    EventStream,
    EventType,
    MarketEvent,
    PRICE_CHANGING,
    assemble_stream,
    derive_side,
    reconstruct_mid,
    reconstruct_spread,
    trim_session,
)
from .gapmodel import (
    GapKernelSet,
    ImpactDecomposition,
    JumpForecast,
    RealizedGaps,
    calibrate_kernels,
    decompose_impact,
    kappa_plus,
    kappa_plus_plus,
    predict_diffusion_closure,
    predict_diffusion_constant,
    predict_next_jump,
    predict_response_constant,
    realized_gaps,
)
from .ingest import (
    BboRecord,
    IngestConfig,
    IngestReport,
    TradeRecord,
    classify,
    load_bbo_csv,
    load_event_csv,
    load_trades_csv,
    write_event_csv,
)
from .propagator import (
    BaselinePropagator,
    PropagatorSet,
    SignedFlowConfig,
    apply_forward,
    market_order_flow,
    predict_diffusion_temporary,
    series_autocorr,
    series_response,
    solve_multi_event,
    solve_single_event,
)
from .sim import (
    GeneratorConfig,
    generate,
    large_tick_config,
    longmem_signs,
    planted_kernel_config,
    power_law_kernel,
    propagator_price,
    replay_with_model,
    small_tick_config,
    spread_model_config,
)
from .spread import (
    SpreadModel,
    build_spread_model,
    fit_alpha,
    gaps_vs_spread,
    predict_spread_response,
    spread_autocorrelation,
    spread_drift,
)
from .stats import (
    CorrelationSet,
    ResponseSet,
    estimate_correlations,
    estimate_diffusion,
    estimate_response,
    estimate_sign_autocorrs,
    estimate_spread_response,
)

__version__ = "0.1.0"
