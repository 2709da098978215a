"""Online just-in-time autotuning.

The first ``k`` calls of a tuned function each build and time one candidate,
call ``k+1`` rebuilds the fastest and caches it, and every later call runs the
cached winner.
"""

from .errors import (
    Busy,
    CacheMiss,
    DoubleFinalize,
    DuplicateKey,
    EmptyCandidateSpace,
    FactoryFailure,
    InsufficientCalls,
    InvalidCandidate,
    InvalidCandidateSpace,
    MetricMismatch,
    NoMeasurements,
    OutOfOrderCompletion,
    SpaceMismatch,
    TuningError,
)
from .measurement import (
    MetricSample,
    MetricSource,
    TickSource,
    TransformedSource,
    VirtualClock,
    calibrate_overhead,
    measure,
    read_cpu_ticks,
    read_ticks,
    timed_call,
)
from .model import AmortizationInputs, break_even_n, e_auto, net_gain, regime_report
from .tuning import (
    CandidateSpace,
    CompileBestAndExecute,
    ExecuteCandidate,
    ExecuteTuned,
    Exploring,
    Finalizing,
    TunerConfig,
    TunerHandle,
    Tuned,
    TuningKey,
    TuningRegistry,
    TuningState,
    create_tuner,
)
from .variants import (
    ClosureFactory,
    CompiledVariant,
    InstantiationCache,
    IterationReport,
    SimulatedFactory,
    SyntheticFactory,
    TunedFunction,
    VariantFactory,
    autotuned_invoke,
    build_variant,
    cache_get,
    cache_put,
)

__version__ = "0.1.0"
