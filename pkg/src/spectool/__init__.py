"""Speculative tool execution for agent workloads.

Mines recurring tool-call patterns from execution traces, predicts upcoming
invocations with late-bound arguments, and schedules speculative executions
on slack resources without delaying authoritative work. Ships with a
virtual-clock simulator that makes the scheduling guarantees testable.
"""

from .events import (
    Event,
    EventKind,
    EventSignature,
    IngestResult,
    Session,
    Status,
    canonical_arg_hash,
    ingest_trace,
    signature_of,
    write_trace,
)
from .mappings import (
    ArgBinding,
    FormatTemplate,
    IndexedFallback,
    MatchedContext,
    PathLookup,
    ValueMapping,
    candidate_paths,
    evaluate,
    infer_mapping,
)
from .mining import (
    MatchRelation,
    MiningConfig,
    PatternPool,
    PatternTuple,
    load_pool,
    mine,
    mine_frequent_subsequences,
    mine_pool,
    save_pool,
    validate,
)
from .policy import (
    SpecLevel,
    SpeculationPolicy,
    SpeculativeAction,
    admit,
    parse_policy,
    transform_side_effecting,
)
from .prediction import (
    Completeness,
    PredictedInvocation,
    PredictionWindow,
    Predictor,
    score_accuracy,
)
from .reporting import DeltaReport, RunReport, compare_runs
from .scheduling import (
    EstimateBook,
    Job,
    JobKind,
    JobState,
    ResourceState,
    ResultCache,
    Scheduler,
    greedy_speculative_selection,
)
from .simulation import (
    AgentScript,
    Arrival,
    ArrivalTrace,
    LatencySpec,
    ScriptStep,
    SimulationEngine,
    ToolModel,
)
from .workloads import (
    ScriptSpec,
    Workload,
    build_engine,
    default_motif_tools,
    generate_corpus,
    load_arrivals,
    load_workload,
    materialize_script,
    save_arrivals,
    save_workload,
)

__version__ = "0.1.0"
