"""dynaplan: a dynamic robot task-planning runtime.

Natural-language instructions plus scene state become hierarchical behavior
policies over a typed primitive library; a deterministic kinematic simulator
executes them step by step, and the episode loop regenerates the policy in
real time when a new instruction arrives or the task state changes. Planner
backends are pluggable: a rule-based oracle (verifiable ground truth) and a
remote model reached over a chat-completions HTTP wire format.
"""

from .executor import (
    EpisodeEvent,
    EpisodeInbox,
    EpisodeResult,
    ExecutorConfig,
    TaskMemory,
    Trigger,
    classify_failure,
    detect_state_change,
    event_to_line,
    resolve_params,
    run_episode,
    trace_to_lines,
)
from .gateway import GatewayConfig, GatewayServer
from .harness import BatchReport, CorpusError, emit_report, load_corpus, run_batch
from .planner import (
    ImagePayload,
    OraclePlanner,
    PlannerRequest,
    PlannerResponse,
    PlannerUnavailable,
    RemoteEndpointConfig,
    RemotePlanner,
    UnsupportedInstruction,
    assemble_prompt,
    extract_policy,
    infer_goal,
    oracle_plan,
    remote_plan,
)
from .policy import (
    BehaviorStep,
    OnFail,
    Phase,
    Policy,
    Pose,
    Ref,
    SchemaError,
    StepKind,
    ValidationIssue,
    ValidationReport,
    parse_policy,
    policy_digest,
    serialize_policy,
    validate_policy,
)
from .primitives import (
    BUILTIN_EMBODIMENTS,
    EmbodimentProfile,
    MOBILE_SINGLE_ARM,
    PrimitiveCatalog,
    PrimitiveSpec,
    QUADRUPED_MANIPULATOR,
    UnknownEmbodiment,
    builtin_catalog,
    check_preconditions,
    embodiment_by_name,
    render_catalog_for_prompt,
)
from .scenarios import (
    GoalPredicate,
    ScenarioSpec,
    ScriptedEvent,
    builtin_corpus,
    dynamic_corpus,
    parse_scenario,
    scenario_by_id,
    scenario_to_doc,
    static_corpus,
)
from .world import (
    DuplicateObject,
    ObjectRecord,
    Observation,
    Perturbation,
    PerturbationKind,
    RobotState,
    ScenarioError,
    StepOutcome,
    UnknownObject,
    WorldState,
    apply_perturbation,
    execute_primitive,
    new_world,
    observe,
)

__version__ = "0.1.0"
