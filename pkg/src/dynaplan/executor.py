"""Episode executor: the deployment control loop.

One episode = one task attempt. The loop observes the world, queries the
planner with (instruction, observation, robot state, catalog, memory digest),
executes the returned policy step by step, and checks two things at every step
boundary: is the task complete, and did a strategic trigger fire (a new
instruction arrived, or the task state changed relative to what the plan
assumed). A trigger abandons the remaining steps and replans; triggers are
honored only at step boundaries, never mid-primitive.

Failed episodes carry exactly one failure class:

- ``planning``: the planner produced nothing usable (unparseable/invalid
                   policy, broken reference, unreachable backend) or replanning
                   looped to the budget without scene evidence;
- ``perception``: a perception result disagreed with simulator ground truth
                   (injected observation noise) and that is what broke the run;
- ``execution``: a motion primitive failed on honest geometry (out of reach,
                   nothing at the commanded pose).

Events are recorded as an append-only trace with a canonical line-delimited
JSON encoding (one ``{"tick":..,"kind":..,"details":{..}}`` object per line,
stable key order) consumed by the gateway stream and the evaluation harness.
"""

from __future__ import annotations

import json
import threading
import time
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Callable, Iterable, Mapping, Optional, Sequence

from .planner import PlannerRequest, PlannerResponse, PlannerUnavailable, infer_goal
from .policy import (
    BehaviorStep,
    OnFail,
    Policy,
    Pose,
    Ref,
    StepKind,
    iter_refs,
    policy_digest,
    serialize_policy,
    validate_policy,
)
from .primitives import PrimitiveCatalog, builtin_catalog, render_catalog_for_prompt
from .scenarios import GoalPredicate, ScenarioSpec
from .world import (
    GRASP_POINT_OFFSET,
    Observation,
    Perturbation,
    WorldState,
    apply_perturbation,
    execute_primitive,
    new_world,
    observe,
    position_distance,
    snapshot_world,
)

FAIL_PLANNING = "planning"
FAIL_PERCEPTION = "perception"
FAIL_EXECUTION = "execution"

DEFAULT_DELTA_MOVE = 0.05
DEFAULT_REPLAN_BUDGET = 5
DEFAULT_MEMORY_DIGEST_ENTRIES = 20


@dataclass(frozen=True)
class ExecutorConfig:
    #: An object displaced more than this (meters, strict) counts as moved.
    delta_move: float = DEFAULT_DELTA_MOVE
    #: Maximum replans per episode; exceeding it closes the episode as failed.
    replan_budget: int = DEFAULT_REPLAN_BUDGET
    #: How many trailing memory entries are rendered into planner prompts.
    memory_digest_entries: int = DEFAULT_MEMORY_DIGEST_ENTRIES
    #: Optional pause between steps, for humans watching live episodes.
    step_delay: float = 0.0


# ---------------------------------------------------------------------------
# Trace events
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EpisodeEvent:
    tick: int
    kind: str
    details: Mapping[str, Any] = field(default_factory=dict)


def _canonical(value: Any) -> Any:
    if isinstance(value, Mapping):
        return {key: _canonical(value[key]) for key in sorted(value)}
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (list, tuple)):
        return [_canonical(item) for item in value]
    return value


def event_to_line(event: EpisodeEvent) -> str:
    """Canonical serialization: fixed (tick, kind, details) order, sorted details."""
    doc = {"tick": event.tick, "kind": event.kind, "details": _canonical(event.details)}
    return json.dumps(doc, separators=(",", ":"), ensure_ascii=False)


def trace_to_lines(trace: Iterable[EpisodeEvent]) -> str:
    return "\n".join(event_to_line(event) for event in trace)


# ---------------------------------------------------------------------------
# Task memory
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MemoryEntry:
    tick: int
    kind: str  # instruction_received | policy_generated | step_executed | trigger_fired | episode_closed
    payload: str


@dataclass
class TaskMemory:
    """Append-only episode context; a bounded digest goes into planner prompts."""

    episode_id: str
    entries: list[MemoryEntry] = field(default_factory=list)

    def add(self, tick: int, kind: str, payload: str) -> None:
        self.entries.append(MemoryEntry(tick=tick, kind=kind, payload=payload))

    def digest(self, limit: int = DEFAULT_MEMORY_DIGEST_ENTRIES) -> str:
        if not self.entries:
            return "none"
        window = self.entries[-limit:]
        return "\n".join(f"- [{e.tick}] {e.kind}: {e.payload}" for e in window)

    def kinds(self) -> list[str]:
        return [e.kind for e in self.entries]


@dataclass(frozen=True)
class Trigger:
    kind: str  # "new_instruction" | "task_state_changed"
    payload: str
    at_tick: int


# ---------------------------------------------------------------------------
# External event inbox
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InstructionMessage:
    text: str
    goal: Optional[GoalPredicate] = None


@dataclass(frozen=True)
class PerturbationMessage:
    perturbation: Perturbation


class EpisodeInbox:
    """Serialized mailbox for mid-task events; producers may append from any
    thread, the episode loop consumes only at step boundaries."""

    def __init__(self):
        self._lock = threading.Lock()
        self._items: deque = deque()

    def put_instruction(self, text: str, goal: Optional[GoalPredicate] = None) -> None:
        with self._lock:
            self._items.append(InstructionMessage(text=text, goal=goal))

    def put_perturbation(self, perturbation: Perturbation) -> None:
        with self._lock:
            self._items.append(PerturbationMessage(perturbation=perturbation))

    def pop_batch(self) -> tuple[list[Perturbation], Optional[InstructionMessage]]:
        """Perturbations queued ahead of the first instruction, plus that
        instruction. Later items stay queued so each instruction produces its
        own trigger, in arrival order."""
        perturbations: list[Perturbation] = []
        with self._lock:
            while self._items:
                item = self._items[0]
                if isinstance(item, PerturbationMessage):
                    perturbations.append(item.perturbation)
                    self._items.popleft()
                else:
                    self._items.popleft()
                    return perturbations, item
        return perturbations, None

    def __len__(self) -> int:
        with self._lock:
            return len(self._items)


# ---------------------------------------------------------------------------
# Parameter resolution
# ---------------------------------------------------------------------------


class UnresolvedReference(KeyError):
    pass


def resolve_params(step: BehaviorStep, results: Mapping[str, Mapping[str, Any]]) -> BehaviorStep:
    """Substitute every $ref with the referenced output of an earlier step.

    Raises :class:`UnresolvedReference` when the target step has not run,
    failed, or lacks the named output field (a planning-class failure).
    """
    if not any(isinstance(v, Ref) for v in step.params.values()):
        return step
    resolved: dict[str, Any] = {}
    for key, value in step.params.items():
        if isinstance(value, Ref):
            outputs = results.get(value.step_id)
            if outputs is None:
                raise UnresolvedReference(
                    f"step {step.id!r}: $ref {value.target!r} targets a step that has not run successfully"
                )
            if value.field not in outputs:
                raise UnresolvedReference(
                    f"step {step.id!r}: $ref {value.target!r} names an output that does not exist"
                )
            resolved[key] = outputs[value.field]
        else:
            resolved[key] = value
    return replace(step, params=resolved)


# ---------------------------------------------------------------------------
# State-change detection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Commitment:
    """A postcondition the episode expects to keep holding after a step."""

    kind: str  # "holding" | "object_at"
    label: str
    pose: Optional[Pose] = None


@dataclass(frozen=True)
class TrackingState:
    """What the remaining plan assumes about the scene: cached poses for every
    object the remaining steps depend on, plus postcondition commitments of
    completed steps."""

    cached_poses: Mapping[str, Pose]
    commitments: tuple[Commitment, ...] = ()


@dataclass(frozen=True)
class StateDiff:
    kind: str  # "object_moved" | "object_disappeared" | "postcondition_violated"
    label: str
    detail: str
    magnitude: float = 0.0


def detect_state_change(
    tracking: TrackingState, observation: Observation, delta_move: float = DEFAULT_DELTA_MOVE
) -> Optional[StateDiff]:
    """Fire iff a tracked object disappeared, moved strictly more than
    ``delta_move`` since its pose was cached, or a commitment no longer holds."""
    for label in sorted(tracking.cached_poses):
        cached = tracking.cached_poses[label]
        current = observation.pose_of(label)
        if current is None:
            return StateDiff(
                kind="object_disappeared", label=label, detail=f"{label!r} vanished from the scene"
            )
        displacement = position_distance(cached, current)
        if displacement > delta_move:
            return StateDiff(
                kind="object_moved",
                label=label,
                detail=f"{label!r} moved {displacement:.3f} m since it was last perceived",
                magnitude=displacement,
            )
    for commitment in tracking.commitments:
        if commitment.kind == "holding":
            if observation.robot.gripper_holding != commitment.label:
                return StateDiff(
                    kind="postcondition_violated",
                    label=commitment.label,
                    detail=f"{commitment.label!r} is no longer held",
                )
        elif commitment.kind == "object_at" and commitment.pose is not None:
            current = observation.pose_of(commitment.label)
            if current is None:
                return StateDiff(
                    kind="postcondition_violated",
                    label=commitment.label,
                    detail=f"placed object {commitment.label!r} vanished",
                )
            displacement = position_distance(commitment.pose, current)
            if displacement > delta_move:
                return StateDiff(
                    kind="postcondition_violated",
                    label=commitment.label,
                    detail=f"placed object {commitment.label!r} drifted {displacement:.3f} m",
                    magnitude=displacement,
                )
    return None


def build_tracking(
    remaining: Sequence[BehaviorStep],
    plan_observation: Observation,
    results: Mapping[str, Mapping[str, Any]],
    result_labels: Mapping[str, Optional[str]],
    commitments: Mapping[str, Commitment],
) -> TrackingState:
    """Cached poses: labels named by remaining steps (baseline = plan-time
    observation) overridden by fresher perception outputs that still feed
    remaining $refs."""
    cached: dict[str, Pose] = {}
    for step in remaining:
        label = step.params.get("label")
        if isinstance(label, str):
            seen = plan_observation.pose_of(label)
            if seen is not None:
                cached.setdefault(label, seen)
    for step in remaining:
        for _, ref in iter_refs(step):
            outputs = results.get(ref.step_id)
            label = result_labels.get(ref.step_id)
            if outputs and label:
                pose = outputs.get("pose")
                if isinstance(pose, tuple):
                    cached[label] = pose
    return TrackingState(cached_poses=cached, commitments=tuple(commitments.values()))


# ---------------------------------------------------------------------------
# Failure classification
# ---------------------------------------------------------------------------

_PLANNING_MARKERS = {"policy_rejected", "planner_unavailable", "reference_unresolved"}


def classify_failure(trace: Sequence[EpisodeEvent], delta_move: float = DEFAULT_DELTA_MOVE) -> str:
    """Assign exactly one failure class to a failed episode's trace.

    Planning if the planner output was unusable or a reference failed to
    resolve; otherwise the class of the most recent scene evidence: perception
    when a perception result deviated from ground truth beyond ``delta_move``
    (directly, through an action consuming a deviant pose, or through a trigger
    fired on noisy observation), execution for honest geometric step failures.
    Replanning to the budget with no scene evidence at all is a planning loop.
    """
    last_evidence: Optional[str] = None
    for event in trace:
        if event.kind in _PLANNING_MARKERS:
            return FAIL_PLANNING
        details = event.details
        if event.kind == "step_finished":
            truth_dev = float(details.get("truth_deviation", 0.0) or 0.0)
            perception_dev = float(details.get("perception_deviation", 0.0) or 0.0)
            if details.get("ok"):
                if truth_dev > delta_move:
                    last_evidence = FAIL_PERCEPTION
                continue
            if details.get("failure_class") == FAIL_PERCEPTION or perception_dev > delta_move:
                last_evidence = FAIL_PERCEPTION
            elif details.get("failure_class") == FAIL_EXECUTION:
                last_evidence = FAIL_EXECUTION
        elif event.kind == "trigger_fired":
            if float(details.get("observed_deviation", 0.0) or 0.0) > delta_move:
                last_evidence = FAIL_PERCEPTION
    return last_evidence or FAIL_PLANNING


# ---------------------------------------------------------------------------
# Episode result
# ---------------------------------------------------------------------------


@dataclass
class EpisodeResult:
    episode_id: str
    status: str  # "success" | "failure"
    failure_class: Optional[str]
    replans: int
    steps_executed: int
    trace: tuple[EpisodeEvent, ...]
    memory: TaskMemory
    final_world: WorldState
    #: Whether the first planner query produced a policy that validated cleanly
    #: (the feasibility half of plan-vs-success metrics).
    plan_valid: bool

    @property
    def succeeded(self) -> bool:
        return self.status == "success"


# ---------------------------------------------------------------------------
# The episode loop
# ---------------------------------------------------------------------------


class _EpisodeRunner:
    def __init__(
        self,
        scenario: ScenarioSpec,
        planner,
        catalog: Optional[PrimitiveCatalog],
        inbox: Optional[EpisodeInbox],
        seed: int,
        config: ExecutorConfig,
        event_sink: Optional[Callable[[EpisodeEvent], None]],
        observation_hook: Optional[Callable[[Observation], None]],
        episode_id: Optional[str],
    ):
        self.scenario = scenario
        self.planner = planner
        self.catalog = catalog or builtin_catalog(scenario.embodiment_profile())
        self.catalog_text = render_catalog_for_prompt(self.catalog)
        # `is not None`, not truthiness: an empty EpisodeInbox is falsy.
        self.inbox = inbox if inbox is not None else EpisodeInbox()
        self.seed = seed
        self.config = config
        self.event_sink = event_sink
        self.observation_hook = observation_hook
        self.episode_id = episode_id or f"{scenario.id}#{seed}"

        self.world = new_world(scenario, seed)
        self.memory = TaskMemory(episode_id=self.episode_id)
        self.trace: list[EpisodeEvent] = []
        self.instruction = scenario.instruction
        self.goal = scenario.goal
        self.replans = 0
        self.steps_executed = 0
        self.plan_valid = False
        self._first_plan = True
        self._pending_events = sorted(scenario.scripted_events, key=lambda e: e.after_step)
        self._commitments: dict[str, Commitment] = {}

    # -- bookkeeping -------------------------------------------------------

    def emit(self, event_kind: str, **details: Any) -> None:
        event = EpisodeEvent(tick=self.world.tick, kind=event_kind, details=details)
        self.trace.append(event)
        if self.event_sink is not None:
            self.event_sink(event)

    def observe_now(self) -> Observation:
        observation = observe(self.world)
        if self.observation_hook is not None:
            self.observation_hook(observation)
        return observation

    def _close(self, status: str, failure_class: Optional[str] = None) -> EpisodeResult:
        if self.observation_hook is not None:
            self.observe_now()  # publish the terminal scene to live viewers
        self.memory.add(self.world.tick, "episode_closed", f"{status}" + (f" ({failure_class})" if failure_class else ""))
        self.emit(
            "episode_closed",
            status=status,
            failure_class=failure_class,
            replans=self.replans,
            steps_executed=self.steps_executed,
        )
        return EpisodeResult(
            episode_id=self.episode_id,
            status=status,
            failure_class=failure_class,
            replans=self.replans,
            steps_executed=self.steps_executed,
            trace=tuple(self.trace),
            memory=self.memory,
            final_world=snapshot_world(self.world),
            plan_valid=self.plan_valid,
        )

    def _close_success(self) -> EpisodeResult:
        self.emit("goal_reached", goal=self.goal.to_doc())
        return self._close("success")

    def _close_failure(self, forced_class: Optional[str] = None) -> EpisodeResult:
        failure_class = forced_class or classify_failure(self.trace, self.config.delta_move)
        return self._close("failure", failure_class)

    def _record_trigger(self, kind: str, payload: str, **details: Any) -> None:
        trigger = Trigger(kind=kind, payload=payload, at_tick=self.world.tick)
        self.memory.add(trigger.at_tick, "trigger_fired", f"{trigger.kind}: {trigger.payload}")
        self.emit("trigger_fired", kind=trigger.kind, payload=trigger.payload, **details)
        self.replans += 1

    # -- perception ground truth -------------------------------------------

    def _truth_deviation(self, step: BehaviorStep, outputs: Mapping[str, Any]) -> Optional[float]:
        if step.name not in ("locate_object", "grasp_point"):
            return None
        label = step.params.get("label")
        record = self.world.objects.get(label) if isinstance(label, str) else None
        returned = outputs.get("pose")
        if record is None or not isinstance(returned, tuple):
            return None
        truth = record.pose
        if step.name == "grasp_point":
            truth = (truth[0], truth[1], truth[2] + GRASP_POINT_OFFSET, truth[3], truth[4], truth[5])
        return position_distance(returned, truth)

    def _update_commitments(self, step: BehaviorStep, outputs: Mapping[str, Any]) -> None:
        if step.kind != StepKind.ACTION:
            return
        if step.name == "grasp":
            label = outputs.get("held")
            if label:
                self._commitments.pop(f"at:{label}", None)
                self._commitments["holding"] = Commitment(kind="holding", label=label)
        elif step.name in ("place", "push"):
            label = outputs.get("placed") or outputs.get("pushed")
            if step.name == "place":
                self._commitments.pop("holding", None)
            if label and label in self.world.objects:
                self._commitments[f"at:{label}"] = Commitment(
                    kind="object_at", label=label, pose=self.world.objects[label].pose
                )
        elif step.name in ("handover", "open_gripper"):
            self._commitments.pop("holding", None)

    def _deliver_scripted(self) -> None:
        while self._pending_events and self._pending_events[0].after_step <= self.steps_executed:
            event = self._pending_events.pop(0)
            if event.perturbation is not None:
                self._apply_perturbation(event.perturbation, source="scripted")
            else:
                self.inbox.put_instruction(event.new_instruction or "", goal=event.goal)

    def _apply_perturbation(self, perturbation: Perturbation, source: str) -> None:
        details = {
            "kind": perturbation.kind.value
            if hasattr(perturbation.kind, "value")
            else str(perturbation.kind),
            "target": perturbation.target,
            "source": source,
        }
        if perturbation.new_pose is not None:
            details["new_pose"] = list(perturbation.new_pose)
        try:
            apply_perturbation(self.world, perturbation)
        except Exception as exc:  # bad operator input must not kill the episode
            self.emit("perturbation_failed", error=str(exc), **details)
            return
        self.emit("perturbation_applied", **details)

    def _switch_instruction(self, message: InstructionMessage, observation: Observation) -> None:
        self._record_trigger("new_instruction", message.text)
        self.instruction = message.text
        new_goal = message.goal or infer_goal(message.text, observation, self.world.robot)
        if new_goal is not None:
            self.goal = new_goal
        self.memory.add(self.world.tick, "instruction_received", message.text)
        self.emit("instruction_received", text=message.text, source="injected", goal=self.goal.to_doc())

    # -- main loop -----------------------------------------------------------

    def run(self) -> EpisodeResult:
        self.emit(
            "episode_started",
            episode_id=self.episode_id,
            scenario_id=self.scenario.id,
            seed=self.seed,
            embodiment=self.catalog.embodiment.name,
            instruction=self.instruction,
        )
        self.memory.add(self.world.tick, "instruction_received", self.instruction)
        self.emit("instruction_received", text=self.instruction, source="initial", goal=self.goal.to_doc())

        while True:
            if self.goal.holds(self.world):
                return self._close_success()

            observation = self.observe_now()
            request = PlannerRequest(
                instruction=self.instruction,
                observation=observation,
                robot_state=replace(self.world.robot),
                catalog_text=self.catalog_text,
                memory_digest=self.memory.digest(self.config.memory_digest_entries),
            )
            self.emit("planner_queried", backend=getattr(self.planner, "name", "unknown"), replans=self.replans)
            try:
                response: PlannerResponse = self.planner.plan(request)
            except PlannerUnavailable as exc:
                self.emit("planner_unavailable", error=str(exc))
                return self._close_failure(FAIL_PLANNING)

            if response.policy is None:
                self.emit("policy_rejected", reason="no_policy", raw_output=response.raw_output[:400])
                return self._close_failure()
            report = validate_policy(response.policy, self.catalog)
            if not report.ok:
                self.emit(
                    "policy_rejected",
                    reason="invalid_policy",
                    errors=[f"{i.code}@{i.step_id}: {i.message}" for i in report.errors],
                )
                return self._close_failure()
            if self._first_plan:
                self.plan_valid = True
                self._first_plan = False

            policy = response.policy
            digest = policy_digest(policy)
            self.memory.add(self.world.tick, "policy_generated", digest)
            self.emit(
                "policy_generated",
                digest=digest,
                policy_json=serialize_policy(policy),
                backend=response.backend,
                replans=self.replans,
            )

            outcome = self._execute_policy(policy, plan_observation=observation)
            if outcome is not None:
                return outcome
            if self.replans > self.config.replan_budget:
                self.emit("replan_budget_exhausted", budget=self.config.replan_budget)
                return self._close_failure()

    def _execute_policy(self, policy: Policy, plan_observation: Observation) -> Optional[EpisodeResult]:
        """Run one policy to completion, success, or a trigger. Returns a final
        result to close the episode, or None to replan."""
        steps = policy.flatten()
        results: dict[str, Mapping[str, Any]] = {}
        result_labels: dict[str, Optional[str]] = {}
        deviations: dict[str, float] = {}

        for index, step in enumerate(steps):
            try:
                resolved = resolve_params(step, results)
            except UnresolvedReference as exc:
                self.emit("reference_unresolved", step_id=step.id, error=str(exc))
                return self._close_failure(FAIL_PLANNING)

            if self.config.step_delay > 0:
                time.sleep(self.config.step_delay)
            self.emit(
                "step_started",
                step_id=step.id,
                name=step.name,
                step_kind=step.kind.value,
                params=_params_doc(resolved.params),
            )
            outcome = execute_primitive(self.world, resolved, self.catalog)
            self.steps_executed += 1

            details: dict[str, Any] = {
                "step_id": step.id,
                "name": step.name,
                "ok": outcome.ok,
            }
            if outcome.ok:
                if step.kind == StepKind.PERCEPTION:
                    results[step.id] = dict(outcome.outputs)
                    label = step.params.get("label")
                    result_labels[step.id] = label if isinstance(label, str) else None
                    deviation = self._truth_deviation(step, outcome.outputs)
                    if deviation is not None:
                        deviations[step.id] = deviation
                        details["truth_deviation"] = round(deviation, 6)
                if outcome.outputs:
                    details["outputs"] = _params_doc(outcome.outputs)
            if not outcome.ok:
                details["failure_class"] = outcome.failure_class
                details["reason"] = outcome.reason
                source_deviation = max(
                    (deviations.get(ref.step_id, 0.0) for _, ref in iter_refs(step)), default=0.0
                )
                if source_deviation:
                    details["perception_deviation"] = round(source_deviation, 6)

            memory_note = f"{step.id} {step.name} " + ("ok" if outcome.ok else f"FAILED ({outcome.reason})")
            self.memory.add(self.world.tick, "step_executed", memory_note)
            self.emit("step_finished", **details)

            if not outcome.ok:
                if step.on_fail == OnFail.ABORT:
                    return self._close_failure()
                self._record_trigger(
                    "task_state_changed",
                    f"step {step.id} ({step.name}) failed: {outcome.reason}",
                    reason="step_failed",
                    step_id=step.id,
                    failure_class=outcome.failure_class,
                )
                return None

            self._update_commitments(step, outcome.outputs)

            # ---- step boundary: scripted events, completion, triggers ----
            self._deliver_scripted()
            if self.goal.holds(self.world):
                return self._close_success()

            perturbations, message = self.inbox.pop_batch()
            for perturbation in perturbations:
                self._apply_perturbation(perturbation, source="manual")
            if perturbations and self.goal.holds(self.world):
                return self._close_success()

            observation = self.observe_now()
            if message is not None:
                self._switch_instruction(message, observation)
                return None

            tracking = build_tracking(steps[index + 1 :], plan_observation, results, result_labels, self._commitments)
            diff = detect_state_change(tracking, observation, self.config.delta_move)
            if diff is not None:
                truth = self.world.objects.get(diff.label)
                observed = observation.pose_of(diff.label)
                observed_deviation = (
                    position_distance(observed, truth.pose) if truth is not None and observed is not None else 0.0
                )
                self._record_trigger(
                    "task_state_changed",
                    diff.detail,
                    reason=diff.kind,
                    label=diff.label,
                    magnitude=round(diff.magnitude, 6),
                    observed_deviation=round(observed_deviation, 6),
                )
                return None

        # Policy exhausted without reaching the goal: Algorithm-1's outer loop
        # queries the planner again; surfacing it as a state-change trigger
        # keeps the memory invariant (every policy follows a trigger).
        self._record_trigger("task_state_changed", "policy exhausted without reaching the goal", reason="policy_exhausted")
        return None


def _params_doc(params: Mapping[str, Any]) -> dict[str, Any]:
    doc = {}
    for key in sorted(params):
        value = params[key]
        if isinstance(value, Ref):
            doc[key] = {"$ref": value.target}
        elif isinstance(value, tuple):
            doc[key] = [round(float(c), 6) for c in value]
        elif isinstance(value, list):
            doc[key] = list(value)
        else:
            doc[key] = value
    return doc


def run_episode(
    scenario: ScenarioSpec,
    planner,
    catalog: Optional[PrimitiveCatalog] = None,
    inbox: Optional[EpisodeInbox] = None,
    seed: int = 0,
    config: Optional[ExecutorConfig] = None,
    event_sink: Optional[Callable[[EpisodeEvent], None]] = None,
    observation_hook: Optional[Callable[[Observation], None]] = None,
    episode_id: Optional[str] = None,
) -> EpisodeResult:
    """Run one full episode of the deployment loop; see the module docstring.

    Deterministic for a deterministic planner: identical (scenario, seed,
    scripted events, inbox timeline) reproduce the identical trace byte for
    byte under canonical serialization.
    """
    runner = _EpisodeRunner(
        scenario=scenario,
        planner=planner,
        catalog=catalog,
        inbox=inbox,
        seed=seed,
        config=config or ExecutorConfig(),
        event_sink=event_sink,
        observation_hook=observation_hook,
        episode_id=episode_id,
    )
    return runner.run()
