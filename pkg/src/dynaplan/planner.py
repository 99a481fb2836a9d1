"""Planner backends: a deterministic rule-based oracle and a remote model client.

Both backends answer the same query: instruction, scene observation, robot
state, rendered primitive catalog, and a task-memory digest in; a behavior
policy out. The oracle covers a closed intent grammar (pick & place, handover,
disposal, closing pushable fixtures) and exists to be verifiable ground truth;
the remote backend speaks an OpenAI-compatible chat-completions wire format to
any served model and extracts the first balanced JSON object from its reply.
"""

from __future__ import annotations

import json
import math
import re
import time
from dataclasses import dataclass
from typing import Any, Mapping, Optional, Sequence

import requests

from .policy import (
    BehaviorStep,
    OnFail,
    Phase,
    Policy,
    Pose,
    Ref,
    SchemaError,
    StepKind,
    parse_policy,
    serialize_policy,
)
from .scenarios import DEFAULT_GOAL_EPS, GoalPredicate
from .world import Observation, RobotState, position_distance

PERCEPTOR_ROLE_LINE = "You are a robotic perceptor."

#: How close (as a fraction of reach) a target must be before the oracle
#: trusts static reach and skips inserting a move_base approach.
REACH_PLANNING_MARGIN = 0.9
BASE_STANDOFF = 0.35  # meters the base stops short of a manipulation target
HANDOVER_FALLBACK_OFFSET = (0.45, 0.0, 0.50)  # used when no operator marker is visible


class PlannerUnavailable(RuntimeError):
    """The planner backend could not produce any reply."""


class PlannerTimeout(PlannerUnavailable):
    pass


class TransportError(PlannerUnavailable):
    pass


class HttpStatusError(PlannerUnavailable):
    def __init__(self, status: int, body: str = ""):
        super().__init__(f"planner endpoint returned HTTP {status}")
        self.status = status
        self.body = body


class UnsupportedInstruction(ValueError):
    """The instruction does not match the oracle's intent grammar."""


@dataclass(frozen=True)
class ImagePayload:
    """Opaque camera frame forwarded verbatim to a remote model."""

    base64_data: str
    media_type: str = "image/png"

    def data_url(self) -> str:
        return f"data:{self.media_type};base64,{self.base64_data}"


@dataclass(frozen=True)
class PlannerRequest:
    instruction: str
    observation: Observation | ImagePayload
    robot_state: RobotState
    catalog_text: str
    memory_digest: str = ""


@dataclass(frozen=True)
class PlannerResponse:
    policy: Optional[Policy]
    raw_output: str
    latency: float
    backend: str


@dataclass(frozen=True)
class RemoteEndpointConfig:
    base_url: str
    model_name: str
    timeout: float = 30.0
    max_retries: int = 2
    temperature: float = 0.0

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")


# ---------------------------------------------------------------------------
# Scene rendering (shared by prompts and the console-facing gateway)
# ---------------------------------------------------------------------------


def render_observation(observation: Observation) -> str:
    lines = []
    for label in sorted(observation.objects):
        record = observation.objects[label]
        pose = ", ".join(f"{c:.3f}" for c in record.pose)
        tag = "graspable" if record.graspable else "fixture"
        lines.append(f"- {label} ({tag}) at [{pose}]")
    if not lines:
        lines.append("- (no visible objects)")
    if observation.delivered:
        lines.append(f"- already handed to the operator: {', '.join(observation.delivered)}")
    return "\n".join(lines)


def render_robot_state(robot: Any) -> str:
    base = ", ".join(f"{c:.3f}" for c in robot.base_pose)
    ee = ", ".join(f"{c:.3f}" for c in robot.ee_pose)
    holding = robot.gripper_holding or "nothing"
    gripper = "open" if robot.gripper_open else "closed"
    return f"base=[{base}] ee=[{ee}] gripper={gripper} holding={holding}"


# ---------------------------------------------------------------------------
# Intent grammar (oracle + goal inference)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Intent:
    kind: str  # "pick_place" | "handover" | "dispose" | "close"
    target: str
    destination: Optional[str] = None  # place target / disposal sink / slot label


_HANDOVER_RE = re.compile(r"\b(hand|give|pass|bring)\b.*\b(me|my|to me|over)\b|\bhand over\b")
_DISPOSE_RE = re.compile(r"\b(throw away|throw|dispose of|dispose|toss|discard|bin)\b")
_CLOSE_RE = re.compile(r"\bclose\b|\bshut\b")
_PICKPLACE_RE = re.compile(r"\b(pick up|pick|grab|take|move|put|place|carry|set)\b")
_PLACE_PREP_RE = re.compile(r"\b(onto|on|into|in|to|at)\b")
_SINK_RE = re.compile(r"bin|trash|recycl|garbage")
_PRONOUN_RE = re.compile(r"\bit\b")


def _label_phrase(label: str) -> str:
    return label.replace("_", " ").lower()


def _label_matches(text: str, labels: Sequence[str]) -> list[tuple[int, int, str]]:
    """(start, end, label) for every label phrase occurring in text, earliest
    first; longer phrases win ties so "cabinet door" beats "door"."""
    matches = []
    for label in labels:
        phrase = re.escape(_label_phrase(label))
        m = re.search(rf"\b{phrase}\b", text)
        if m:
            matches.append((m.start(), m.end(), label))
    matches.sort(key=lambda t: (t[0], -(t[1] - t[0])))
    return matches


def parse_intent(
    instruction: str, observation: Observation, robot_state: Optional[Any] = None
) -> Optional[Intent]:
    """Map an instruction onto the closed intent grammar, or None.

    Object slots are filled from the labels visible in the observation; the
    pronoun "it" resolves to the currently held object.
    """
    if isinstance(observation, ImagePayload):
        return None  # nothing to ground labels against
    text = instruction.lower()
    labels = list(observation.objects)
    matches = _label_matches(text, labels)
    holding = robot_state.gripper_holding if robot_state is not None else None

    def first_match(exclude: tuple[str, ...] = ()) -> Optional[tuple[int, int, str]]:
        for m in matches:
            if m[2] not in exclude:
                return m
        return None

    if _CLOSE_RE.search(text):
        target = first_match()
        if target is not None:
            slot = f"{target[2]}_slot"
            if slot in observation.objects:
                return Intent(kind="close", target=target[2], destination=slot)

    if _DISPOSE_RE.search(text):
        sinks = tuple(label for label in sorted(labels) if _SINK_RE.search(_label_phrase(label)))
        target = first_match(exclude=sinks)
        if target is None and holding and _PRONOUN_RE.search(text):
            target = (0, 0, holding)
        if target is not None and sinks:
            return Intent(kind="dispose", target=target[2], destination=sinks[0])

    if _HANDOVER_RE.search(text):
        target = first_match(exclude=("operator",))
        if target is None and holding and _PRONOUN_RE.search(text):
            target = (0, 0, holding)
        if target is not None:
            return Intent(kind="handover", target=target[2])

    if _PICKPLACE_RE.search(text) and _PLACE_PREP_RE.search(text):
        target = first_match()
        if target is None and holding and _PRONOUN_RE.search(text):
            target = (-1, -1, holding)
        if target is not None:
            destination = None
            for m in matches:
                if m[0] >= target[1] and m[2] != target[2]:
                    destination = m[2]
                    break
            if destination is not None:
                return Intent(kind="pick_place", target=target[2], destination=destination)

    return None


def infer_goal(
    instruction: str, observation: Observation, robot_state: Optional[Any] = None
) -> Optional[GoalPredicate]:
    """Derive the goal predicate a new instruction implies, if it is in-grammar.

    Destination poses are taken from the current observation, so the inferred
    goal is only as accurate as perception.
    """
    intent = parse_intent(instruction, observation, robot_state)
    if intent is None:
        return None
    if intent.kind == "handover":
        return GoalPredicate(kind="held_by_operator", label=intent.target)
    if intent.kind == "dispose":
        return GoalPredicate(kind="absent", label=intent.target)
    pose = observation.pose_of(intent.destination or "")
    if pose is None:
        return None
    return GoalPredicate(kind="at_pose", label=intent.target, pose=pose, eps=DEFAULT_GOAL_EPS)


# ---------------------------------------------------------------------------
# Oracle planner
# ---------------------------------------------------------------------------


class _PlanBuilder:
    def __init__(self):
        self.phases: list[tuple[str, list[BehaviorStep]]] = []
        self._counter = 0

    def phase(self, name: str) -> None:
        self.phases.append((name, []))

    def add(self, kind: StepKind, name: str, params: Optional[Mapping[str, Any]] = None) -> str:
        self._counter += 1
        step_id = f"s{self._counter}"
        self.phases[-1][1].append(
            BehaviorStep(id=step_id, kind=kind, name=name, params=dict(params or {}), on_fail=OnFail.REPLAN)
        )
        return step_id

    def action(self, name: str, params: Optional[Mapping[str, Any]] = None) -> str:
        return self.add(StepKind.ACTION, name, params)

    def perceive(self, name: str, params: Optional[Mapping[str, Any]] = None) -> str:
        return self.add(StepKind.PERCEPTION, name, params)

    def build(self, task_summary: str) -> Policy:
        return Policy(
            task_summary=task_summary,
            phases=tuple(Phase(name=n, steps=tuple(steps)) for n, steps in self.phases if steps),
        )


def _standoff_pose(base: Pose, targets: Sequence[Pose]) -> Pose:
    cx = sum(t[0] for t in targets) / len(targets)
    cy = sum(t[1] for t in targets) / len(targets)
    dx, dy = cx - base[0], cy - base[1]
    span = math.hypot(dx, dy)
    if span <= BASE_STANDOFF:
        return base
    scale = (span - BASE_STANDOFF) / span
    yaw = math.atan2(dy, dx)
    return (base[0] + dx * scale, base[1] + dy * scale, base[2], 0.0, 0.0, yaw)


def _pose_ref(step_id: str) -> Ref:
    return Ref(f"{step_id}.pose")


def oracle_plan(request: PlannerRequest) -> PlannerResponse:
    """Deterministic ground-truth planner over the supported intent grammar.

    Identical requests yield identical policies. Out-of-grammar instructions
    produce ``policy=None`` (classified upstream as a planning failure).
    """
    start = time.monotonic()
    observation = request.observation
    robot = request.robot_state
    intent = parse_intent(request.instruction, observation, robot) if isinstance(observation, Observation) else None
    if intent is None:
        return PlannerResponse(
            policy=None,
            raw_output=f"unsupported instruction: {request.instruction!r}",
            latency=time.monotonic() - start,
            backend="oracle",
        )

    embodiment = robot.embodiment
    reach_threshold = (embodiment.reach_radius if embodiment else math.inf) * REACH_PLANNING_MARGIN
    mobile = bool(embodiment.base_mobile) if embodiment else False
    builder = _PlanBuilder()
    planned_base = robot.base_pose

    def ensure_reach(*targets: Pose) -> None:
        # Insert a base approach when any target sits beyond the planning margin.
        nonlocal planned_base
        if not targets:
            return
        worst = max(position_distance(planned_base, t) for t in targets)
        if worst > reach_threshold and mobile:
            planned_base = _standoff_pose(planned_base, targets)
            builder.action("move_base", {"pose": planned_base})

    builder.phase("prepare")
    builder.action("wake_up")
    holding = robot.gripper_holding
    needs_object = intent.target if intent.kind in ("pick_place", "dispose", "handover") else None
    if holding is not None and holding != needs_object:
        # Free the gripper first: set the held object down where it is.
        loc = builder.perceive("locate_object", {"label": holding})
        builder.action("place", {"pose": _pose_ref(loc)})
        holding = None

    if intent.kind in ("pick_place", "dispose", "handover"):
        target_pose = observation.pose_of(intent.target)
        if target_pose is None and holding != intent.target:
            return PlannerResponse(
                policy=None,
                raw_output=f"target object {intent.target!r} is not visible",
                latency=time.monotonic() - start,
                backend="oracle",
            )
        if holding != intent.target:
            builder.phase("acquire")
            builder.perceive("locate_object", {"label": intent.target})
            gp = builder.perceive("grasp_point", {"label": intent.target})
            ensure_reach(target_pose)
            builder.action("grasp", {"pose": _pose_ref(gp)})
            builder.action("lift")
        builder.phase("deliver")
        if intent.kind == "handover":
            if "operator" in observation.objects:
                op = builder.perceive("locate_object", {"label": "operator"})
                ensure_reach(observation.pose_of("operator"))
                builder.action("handover", {"pose": _pose_ref(op)})
            else:
                fallback = (
                    planned_base[0] + HANDOVER_FALLBACK_OFFSET[0],
                    planned_base[1] + HANDOVER_FALLBACK_OFFSET[1],
                    planned_base[2] + HANDOVER_FALLBACK_OFFSET[2],
                    0.0,
                    0.0,
                    0.0,
                )
                builder.action("handover", {"pose": fallback})
        else:
            destination = intent.destination or ""
            dest_pose = observation.pose_of(destination)
            if dest_pose is None:
                return PlannerResponse(
                    policy=None,
                    raw_output=f"destination {destination!r} is not visible",
                    latency=time.monotonic() - start,
                    backend="oracle",
                )
            loc = builder.perceive("locate_object", {"label": destination})
            ensure_reach(dest_pose)
            builder.action("place", {"pose": _pose_ref(loc)})
    else:  # close
        target_pose = observation.pose_of(intent.target)
        slot_pose = observation.pose_of(intent.destination or "")
        if target_pose is None or slot_pose is None:
            return PlannerResponse(
                policy=None,
                raw_output=f"cannot see both {intent.target!r} and its slot",
                latency=time.monotonic() - start,
                backend="oracle",
            )
        builder.phase("perceive")
        contact = builder.perceive("locate_object", {"label": intent.target})
        slot = builder.perceive("locate_object", {"label": intent.destination})
        builder.phase("actuate")
        ensure_reach(target_pose, slot_pose)
        builder.action("push", {"pose": _pose_ref(slot), "contact_pose": _pose_ref(contact)})

    builder.phase("finish")
    builder.action("homing")

    summary = {
        "pick_place": f"move {intent.target} to {intent.destination}",
        "dispose": f"dispose of {intent.target} into {intent.destination}",
        "handover": f"hand {intent.target} to the operator",
        "close": f"push {intent.target} closed",
    }[intent.kind]
    policy = builder.build(summary)
    return PlannerResponse(
        policy=policy,
        raw_output=serialize_policy(policy),
        latency=time.monotonic() - start,
        backend="oracle",
    )


class OraclePlanner:
    """Stateless callable wrapper; safe for concurrent use."""

    name = "oracle"

    def plan(self, request: PlannerRequest) -> PlannerResponse:
        return oracle_plan(request)


# ---------------------------------------------------------------------------
# Prompt assembly
# ---------------------------------------------------------------------------

_POLICY_SCHEMA_HINT = (
    'Reply with exactly one JSON document: {"task_summary": string, "phases": '
    '[{"name": string, "steps": [{"id": string, "kind": "action"|"perception", '
    '"name": string, "params": object, "on_fail": "abort"|"replan"}]}], '
    '"version": "vlp-policy/1"}. Step parameters are numbers, strings, '
    "[x, y, z, roll, pitch, yaw] poses (meters, radians), or "
    '{"$ref": "<step_id>.<field>"} references to an earlier perception output. '
    "Steps run strictly in order; no branching."
)


def assemble_prompt(
    request: PlannerRequest,
    mode: str = "policy",
    target: Optional[str] = None,
    next_action: Optional[str] = None,
) -> list[dict[str, Any]]:
    """Build the chat message sequence for a backend model.

    ``policy`` mode carries all five planner inputs (instruction, observation,
    robot state, catalog, memory). ``grounding`` mode asks for a manipulation
    point on a target object given the policy's next action; its system content
    starts with the fixed perceptor role line. Deterministic in its inputs.
    """
    observation = request.observation
    if isinstance(observation, ImagePayload):
        scene_text = "(attached camera image)"
        image: Optional[ImagePayload] = observation
    else:
        scene_text = render_observation(observation)
        image = None
    robot_text = render_robot_state(request.robot_state)

    if mode == "grounding":
        system = "\n".join(
            [
                PERCEPTOR_ROLE_LINE,
                "Identify the requested object in the scene and propose a manipulation "
                "point that lets the robot perform its next action on it. Reply with the "
                "object label and a [x, y, z, roll, pitch, yaw] pose.",
            ]
        )
        user_text = (
            f"Scene:\n{scene_text}\n\n"
            f"Instruction: {request.instruction}\n"
            f"Target object: {target or '(infer from the instruction)'}\n"
            f"Next action: {next_action or '(first manipulation in the policy)'}\n"
            "Give the manipulation point for the target object."
        )
    elif mode == "policy":
        system = "\n".join(
            [
                "You are a robot task planner. Compose behavior policies from the primitive "
                "library below; never invent primitives.",
                _POLICY_SCHEMA_HINT,
                "",
                request.catalog_text,
                "",
                "Task memory:",
                request.memory_digest or "none",
            ]
        )
        user_text = (
            f"Instruction: {request.instruction}\n\n"
            f"Scene:\n{scene_text}\n\n"
            f"Robot state: {robot_text}"
        )
    else:
        raise ValueError(f"unknown prompt mode {mode!r}")

    user_content: list[dict[str, Any]] = [{"type": "text", "text": user_text}]
    if image is not None:
        user_content.append({"type": "image_url", "image_url": {"url": image.data_url()}})
    return [
        {"role": "system", "content": system},
        {"role": "user", "content": user_content},
    ]


# ---------------------------------------------------------------------------
# Policy extraction from model output
# ---------------------------------------------------------------------------


def find_balanced_object(raw: str) -> Optional[str]:
    """The first balanced ``{...}`` span in raw text, string-literal aware."""
    start = raw.find("{")
    if start < 0:
        return None
    depth = 0
    in_string = False
    escaped = False
    for i in range(start, len(raw)):
        ch = raw[i]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return raw[start : i + 1]
    return None


def extract_policy(raw: str) -> Optional[Policy]:
    """Parse a policy out of arbitrary model output.

    Finds the first balanced JSON object (code fences and surrounding prose are
    tolerated) and parses it. Only the first candidate is tried; None signals
    extraction failure.
    """
    candidate = find_balanced_object(raw)
    if candidate is None:
        return None
    try:
        return parse_policy(candidate)
    except SchemaError:
        return None


# ---------------------------------------------------------------------------
# Remote backend
# ---------------------------------------------------------------------------


def remote_plan(
    request: PlannerRequest,
    cfg: RemoteEndpointConfig,
    session: Optional[requests.Session] = None,
) -> PlannerResponse:
    """Query a served model over the chat-completions wire format.

    Makes ``1 + cfg.max_retries`` attempts; timeouts, transport failures, and
    non-2xx statuses all raise a :class:`PlannerUnavailable` subclass once the
    attempts are exhausted. A reply without an extractable policy is not an
    error here; ``policy=None`` is classified upstream.
    """
    messages = assemble_prompt(request, mode="policy")
    body = {"model": cfg.model_name, "temperature": cfg.temperature, "messages": messages}
    url = cfg.base_url.rstrip("/") + "/v1/chat/completions"
    http = session or requests

    start = time.monotonic()
    attempts = 1 + max(0, cfg.max_retries)
    last_error: Optional[PlannerUnavailable] = None
    for _ in range(attempts):
        try:
            response = http.post(url, json=body, timeout=cfg.timeout)
        except requests.Timeout as exc:
            last_error = PlannerTimeout(f"planner request timed out after {cfg.timeout}s")
            last_error.__cause__ = exc
            continue
        except requests.RequestException as exc:
            last_error = TransportError(f"planner request failed: {exc}")
            last_error.__cause__ = exc
            continue
        if response.status_code < 200 or response.status_code >= 300:
            last_error = HttpStatusError(response.status_code, response.text[:500])
            continue
        try:
            payload = response.json()
            content = payload["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            last_error = TransportError(f"malformed planner reply: {exc}")
            continue
        return PlannerResponse(
            policy=extract_policy(content if isinstance(content, str) else json.dumps(content)),
            raw_output=content if isinstance(content, str) else json.dumps(content),
            latency=time.monotonic() - start,
            backend=f"remote:{cfg.model_name}",
        )
    raise last_error if last_error is not None else PlannerUnavailable("planner unreachable")


class RemotePlanner:
    """Stateless between calls; one HTTP session is reused for connection pooling."""

    def __init__(self, cfg: RemoteEndpointConfig):
        self.cfg = cfg
        self.name = f"remote:{cfg.model_name}"
        self._session = requests.Session()

    def plan(self, request: PlannerRequest) -> PlannerResponse:
        return remote_plan(request, self.cfg, session=self._session)
