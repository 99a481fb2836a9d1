"""Task scenarios: scene declarations, goal predicates, scripted events, built-in corpus.

A scenario pins everything an episode needs: the embodiment, the initial scene,
the operator instruction, a declarative goal predicate evaluated on ground
truth, and optional scripted events that fire after the Nth executed step
(mid-task instruction changes and scene perturbations). Scenario files are one
JSON document per file; see ``parse_scenario`` for the schema.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Any, Mapping, Optional

from .policy import Pose
from .primitives import BUILTIN_EMBODIMENTS, EmbodimentProfile, embodiment_by_name
from .world import (
    ObjectRecord,
    Perturbation,
    PerturbationKind,
    ScenarioError,
    WorldState,
    position_distance,
)

DEFAULT_GOAL_EPS = 0.05


@dataclass(frozen=True)
class GoalPredicate:
    """Declarative task goal evaluated on ground truth.

    kinds: ``at_pose(label, pose, eps)``, object within eps of pose (position
    only); ``absent(label)``, object no longer in the scene (disposed or
    handed over); ``held_by_operator(label)``, object was handed over.
    """

    kind: str
    label: str
    pose: Optional[Pose] = None
    eps: float = DEFAULT_GOAL_EPS

    def holds(self, world: WorldState) -> bool:
        if self.kind == "at_pose":
            record = world.objects.get(self.label)
            if record is None or self.pose is None:
                return False
            return position_distance(record.pose, self.pose) <= self.eps
        if self.kind == "absent":
            return self.label not in world.objects
        if self.kind == "held_by_operator":
            return self.label in world.delivered
        raise ScenarioError(f"unknown goal kind {self.kind!r}")

    def to_doc(self) -> dict[str, Any]:
        doc: dict[str, Any] = {"kind": self.kind, "label": self.label}
        if self.kind == "at_pose":
            doc["pose"] = list(self.pose or ())
            doc["eps"] = self.eps
        return doc

    @staticmethod
    def from_doc(doc: Mapping[str, Any]) -> "GoalPredicate":
        kind = doc.get("kind")
        if kind not in ("at_pose", "absent", "held_by_operator"):
            raise ScenarioError(f"unknown goal kind {kind!r}")
        label = doc.get("label")
        if not isinstance(label, str) or not label:
            raise ScenarioError("goal label must be a non-empty string")
        if kind == "at_pose":
            pose = _pose_from(doc.get("pose"), "goal.pose")
            eps = doc.get("eps", DEFAULT_GOAL_EPS)
            if not isinstance(eps, (int, float)) or eps <= 0:
                raise ScenarioError("goal eps must be a positive number")
            return GoalPredicate(kind=kind, label=label, pose=pose, eps=float(eps))
        return GoalPredicate(kind=kind, label=label)


@dataclass(frozen=True)
class ScriptedEvent:
    """Fires once the episode has executed ``after_step`` steps (1-based).

    Carries exactly one of a new instruction (optionally with an explicit goal
    for the new task) or a scene perturbation.
    """

    after_step: int
    new_instruction: Optional[str] = None
    goal: Optional[GoalPredicate] = None
    perturbation: Optional[Perturbation] = None

    def __post_init__(self):
        if self.after_step < 1:
            raise ScenarioError("after_step must be >= 1")
        if (self.new_instruction is None) == (self.perturbation is None):
            raise ScenarioError("scripted event needs exactly one of new_instruction or perturbation")


@dataclass(frozen=True)
class ScenarioSpec:
    id: str
    embodiment: str
    instruction: str
    objects: tuple[ObjectRecord, ...]
    base_pose: Pose
    goal: GoalPredicate
    family: str = "other"
    ee_pose: Optional[Pose] = None
    scripted_events: tuple[ScriptedEvent, ...] = ()
    jitter: float = 0.0
    observation_noise: float = 0.0
    profile: Optional[EmbodimentProfile] = None  # overrides the named built-in

    def embodiment_profile(self) -> EmbodimentProfile:
        if self.profile is not None:
            return self.profile
        return embodiment_by_name(self.embodiment)

    def with_embodiment(self, name: str) -> "ScenarioSpec":
        return replace(self, embodiment=name, profile=None)


# ---------------------------------------------------------------------------
# Parsing / validation
# ---------------------------------------------------------------------------


def _pose_from(value: Any, where: str) -> Pose:
    if not isinstance(value, (list, tuple)) or len(value) != 6:
        raise ScenarioError(f"{where}: expected a 6-component pose")
    try:
        return tuple(float(c) for c in value)  # type: ignore[return-value]
    except (TypeError, ValueError):
        raise ScenarioError(f"{where}: pose components must be numbers")


def _event_from(doc: Mapping[str, Any], where: str) -> ScriptedEvent:
    after_step = doc.get("after_step")
    if not isinstance(after_step, int) or isinstance(after_step, bool):
        raise ScenarioError(f"{where}: after_step must be an integer")
    if "new_instruction" in doc:
        text = doc["new_instruction"]
        if not isinstance(text, str) or not text:
            raise ScenarioError(f"{where}: new_instruction must be a non-empty string")
        goal = GoalPredicate.from_doc(doc["goal"]) if "goal" in doc else None
        return ScriptedEvent(after_step=after_step, new_instruction=text, goal=goal)
    if "perturbation" in doc:
        p = doc["perturbation"]
        if not isinstance(p, dict):
            raise ScenarioError(f"{where}: perturbation must be an object")
        try:
            kind = PerturbationKind(p.get("kind"))
        except ValueError:
            raise ScenarioError(f"{where}: unknown perturbation kind {p.get('kind')!r}")
        target = p.get("target")
        if not isinstance(target, str) or not target:
            raise ScenarioError(f"{where}: perturbation target must be a non-empty string")
        new_pose = None
        if kind != PerturbationKind.REMOVE_OBJECT:
            new_pose = _pose_from(p.get("new_pose"), f"{where}.perturbation.new_pose")
        return ScriptedEvent(
            after_step=after_step,
            perturbation=Perturbation(kind=kind, target=target, new_pose=new_pose),
        )
    raise ScenarioError(f"{where}: scripted event needs new_instruction or perturbation")


def parse_scenario(source: str | bytes | Mapping[str, Any]) -> ScenarioSpec:
    """Parse and validate one scenario document (JSON text or a decoded tree).

    Schema::

        { "id": str, "family": str?, "embodiment": str,
          "instruction": str,
          "robot": {"base_pose": [6], "ee_pose": [6]?},
          "objects": [{"label": str, "pose": [6], "graspable": bool?,
                       "held": bool?, "absorbs": bool?}],
          "goal": {"kind": "at_pose"|"absent"|"held_by_operator", "label": str,
                   "pose": [6]?, "eps": number?},
          "scripted_events": [{"after_step": int,
                               "new_instruction": str, "goal": {...}?}
                              | {"after_step": int, "perturbation":
                                 {"kind": str, "target": str, "new_pose": [6]?}}]?,
          "jitter": number?, "observation_noise": number? }
    """
    if isinstance(source, (str, bytes)):
        try:
            doc = json.loads(source)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"malformed scenario JSON: {exc}")
    else:
        doc = dict(source)
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be a JSON object")

    scenario_id = doc.get("id")
    if not isinstance(scenario_id, str) or not scenario_id:
        raise ScenarioError("scenario id must be a non-empty string")
    embodiment = doc.get("embodiment")
    if not isinstance(embodiment, str) or embodiment not in BUILTIN_EMBODIMENTS:
        raise ScenarioError(
            f"scenario {scenario_id!r}: embodiment must be one of {sorted(BUILTIN_EMBODIMENTS)}"
        )
    instruction = doc.get("instruction")
    if not isinstance(instruction, str) or not instruction:
        raise ScenarioError(f"scenario {scenario_id!r}: instruction must be a non-empty string")

    robot = doc.get("robot")
    if not isinstance(robot, dict):
        raise ScenarioError(f"scenario {scenario_id!r}: missing robot section")
    base_pose = _pose_from(robot.get("base_pose"), "robot.base_pose")
    ee_pose = _pose_from(robot["ee_pose"], "robot.ee_pose") if "ee_pose" in robot else None

    objects_raw = doc.get("objects")
    if not isinstance(objects_raw, list) or not objects_raw:
        raise ScenarioError(f"scenario {scenario_id!r}: objects must be a non-empty list")
    objects = []
    labels: set[str] = set()
    for i, obj in enumerate(objects_raw):
        if not isinstance(obj, dict):
            raise ScenarioError(f"objects[{i}]: must be an object")
        label = obj.get("label")
        if not isinstance(label, str) or not label:
            raise ScenarioError(f"objects[{i}]: label must be a non-empty string")
        if label in labels:
            raise ScenarioError(f"duplicate object label {label!r}")
        labels.add(label)
        record = ObjectRecord(
            label=label,
            pose=_pose_from(obj.get("pose"), f"objects[{i}].pose"),
            graspable=bool(obj.get("graspable", True)),
            held=bool(obj.get("held", False)),
            absorbs=bool(obj.get("absorbs", False)),
        )
        if record.held and not record.graspable:
            raise ScenarioError(f"object {label!r} is held but not graspable")
        objects.append(record)
    if sum(1 for o in objects if o.held) > 1:
        raise ScenarioError("at most one object may start held")

    goal_doc = doc.get("goal")
    if not isinstance(goal_doc, dict):
        raise ScenarioError(f"scenario {scenario_id!r}: missing goal")
    goal = GoalPredicate.from_doc(goal_doc)

    events = tuple(
        _event_from(e, f"scripted_events[{i}]") for i, e in enumerate(doc.get("scripted_events", []))
    )

    # Goal label must be resolvable: declared now or introduced by a scripted add.
    added = {
        e.perturbation.target
        for e in events
        if e.perturbation is not None and e.perturbation.kind == PerturbationKind.ADD_OBJECT
    }
    if goal.label not in labels | added:
        raise ScenarioError(f"goal references undeclared object {goal.label!r}")
    for event in events:
        if event.goal is not None and event.goal.label not in labels | added:
            raise ScenarioError(f"scripted goal references undeclared object {event.goal.label!r}")

    jitter = doc.get("jitter", 0.0)
    noise = doc.get("observation_noise", 0.0)
    for name, value in (("jitter", jitter), ("observation_noise", noise)):
        if not isinstance(value, (int, float)) or isinstance(value, bool) or value < 0:
            raise ScenarioError(f"{name} must be a non-negative number")

    return ScenarioSpec(
        id=scenario_id,
        family=str(doc.get("family", "other")),
        embodiment=embodiment,
        instruction=instruction,
        objects=tuple(objects),
        base_pose=base_pose,
        ee_pose=ee_pose,
        goal=goal,
        scripted_events=events,
        jitter=float(jitter),
        observation_noise=float(noise),
    )


def scenario_to_doc(scenario: ScenarioSpec) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "id": scenario.id,
        "family": scenario.family,
        "embodiment": scenario.embodiment,
        "instruction": scenario.instruction,
        "robot": {"base_pose": list(scenario.base_pose)},
        "objects": [],
        "goal": scenario.goal.to_doc(),
    }
    if scenario.ee_pose is not None:
        doc["robot"]["ee_pose"] = list(scenario.ee_pose)
    for record in scenario.objects:
        obj: dict[str, Any] = {"label": record.label, "pose": list(record.pose)}
        if not record.graspable:
            obj["graspable"] = False
        if record.held:
            obj["held"] = True
        if record.absorbs:
            obj["absorbs"] = True
        doc["objects"].append(obj)
    if scenario.scripted_events:
        events = []
        for event in scenario.scripted_events:
            if event.new_instruction is not None:
                entry: dict[str, Any] = {
                    "after_step": event.after_step,
                    "new_instruction": event.new_instruction,
                }
                if event.goal is not None:
                    entry["goal"] = event.goal.to_doc()
            else:
                p = event.perturbation
                entry = {
                    "after_step": event.after_step,
                    "perturbation": {"kind": p.kind.value, "target": p.target},
                }
                if p.new_pose is not None:
                    entry["perturbation"]["new_pose"] = list(p.new_pose)
            events.append(entry)
        doc["scripted_events"] = events
    if scenario.jitter:
        doc["jitter"] = scenario.jitter
    if scenario.observation_noise:
        doc["observation_noise"] = scenario.observation_noise
    return doc


# ---------------------------------------------------------------------------
# Built-in corpus
# ---------------------------------------------------------------------------

_ORIGIN: Pose = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


def _obj(label: str, x: float, y: float, z: float, graspable=True, absorbs=False) -> ObjectRecord:
    return ObjectRecord(label=label, pose=(x, y, z, 0.0, 0.0, 0.0), graspable=graspable, absorbs=absorbs)


def _at(label: str, x: float, y: float, z: float, eps: float = DEFAULT_GOAL_EPS) -> GoalPredicate:
    return GoalPredicate(kind="at_pose", label=label, pose=(x, y, z, 0.0, 0.0, 0.0), eps=eps)


def builtin_corpus() -> tuple[ScenarioSpec, ...]:
    """The shipped scenario battery: three per static task family plus the
    three dynamic tasks (mid-task handover change, goal change, conditional
    drawer closing). All scenes are desk scale around a robot at the origin.
    """
    quad = "quadruped_manipulator"
    scenarios = [
        # --- pick & place -------------------------------------------------
        ScenarioSpec(
            id="pnp_cup_tray",
            family="pick_place",
            embodiment=quad,
            instruction="pick up the cup and place it on the tray",
            objects=(
                _obj("cup", 0.50, 0.20, 0.42),
                _obj("tray", 0.45, -0.30, 0.40, graspable=False),
            ),
            base_pose=_ORIGIN,
            goal=_at("cup", 0.45, -0.30, 0.40),
        ),
        ScenarioSpec(
            id="pnp_book_shelf",
            family="pick_place",
            embodiment=quad,
            instruction="put the book on the shelf",
            objects=(
                _obj("book", 0.55, 0.10, 0.42),
                _obj("shelf", 0.35, -0.35, 0.50, graspable=False),
            ),
            base_pose=_ORIGIN,
            goal=_at("book", 0.35, -0.35, 0.50),
        ),
        ScenarioSpec(
            id="pnp_ball_basket",
            family="pick_place",
            embodiment=quad,
            instruction="move the ball to the basket",
            objects=(
                _obj("ball", 0.45, 0.30, 0.41),
                _obj("basket", 0.50, -0.25, 0.38, graspable=False),
            ),
            base_pose=_ORIGIN,
            goal=_at("ball", 0.50, -0.25, 0.38),
        ),
        # --- handover ------------------------------------------------------
        ScenarioSpec(
            id="handover_bottle",
            family="handover",
            embodiment=quad,
            instruction="hand me the bottle",
            objects=(
                _obj("bottle", 0.52, 0.15, 0.43),
                _obj("operator", 0.45, -0.40, 0.50, graspable=False),
            ),
            base_pose=_ORIGIN,
            goal=GoalPredicate(kind="held_by_operator", label="bottle"),
        ),
        ScenarioSpec(
            id="handover_apple",
            family="handover",
            embodiment=quad,
            instruction="give me the apple",
            objects=(
                _obj("apple", 0.48, 0.28, 0.41),
                _obj("banana", 0.58, 0.00, 0.41),
                _obj("operator", 0.45, -0.40, 0.50, graspable=False),
            ),
            base_pose=_ORIGIN,
            goal=GoalPredicate(kind="held_by_operator", label="apple"),
        ),
        ScenarioSpec(
            id="handover_remote",
            family="handover",
            embodiment=quad,
            instruction="pass me the remote",
            objects=(
                _obj("remote", 0.55, -0.05, 0.42),
                _obj("operator", 0.45, -0.40, 0.50, graspable=False),
            ),
            base_pose=_ORIGIN,
            goal=GoalPredicate(kind="held_by_operator", label="remote"),
        ),
        # --- scene interaction ---------------------------------------------
        ScenarioSpec(
            id="si_drawer_close",
            family="scene_interact",
            embodiment=quad,
            instruction="close the drawer",
            objects=(
                _obj("drawer", 0.52, 0.12, 0.45, graspable=False),
                _obj("drawer_slot", 0.30, 0.12, 0.45, graspable=False),
            ),
            base_pose=_ORIGIN,
            goal=_at("drawer", 0.30, 0.12, 0.45),
        ),
        ScenarioSpec(
            id="si_trash_disposal",
            family="scene_interact",
            embodiment=quad,
            instruction="throw away the wrapper",
            objects=(
                _obj("wrapper", 0.50, 0.22, 0.41),
                _obj("trash_bin", 0.42, -0.30, 0.40, graspable=False, absorbs=True),
            ),
            base_pose=_ORIGIN,
            goal=GoalPredicate(kind="absent", label="wrapper"),
        ),
        ScenarioSpec(
            id="si_cabinet_close",
            family="scene_interact",
            embodiment=quad,
            instruction="close the cabinet door",
            objects=(
                _obj("cabinet_door", 0.45, 0.25, 0.48, graspable=False),
                _obj("cabinet_door_slot", 0.28, 0.25, 0.48, graspable=False),
            ),
            base_pose=_ORIGIN,
            goal=_at("cabinet_door", 0.28, 0.25, 0.48),
        ),
        # --- dynamic tasks ---------------------------------------------------
        ScenarioSpec(
            id="dynamic_object_handover",
            family="dynamic",
            embodiment=quad,
            instruction="hand me the bottle",
            objects=(
                _obj("bottle", 0.52, 0.15, 0.43),
                _obj("apple", 0.48, 0.28, 0.41),
                _obj("operator", 0.45, -0.40, 0.50, graspable=False),
            ),
            base_pose=_ORIGIN,
            goal=GoalPredicate(kind="held_by_operator", label="bottle"),
            scripted_events=(
                ScriptedEvent(
                    after_step=3,
                    new_instruction="hand me the apple instead",
                    goal=GoalPredicate(kind="held_by_operator", label="apple"),
                ),
            ),
        ),
        ScenarioSpec(
            id="dynamic_goal_change",
            family="dynamic",
            embodiment=quad,
            instruction="pick up the cup and place it on the tray",
            objects=(
                _obj("cup", 0.50, 0.20, 0.42),
                _obj("tray", 0.45, -0.30, 0.40, graspable=False),
                _obj("shelf", 0.35, 0.40, 0.55, graspable=False),
                _obj("operator", 0.45, -0.40, 0.50, graspable=False),
            ),
            base_pose=_ORIGIN,
            goal=_at("cup", 0.45, -0.30, 0.40),
            scripted_events=(
                ScriptedEvent(
                    after_step=2,
                    new_instruction="put the cup on the shelf instead",
                    goal=_at("cup", 0.35, 0.40, 0.55),
                ),
            ),
        ),
        ScenarioSpec(
            id="dynamic_conditional_drawer",
            family="dynamic",
            embodiment=quad,
            instruction="close the drawer",
            objects=(
                _obj("drawer", 0.52, 0.12, 0.45, graspable=False),
                _obj("drawer_slot", 0.30, 0.12, 0.45, graspable=False),
                _obj("cloth", 0.48, 0.30, 0.41),
                _obj("operator", 0.45, -0.40, 0.50, graspable=False),
            ),
            base_pose=_ORIGIN,
            goal=_at("drawer", 0.30, 0.12, 0.45),
            scripted_events=(
                ScriptedEvent(
                    after_step=2,
                    perturbation=Perturbation(
                        kind=PerturbationKind.MOVE_OBJECT,
                        target="drawer",
                        new_pose=(0.66, 0.26, 0.45, 0.0, 0.0, 0.0),
                    ),
                ),
            ),
        ),
    ]
    return tuple(scenarios)


def static_corpus() -> tuple[ScenarioSpec, ...]:
    return tuple(s for s in builtin_corpus() if s.family != "dynamic")


def dynamic_corpus() -> tuple[ScenarioSpec, ...]:
    return tuple(s for s in builtin_corpus() if s.family == "dynamic")


def scenario_by_id(scenario_id: str, corpus: Optional[tuple[ScenarioSpec, ...]] = None) -> ScenarioSpec:
    for scenario in corpus or builtin_corpus():
        if scenario.id == scenario_id:
            return scenario
    raise KeyError(scenario_id)
