"""Deterministic pose-level world simulator.

Holds ground-truth object and robot state, executes behavior primitives with
reach and tolerance semantics, produces structured observations (with optional
Gaussian position noise), and accepts scene perturbations. There is no physics:
a grasp succeeds iff its preconditions hold, the target is within reach, and a
graspable object sits within ``GRASP_TOLERANCE`` of the commanded pose.

Determinism contract: identical (scenario, seed, step sequence, perturbation
sequence) produces identical world states, outcomes, and observations. All
randomness flows through two seeded generators (initial jitter, observation
noise) consumed in a fixed order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Iterable, Mapping, Optional, TYPE_CHECKING

import numpy as np

from .policy import BehaviorStep, Pose, Ref, StepKind
from .primitives import PrimitiveCatalog, check_preconditions

if TYPE_CHECKING:
    from .scenarios import ScenarioSpec

# Tolerances (meters). Primitives succeed or fail atomically; these constants
# pin the geometry that decides which.
EPS_PLACE = 0.02     # placement accuracy guaranteed by a successful place
EPS_REACH = 0.01     # slack added to reach_radius before declaring unreachable
GRASP_TOLERANCE = 0.05   # max distance between commanded pose and object center
ABSORB_RADIUS = 0.10     # placing within this range of an absorbing object disposes of it
LIFT_HEIGHT = 0.15
GRASP_POINT_OFFSET = 0.02  # grasp_point reports slightly above the object center

HOME_OFFSET = (0.25, 0.0, 0.50)
READY_OFFSET = (0.35, 0.0, 0.35)

FAIL_PERCEPTION = "perception"
FAIL_EXECUTION = "execution"


class ScenarioError(ValueError):
    """A scenario declaration is internally inconsistent."""


class UnknownObject(KeyError):
    pass


class DuplicateObject(ValueError):
    pass


@dataclass
class ObjectRecord:
    label: str
    pose: Pose
    graspable: bool = True
    held: bool = False
    #: Disposal sink: objects placed within ABSORB_RADIUS of this one are
    #: removed from the scene (e.g. a trash bin).
    absorbs: bool = False


@dataclass
class RobotState:
    base_pose: Pose
    ee_pose: Pose
    gripper_open: bool = True
    gripper_holding: Optional[str] = None
    embodiment: Any = None  # EmbodimentProfile


@dataclass
class WorldState:
    """Mutable ground truth, owned by exactly one episode loop at a time."""

    objects: dict[str, ObjectRecord]
    robot: RobotState
    tick: int = 0
    #: Labels handed over to the operator (they leave the scene).
    delivered: set[str] = field(default_factory=set)
    noise_sigma: float = 0.0
    rng: np.random.Generator = field(
        default_factory=np.random.default_rng, repr=False, compare=False
    )


class PerturbationKind(str, Enum):
    MOVE_OBJECT = "move_object"
    REMOVE_OBJECT = "remove_object"
    ADD_OBJECT = "add_object"


@dataclass(frozen=True)
class Perturbation:
    kind: PerturbationKind
    target: str
    new_pose: Optional[Pose] = None
    #: Tick at which a scripted driver should apply this, or "manual".
    at_tick: int | str = "manual"


@dataclass(frozen=True)
class ObservedObject:
    label: str
    pose: Pose
    graspable: bool


@dataclass(frozen=True)
class RobotView:
    base_pose: Pose
    ee_pose: Pose
    gripper_open: bool
    gripper_holding: Optional[str]


@dataclass(frozen=True)
class Observation:
    """Structured scene snapshot: the simulator's stand-in for a camera frame."""

    tick: int
    objects: Mapping[str, ObservedObject]
    robot: RobotView
    delivered: tuple[str, ...] = ()

    def pose_of(self, label: str) -> Optional[Pose]:
        record = self.objects.get(label)
        return record.pose if record else None


@dataclass(frozen=True)
class StepOutcome:
    ok: bool
    tick: int
    failure_class: Optional[str] = None  # "perception" | "execution"
    reason: Optional[str] = None
    outputs: Mapping[str, Any] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Geometry helpers
# ---------------------------------------------------------------------------


def position_distance(a: Pose, b: Pose) -> float:
    return math.dist(a[:3], b[:3])


def _translate(pose: Pose, delta: tuple[float, float, float]) -> Pose:
    return (pose[0] + delta[0], pose[1] + delta[1], pose[2] + delta[2], pose[3], pose[4], pose[5])


def _offset_from(base: Pose, offset: tuple[float, float, float]) -> Pose:
    return (base[0] + offset[0], base[1] + offset[1], base[2] + offset[2], 0.0, 0.0, 0.0)


def _is_finite_pose(pose: Iterable[float]) -> bool:
    return all(math.isfinite(c) for c in pose)


def within_reach(world: WorldState, target: Pose) -> bool:
    reach = world.robot.embodiment.reach_radius if world.robot.embodiment else math.inf
    return position_distance(world.robot.base_pose, target) <= reach + EPS_REACH


# ---------------------------------------------------------------------------
# World construction
# ---------------------------------------------------------------------------


def new_world(scenario: "ScenarioSpec", seed: int) -> WorldState:
    """Instantiate ground truth from a scenario; deterministic in (scenario, seed).

    The seed drives only the scenario-declared initial pose jitter and the
    observation noise stream; with both at zero, every seed yields the same
    world.
    """
    jitter_rng = np.random.default_rng([seed, 0])
    noise_rng = np.random.default_rng([seed, 1])

    objects: dict[str, ObjectRecord] = {}
    held_label: Optional[str] = None
    for template in scenario.objects:
        if template.label in objects:
            raise ScenarioError(f"duplicate object label {template.label!r}")
        if not _is_finite_pose(template.pose):
            raise ScenarioError(f"object {template.label!r} has a non-finite pose")
        if template.held and not template.graspable:
            raise ScenarioError(f"object {template.label!r} is held but not graspable")
        if template.held:
            if held_label is not None:
                raise ScenarioError(f"both {held_label!r} and {template.label!r} declared held")
            held_label = template.label
        pose = template.pose
        if scenario.jitter > 0 and template.graspable and not template.held:
            dx, dy = jitter_rng.normal(0.0, scenario.jitter, size=2)
            pose = (pose[0] + float(dx), pose[1] + float(dy), pose[2], pose[3], pose[4], pose[5])
        objects[template.label] = ObjectRecord(
            label=template.label,
            pose=pose,
            graspable=template.graspable,
            held=template.held,
            absorbs=template.absorbs,
        )

    base_pose = scenario.base_pose
    if not _is_finite_pose(base_pose):
        raise ScenarioError("robot base pose is non-finite")
    ee_pose = scenario.ee_pose if scenario.ee_pose is not None else _offset_from(base_pose, READY_OFFSET)
    robot = RobotState(
        base_pose=base_pose,
        ee_pose=ee_pose,
        gripper_open=held_label is None,
        gripper_holding=held_label,
        embodiment=scenario.embodiment_profile(),
    )
    if held_label is not None:
        objects[held_label].pose = ee_pose

    return WorldState(
        objects=objects,
        robot=robot,
        tick=0,
        noise_sigma=scenario.observation_noise,
        rng=noise_rng,
    )


# ---------------------------------------------------------------------------
# Observation
# ---------------------------------------------------------------------------


def _noisy_pose(world: WorldState, pose: Pose) -> Pose:
    if world.noise_sigma <= 0:
        return pose
    dx, dy, dz = world.rng.normal(0.0, world.noise_sigma, size=3)
    return (pose[0] + float(dx), pose[1] + float(dy), pose[2] + float(dz), pose[3], pose[4], pose[5])


def observe(world: WorldState) -> Observation:
    """Snapshot of the scene as the robot perceives it.

    Object positions carry the scenario-declared Gaussian noise (per axis);
    proprioception (robot state) is exact. Iteration order is sorted by label
    so the noise stream is consumed deterministically.
    """
    observed = {}
    for label in sorted(world.objects):
        record = world.objects[label]
        observed[label] = ObservedObject(
            label=label, pose=_noisy_pose(world, record.pose), graspable=record.graspable
        )
    robot = world.robot
    return Observation(
        tick=world.tick,
        objects=observed,
        robot=RobotView(
            base_pose=robot.base_pose,
            ee_pose=robot.ee_pose,
            gripper_open=robot.gripper_open,
            gripper_holding=robot.gripper_holding,
        ),
        delivered=tuple(sorted(world.delivered)),
    )


# ---------------------------------------------------------------------------
# Primitive execution
# ---------------------------------------------------------------------------


def _fail(world: WorldState, failure_class: str, reason: str) -> StepOutcome:
    world.tick += 1  # failures cost time but leave the scene untouched
    return StepOutcome(ok=False, tick=world.tick, failure_class=failure_class, reason=reason)


def _ok(world: WorldState, outputs: Optional[Mapping[str, Any]] = None) -> StepOutcome:
    world.tick += 1
    return StepOutcome(ok=True, tick=world.tick, outputs=dict(outputs or {}))


def _as_pose(value: Any) -> Optional[Pose]:
    if isinstance(value, (tuple, list)) and len(value) == 6:
        return tuple(float(c) for c in value)  # type: ignore[return-value]
    return None


def _nearest_object(world: WorldState, pose: Pose, tolerance: float, graspable_only: bool) -> Optional[ObjectRecord]:
    best = None
    best_distance = tolerance
    for label in sorted(world.objects):
        record = world.objects[label]
        if record.held:
            continue
        if graspable_only and not record.graspable:
            continue
        distance = position_distance(record.pose, pose)
        if distance <= best_distance:
            best = record
            best_distance = distance
    return best


def _release(world: WorldState) -> None:
    holding = world.robot.gripper_holding
    if holding is not None and holding in world.objects:
        world.objects[holding].held = False
    world.robot.gripper_holding = None
    world.robot.gripper_open = True


def execute_primitive(world: WorldState, step: BehaviorStep, catalog: PrimitiveCatalog) -> StepOutcome:
    """Execute one fully-resolved behavior step against ground truth.

    Failures are data, not exceptions: the outcome carries a failure class
    (perception or execution) and a reason code. On failure the world is
    unchanged except for the tick.
    """
    spec = catalog.primitives.get(step.name)
    if spec is None:
        return _fail(world, FAIL_EXECUTION, "unknown_primitive")
    if any(isinstance(v, Ref) for v in step.params.values()):
        return _fail(world, FAIL_EXECUTION, "unresolved_params")

    violated = check_preconditions(spec, world)
    if violated:
        return _fail(world, FAIL_EXECUTION, "precondition:" + ",".join(violated))

    if spec.kind == StepKind.PERCEPTION:
        return _execute_perception(world, step)
    return _execute_action(world, step, catalog)


def _execute_perception(world: WorldState, step: BehaviorStep) -> StepOutcome:
    name = step.name
    if name in ("locate_object", "grasp_point"):
        label = step.params.get("label")
        if not isinstance(label, str):
            return _fail(world, FAIL_PERCEPTION, "invalid_params")
        record = world.objects.get(label)
        if record is None:
            return _fail(world, FAIL_PERCEPTION, "object_not_found")
        pose = record.pose
        if name == "grasp_point":
            pose = _translate(pose, (0.0, 0.0, GRASP_POINT_OFFSET))
        return _ok(world, {"pose": _noisy_pose(world, pose)})
    if name == "robot_state":
        robot = world.robot
        return _ok(
            world,
            {
                "base_pose": robot.base_pose,
                "ee_pose": robot.ee_pose,
                "gripper_open": robot.gripper_open,
                "holding": robot.gripper_holding or "",
            },
        )
    if name == "scene_objects":
        return _ok(world, {"labels": sorted(world.objects)})
    return _fail(world, FAIL_PERCEPTION, "unknown_primitive")


def _execute_action(world: WorldState, step: BehaviorStep, catalog: PrimitiveCatalog) -> StepOutcome:
    name = step.name
    robot = world.robot

    if name == "wake_up":
        return _ok(world)
    if name == "homing":
        robot.ee_pose = _offset_from(robot.base_pose, HOME_OFFSET)
        _move_held_to_ee(world)
        return _ok(world)
    if name == "start_pose":
        robot.ee_pose = _offset_from(robot.base_pose, READY_OFFSET)
        _move_held_to_ee(world)
        return _ok(world)
    if name == "open_gripper":
        _release(world)
        return _ok(world)
    if name == "close_gripper":
        robot.gripper_open = False
        return _ok(world)
    if name == "move_base":
        if not catalog.embodiment.base_mobile:
            return _fail(world, FAIL_EXECUTION, "primitive_unavailable")
        target = _as_pose(step.params.get("pose"))
        if target is None:
            return _fail(world, FAIL_EXECUTION, "invalid_params")
        delta = (
            target[0] - robot.base_pose[0],
            target[1] - robot.base_pose[1],
            target[2] - robot.base_pose[2],
        )
        robot.base_pose = target
        robot.ee_pose = _translate(robot.ee_pose, delta)
        _move_held_to_ee(world)
        return _ok(world)

    if name == "grasp":
        target = _as_pose(step.params.get("pose"))
        if target is None:
            return _fail(world, FAIL_EXECUTION, "invalid_params")
        if not within_reach(world, target):
            return _fail(world, FAIL_EXECUTION, "unreachable")
        record = _nearest_object(world, target, GRASP_TOLERANCE, graspable_only=True)
        if record is None:
            return _fail(world, FAIL_EXECUTION, "nothing_at_pose")
        record.held = True
        robot.gripper_holding = record.label
        robot.gripper_open = False
        robot.ee_pose = record.pose
        return _ok(world, {"held": record.label})

    if name == "lift":
        holding = world.objects[robot.gripper_holding]
        robot.ee_pose = _translate(robot.ee_pose, (0.0, 0.0, LIFT_HEIGHT))
        holding.pose = _translate(holding.pose, (0.0, 0.0, LIFT_HEIGHT))
        return _ok(world)

    if name == "place":
        target = _as_pose(step.params.get("pose"))
        if target is None:
            return _fail(world, FAIL_EXECUTION, "invalid_params")
        if not within_reach(world, target):
            return _fail(world, FAIL_EXECUTION, "unreachable")
        held = world.objects[robot.gripper_holding]
        held.pose = target
        robot.ee_pose = target
        _release(world)
        sink = next(
            (
                world.objects[label]
                for label in sorted(world.objects)
                if world.objects[label].absorbs
                and label != held.label
                and position_distance(world.objects[label].pose, target) <= ABSORB_RADIUS
            ),
            None,
        )
        if sink is not None:
            del world.objects[held.label]
        return _ok(world, {"placed": held.label, "absorbed": sink is not None})

    if name == "handover":
        target = _as_pose(step.params.get("pose"))
        if target is None:
            return _fail(world, FAIL_EXECUTION, "invalid_params")
        if not within_reach(world, target):
            return _fail(world, FAIL_EXECUTION, "unreachable")
        held_label = robot.gripper_holding
        del world.objects[held_label]
        world.delivered.add(held_label)
        robot.gripper_holding = None
        robot.gripper_open = True
        robot.ee_pose = target
        return _ok(world, {"delivered": held_label})

    if name == "push":
        target = _as_pose(step.params.get("pose"))
        contact = _as_pose(step.params.get("contact_pose"))
        if target is None or contact is None:
            return _fail(world, FAIL_EXECUTION, "invalid_params")
        if not within_reach(world, contact) or not within_reach(world, target):
            return _fail(world, FAIL_EXECUTION, "unreachable")
        record = _nearest_object(world, contact, GRASP_TOLERANCE, graspable_only=False)
        if record is None:
            return _fail(world, FAIL_EXECUTION, "nothing_at_pose")
        record.pose = target
        robot.ee_pose = target
        return _ok(world, {"pushed": record.label})

    return _fail(world, FAIL_EXECUTION, "unknown_primitive")


def _move_held_to_ee(world: WorldState) -> None:
    holding = world.robot.gripper_holding
    if holding is not None and holding in world.objects:
        world.objects[holding].pose = world.robot.ee_pose


# ---------------------------------------------------------------------------
# Perturbations
# ---------------------------------------------------------------------------


def apply_perturbation(world: WorldState, perturbation: Perturbation) -> WorldState:
    """Apply a scripted or manual scene change; returns the same (mutated) world.

    Moving or removing a held object yanks it out of the gripper first so the
    single-holder invariant survives.
    """
    kind = PerturbationKind(perturbation.kind)
    if kind == PerturbationKind.MOVE_OBJECT:
        record = world.objects.get(perturbation.target)
        if record is None:
            raise UnknownObject(perturbation.target)
        if perturbation.new_pose is None:
            raise ValueError("move_object requires new_pose")
        if record.held:
            _release(world)
        record.pose = tuple(float(c) for c in perturbation.new_pose)  # type: ignore[assignment]
    elif kind == PerturbationKind.REMOVE_OBJECT:
        record = world.objects.get(perturbation.target)
        if record is None:
            raise UnknownObject(perturbation.target)
        if record.held:
            _release(world)
        del world.objects[perturbation.target]
    elif kind == PerturbationKind.ADD_OBJECT:
        if perturbation.target in world.objects:
            raise DuplicateObject(perturbation.target)
        if perturbation.new_pose is None:
            raise ValueError("add_object requires new_pose")
        world.objects[perturbation.target] = ObjectRecord(
            label=perturbation.target,
            pose=tuple(float(c) for c in perturbation.new_pose),  # type: ignore[arg-type]
            graspable=True,
        )
    world.tick += 1
    return world


def snapshot_world(world: WorldState) -> WorldState:
    """Deep-enough copy for safe post-episode inspection."""
    return WorldState(
        objects={label: replace(record) for label, record in world.objects.items()},
        robot=replace(world.robot),
        tick=world.tick,
        delivered=set(world.delivered),
        noise_sigma=world.noise_sigma,
        rng=world.rng,
    )
