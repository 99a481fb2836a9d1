"""Behavior primitive library: embodiment profiles, typed primitive specs, catalogs.

Primitives come in two kinds. Action primitives move the robot (manipulation
targets are always Cartesian poses); perception primitives query the scene and
publish named, typed outputs that later steps consume through ``$ref``
parameters. Pre/postconditions are symbolic predicates over the world state
(``gripper_empty``, ``holding_object``); geometric feasibility (reach) is
checked by the simulator at execution time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping

from .policy import StepKind


class Gripper(str, Enum):
    CLAW = "claw"
    PARALLEL_2F = "parallel_2f"


class CameraMount(str, Enum):
    WRIST = "wrist"
    HEAD = "head"


class UnknownEmbodiment(KeyError):
    pass


@dataclass(frozen=True)
class EmbodimentProfile:
    """Robot platform metadata a catalog is instantiated for.

    ``dof`` is documentation only; the simulator works at pose level.
    """

    name: str
    dof: int
    reach_radius: float  # meters from base origin
    gripper: Gripper
    base_mobile: bool
    camera_mount: CameraMount

    def __post_init__(self):
        if self.reach_radius <= 0:
            raise ValueError("reach_radius must be positive")


#: Quadruped base with a 6-DoF arm and claw gripper (12+6 DoF, wrist camera).
QUADRUPED_MANIPULATOR = EmbodimentProfile(
    name="quadruped_manipulator",
    dof=18,
    reach_radius=0.8,
    gripper=Gripper.CLAW,
    base_mobile=True,
    camera_mount=CameraMount.WRIST,
)

#: Mobile single-arm service robot with a 2-finger gripper (11 DoF, head camera).
MOBILE_SINGLE_ARM = EmbodimentProfile(
    name="mobile_single_arm",
    dof=11,
    reach_radius=0.9,
    gripper=Gripper.PARALLEL_2F,
    base_mobile=True,
    camera_mount=CameraMount.HEAD,
)

BUILTIN_EMBODIMENTS: Mapping[str, EmbodimentProfile] = {
    QUADRUPED_MANIPULATOR.name: QUADRUPED_MANIPULATOR,
    MOBILE_SINGLE_ARM.name: MOBILE_SINGLE_ARM,
}


def embodiment_by_name(name: str) -> EmbodimentProfile:
    try:
        return BUILTIN_EMBODIMENTS[name]
    except KeyError:
        raise UnknownEmbodiment(f"unknown embodiment {name!r}; built-ins: {sorted(BUILTIN_EMBODIMENTS)}")


@dataclass(frozen=True)
class ParamSpec:
    name: str
    type: str  # "number" | "text" | "pose"
    required: bool = True


@dataclass(frozen=True)
class PrimitiveSpec:
    name: str
    kind: StepKind
    params: tuple[ParamSpec, ...] = ()
    preconditions: tuple[str, ...] = ()
    postconditions: tuple[str, ...] = ()
    description: str = ""
    #: Output field name -> type, for perception primitives ($ref targets).
    outputs: Mapping[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class PrimitiveCatalog:
    primitives: Mapping[str, PrimitiveSpec]
    embodiment: EmbodimentProfile


def _action(name, params=(), pre=(), post=(), description=""):
    return PrimitiveSpec(name, StepKind.ACTION, tuple(params), tuple(pre), tuple(post), description)


def _perception(name, params=(), outputs=(), description=""):
    return PrimitiveSpec(
        name, StepKind.PERCEPTION, tuple(params), (), (), description, outputs=dict(outputs)
    )


_POSE = lambda n: ParamSpec(n, "pose")  # noqa: E731
_TEXT = lambda n: ParamSpec(n, "text")  # noqa: E731


def builtin_catalog(embodiment: EmbodimentProfile | str) -> PrimitiveCatalog:
    """Instantiate the built-in behavior library for an embodiment.

    ``move_base`` is listed only for mobile bases; everything else is common.
    Accepts a profile or the name of a built-in profile.
    """
    if isinstance(embodiment, str):
        embodiment = embodiment_by_name(embodiment)

    specs = [
        _action("wake_up", description="power on and unfold into an operational posture"),
        _action("homing", description="return the arm to its stowed home pose"),
        _action("start_pose", description="move the arm to the pre-manipulation ready pose"),
        _action(
            "grasp",
            params=[_POSE("pose")],
            pre=["gripper_empty"],
            post=["holding_object"],
            description="close the gripper on the object at the given pose",
        ),
        _action(
            "lift",
            pre=["holding_object"],
            post=["holding_object"],
            description="raise the held object clear of its support surface",
        ),
        _action(
            "place",
            params=[_POSE("pose")],
            pre=["holding_object"],
            post=["gripper_empty"],
            description="set the held object down at the given pose and release it",
        ),
        _action(
            "handover",
            params=[_POSE("pose")],
            pre=["holding_object"],
            post=["gripper_empty"],
            description="extend the held object to the given pose and release it to the operator",
        ),
        _action("open_gripper", post=["gripper_empty"], description="open the gripper, releasing anything held"),
        _action("close_gripper", description="close the gripper without targeting an object"),
        _action(
            "push",
            params=[_POSE("pose"), _POSE("contact_pose")],
            description="push the object found at contact_pose until it rests at pose",
        ),
        _perception(
            "locate_object",
            params=[_TEXT("label")],
            outputs={"pose": "pose"},
            description="report the pose of the labeled object in the scene",
        ),
        _perception(
            "grasp_point",
            params=[_TEXT("label")],
            outputs={"pose": "pose"},
            description="report a graspable point on the labeled object",
        ),
        _perception(
            "robot_state",
            outputs={"base_pose": "pose", "ee_pose": "pose", "holding": "text"},
            description="report the robot's own base, end-effector, and gripper state",
        ),
        _perception(
            "scene_objects",
            outputs={"labels": "text"},
            description="list the labels of all visible objects",
        ),
    ]
    if embodiment.base_mobile:
        specs.append(
            _action("move_base", params=[_POSE("pose")], description="walk or drive the base to the given pose")
        )
    return PrimitiveCatalog(primitives={s.name: s for s in specs}, embodiment=embodiment)


def render_catalog_for_prompt(catalog: PrimitiveCatalog) -> str:
    """Deterministic one-line-per-primitive listing, lexicographic by name."""
    lines = [
        f"Behavior primitives for {catalog.embodiment.name} "
        f"(reach {catalog.embodiment.reach_radius:.2f} m, "
        f"{'mobile' if catalog.embodiment.base_mobile else 'fixed'} base):"
    ]
    if not catalog.primitives:
        lines.append("none")
        return "\n".join(lines)
    for name in sorted(catalog.primitives):
        spec = catalog.primitives[name]
        params = ", ".join(
            f"{p.name}: {p.type}" + ("" if p.required else "?") for p in spec.params
        )
        entry = f"- {name}({params}) [{spec.kind.value}]"
        if spec.outputs:
            outs = ", ".join(f"{k}: {v}" for k, v in sorted(spec.outputs.items()))
            entry += f" -> {{{outs}}}"
        if spec.description:
            entry += f": {spec.description}"
        if spec.preconditions:
            entry += f" (requires {', '.join(spec.preconditions)})"
        lines.append(entry)
    return "\n".join(lines)


#: Predicate name -> evaluator over a WorldState (duck-typed).
PREDICATES: Mapping[str, Callable] = {
    "gripper_empty": lambda world: world.robot.gripper_holding is None,
    "holding_object": lambda world: world.robot.gripper_holding is not None,
}


def check_preconditions(spec: PrimitiveSpec, world) -> list[str]:
    """Names of the primitive's preconditions violated in ``world`` (empty = go)."""
    violated = []
    for predicate in spec.preconditions:
        evaluator = PREDICATES.get(predicate)
        if evaluator is not None and not evaluator(world):
            violated.append(predicate)
    return violated
