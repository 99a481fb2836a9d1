"""Simulator semantics: determinism, kinematics, observation noise, perturbations."""

import random

import pytest

from dynaplan.primitives import QUADRUPED_MANIPULATOR, builtin_catalog
from dynaplan.world import (
    DuplicateObject,
    EPS_REACH,
    LIFT_HEIGHT,
    Perturbation,
    PerturbationKind,
    ScenarioError,
    UnknownObject,
    apply_perturbation,
    execute_primitive,
    new_world,
    observe,
    position_distance,
)

from helpers import make_scenario, obj, step

CATALOG = builtin_catalog(QUADRUPED_MANIPULATOR)


def _world(objects=None, noise=0.0, jitter=0.0, seed=0):
    return new_world(make_scenario(objects=objects, noise=noise, jitter=jitter), seed=seed)


def _snapshot(world):
    return (
        {label: record.pose for label, record in world.objects.items()},
        world.robot.base_pose,
        world.robot.ee_pose,
        world.robot.gripper_holding,
        tuple(sorted(world.delivered)),
    )


# ---------------------------------------------------------------------------
# Construction & determinism
# ---------------------------------------------------------------------------


def test_zero_jitter_world_is_seed_independent():
    assert _snapshot(_world(seed=1)) == _snapshot(_world(seed=999))


def test_same_scenario_and_seed_identical_world():
    a = _world(jitter=0.02, seed=42)
    b = _world(jitter=0.02, seed=42)
    assert _snapshot(a) == _snapshot(b)


def test_jitter_differs_across_seeds():
    a = _world(jitter=0.02, seed=1)
    b = _world(jitter=0.02, seed=2)
    assert _snapshot(a) != _snapshot(b)


def test_held_object_must_be_graspable():
    scenario = make_scenario(objects=(obj("rock", 0.5, 0.2, 0.4, graspable=False, held=True),))
    with pytest.raises(ScenarioError):
        new_world(scenario, seed=0)


def test_held_object_syncs_gripper():
    scenario = make_scenario(objects=(obj("cup", 0.5, 0.2, 0.42, held=True), obj("tray", 0.4, -0.3, 0.4, graspable=False)))
    world = new_world(scenario, seed=0)
    assert world.robot.gripper_holding == "cup"
    assert not world.robot.gripper_open
    assert world.objects["cup"].pose == world.robot.ee_pose


# ---------------------------------------------------------------------------
# Primitive execution
# ---------------------------------------------------------------------------


def test_grasp_within_reach_succeeds():
    world = _world()
    target = world.objects["cup"].pose
    assert position_distance(world.robot.base_pose, target) <= CATALOG.embodiment.reach_radius
    outcome = execute_primitive(world, step("s1", "grasp", params={"pose": target}), CATALOG)
    assert outcome.ok
    assert world.robot.gripper_holding == "cup"
    assert world.objects["cup"].held


def test_grasp_beyond_reach_fails_execution():
    world = _world(objects=(obj("far_cup", 2.0, 0.0, 0.4), obj("tray", 0.4, -0.3, 0.4, graspable=False)))
    target = world.objects["far_cup"].pose
    assert position_distance(world.robot.base_pose, target) > CATALOG.embodiment.reach_radius + EPS_REACH
    outcome = execute_primitive(world, step("s1", "grasp", params={"pose": target}), CATALOG)
    assert not outcome.ok
    assert outcome.failure_class == "execution"
    assert outcome.reason == "unreachable"
    assert not world.objects["far_cup"].held  # world unchanged except tick


def test_grasp_with_nothing_at_pose():
    world = _world()
    outcome = execute_primitive(world, step("s1", "grasp", params={"pose": (0.3, -0.1, 0.42, 0, 0, 0)}), CATALOG)
    assert not outcome.ok and outcome.reason == "nothing_at_pose"


def test_grasp_while_holding_fails_precondition():
    world = _world()
    execute_primitive(world, step("s1", "grasp", params={"pose": world.objects["cup"].pose}), CATALOG)
    outcome = execute_primitive(world, step("s2", "grasp", params={"pose": world.objects["tray"].pose}), CATALOG)
    assert not outcome.ok and outcome.reason == "precondition:gripper_empty"


def test_lift_raises_held_object():
    world = _world()
    execute_primitive(world, step("s1", "grasp", params={"pose": world.objects["cup"].pose}), CATALOG)
    before = world.objects["cup"].pose
    outcome = execute_primitive(world, step("s2", "lift"), CATALOG)
    assert outcome.ok
    assert world.objects["cup"].pose[2] == pytest.approx(before[2] + LIFT_HEIGHT)


def test_place_sets_object_down_and_empties_gripper():
    world = _world()
    execute_primitive(world, step("s1", "grasp", params={"pose": world.objects["cup"].pose}), CATALOG)
    target = (0.45, -0.30, 0.40, 0.0, 0.0, 0.0)
    outcome = execute_primitive(world, step("s2", "place", params={"pose": target}), CATALOG)
    assert outcome.ok and outcome.outputs["placed"] == "cup"
    assert world.objects["cup"].pose == target
    assert world.robot.gripper_holding is None and world.robot.gripper_open


def test_place_into_absorbing_sink_disposes_object():
    world = _world(objects=(obj("wrapper", 0.5, 0.2, 0.41), obj("bin", 0.42, -0.3, 0.40, graspable=False, absorbs=True)))
    execute_primitive(world, step("s1", "grasp", params={"pose": world.objects["wrapper"].pose}), CATALOG)
    outcome = execute_primitive(world, step("s2", "place", params={"pose": (0.42, -0.30, 0.42, 0, 0, 0)}), CATALOG)
    assert outcome.ok and outcome.outputs["absorbed"]
    assert "wrapper" not in world.objects


def test_handover_delivers_to_operator():
    world = _world()
    execute_primitive(world, step("s1", "grasp", params={"pose": world.objects["cup"].pose}), CATALOG)
    outcome = execute_primitive(world, step("s2", "handover", params={"pose": (0.45, -0.40, 0.50, 0, 0, 0)}), CATALOG)
    assert outcome.ok and outcome.outputs["delivered"] == "cup"
    assert "cup" not in world.objects
    assert "cup" in world.delivered


def test_open_gripper_releases():
    world = _world()
    execute_primitive(world, step("s1", "grasp", params={"pose": world.objects["cup"].pose}), CATALOG)
    execute_primitive(world, step("s2", "open_gripper"), CATALOG)
    assert world.robot.gripper_holding is None
    assert not world.objects["cup"].held


def test_push_moves_contacted_object():
    world = _world(objects=(obj("drawer", 0.52, 0.12, 0.45, graspable=False), obj("slot", 0.30, 0.12, 0.45, graspable=False)))
    outcome = execute_primitive(
        world,
        step("s1", "push", params={"pose": (0.30, 0.12, 0.45, 0, 0, 0), "contact_pose": (0.52, 0.12, 0.45, 0, 0, 0)}),
        CATALOG,
    )
    assert outcome.ok and outcome.outputs["pushed"] == "drawer"
    assert world.objects["drawer"].pose == (0.30, 0.12, 0.45, 0.0, 0.0, 0.0)


def test_move_base_translates_robot_and_held_object():
    world = _world()
    execute_primitive(world, step("s1", "grasp", params={"pose": world.objects["cup"].pose}), CATALOG)
    ee_before = world.robot.ee_pose
    outcome = execute_primitive(world, step("s2", "move_base", params={"pose": (0.3, 0.3, 0.0, 0, 0, 0.5)}), CATALOG)
    assert outcome.ok
    assert world.robot.base_pose == (0.3, 0.3, 0.0, 0.0, 0.0, 0.5)
    assert world.robot.ee_pose[0] == pytest.approx(ee_before[0] + 0.3)
    assert world.objects["cup"].pose == world.robot.ee_pose


def test_tick_advances_on_failure_too():
    world = _world()
    t0 = world.tick
    execute_primitive(world, step("s1", "lift"), CATALOG)  # precondition fails
    assert world.tick == t0 + 1


# ---------------------------------------------------------------------------
# Observation
# ---------------------------------------------------------------------------


def test_observe_zero_noise_matches_ground_truth():
    world = _world()
    observation = observe(world)
    for label, record in world.objects.items():
        assert observation.objects[label].pose == record.pose


def test_observe_after_removal_drops_label():
    world = _world()
    apply_perturbation(world, Perturbation(PerturbationKind.REMOVE_OBJECT, "cup"))
    assert "cup" not in observe(world).objects


def test_observation_noise_within_4_sigma_bound():
    """Component-wise Gaussian tail check: P(|err| > 4σ) ≈ 6.3e-5 per axis, so
    at least 99.99% of 1e5 observed components must lie within 4σ of truth."""
    sigma = 0.1
    world = _world(noise=sigma, seed=123)
    truth = world.objects["cup"].pose
    draws = 0
    within = 0
    while draws < 100_000:
        observed = observe(world).objects["cup"].pose
        for axis in range(3):
            draws += 1
            if abs(observed[axis] - truth[axis]) <= 4 * sigma:
                within += 1
    assert within / draws >= 0.9999


def test_observation_noise_deterministic_per_seed():
    a = [observe(_world(noise=0.05, seed=5)).objects["cup"].pose for _ in range(1)]
    b = [observe(_world(noise=0.05, seed=5)).objects["cup"].pose for _ in range(1)]
    assert a == b


# ---------------------------------------------------------------------------
# Perturbations
# ---------------------------------------------------------------------------


def test_move_object_perturbation():
    world = _world()
    before = _snapshot(world)
    apply_perturbation(world, Perturbation(PerturbationKind.MOVE_OBJECT, "cup", (0.2, 0.6, 0.42, 0, 0, 0)))
    assert world.objects["cup"].pose == (0.2, 0.6, 0.42, 0.0, 0.0, 0.0)
    assert world.objects["tray"].pose == before[0]["tray"]  # all else unchanged


def test_remove_held_object_repairs_gripper():
    world = _world()
    execute_primitive(world, step("s1", "grasp", params={"pose": world.objects["cup"].pose}), CATALOG)
    apply_perturbation(world, Perturbation(PerturbationKind.REMOVE_OBJECT, "cup"))
    assert world.robot.gripper_holding is None
    assert world.robot.gripper_open


def test_add_duplicate_object_rejected():
    world = _world()
    with pytest.raises(DuplicateObject):
        apply_perturbation(world, Perturbation(PerturbationKind.ADD_OBJECT, "cup", (0.1, 0.1, 0.4, 0, 0, 0)))


def test_move_unknown_object_rejected():
    world = _world()
    with pytest.raises(UnknownObject):
        apply_perturbation(world, Perturbation(PerturbationKind.MOVE_OBJECT, "ghost", (0.1, 0.1, 0.4, 0, 0, 0)))


# ---------------------------------------------------------------------------
# Property sweeps
# ---------------------------------------------------------------------------


def _random_action(rng):
    name = rng.choice(["grasp", "lift", "place", "handover", "open_gripper", "close_gripper", "wake_up", "homing", "move_base", "push"])
    params = {}
    if name in ("grasp", "place", "handover", "move_base", "push"):
        params["pose"] = tuple(rng.uniform(-1.2, 1.2) for _ in range(3)) + (0.0, 0.0, 0.0)
    if name == "push":
        params["contact_pose"] = tuple(rng.uniform(-1.2, 1.2) for _ in range(3)) + (0.0, 0.0, 0.0)
    return step("sx", name, params=params)


def test_single_holder_and_reach_soundness_over_random_sequences():
    rng = random.Random(2718)
    for trial in range(60):
        world = _world(
            objects=(
                obj("cup", 0.50, 0.20, 0.42),
                obj("box", 0.55, -0.05, 0.41),
                obj("tray", 0.45, -0.30, 0.40, graspable=False),
            )
        )
        base_at_command = world.robot.base_pose
        for _ in range(25):
            action = _random_action(rng)
            base_at_command = world.robot.base_pose
            outcome = execute_primitive(world, action, CATALOG)
            held = [label for label, record in world.objects.items() if record.held]
            assert len(held) <= 1
            assert (world.robot.gripper_holding in (held[0] if held else None, None)) or held
            if held:
                assert world.robot.gripper_holding == held[0]
            else:
                assert world.robot.gripper_holding is None
            if outcome.ok and action.name in ("grasp", "place", "handover"):
                target = action.params["pose"]
                assert (
                    position_distance(base_at_command, target)
                    <= CATALOG.embodiment.reach_radius + EPS_REACH + 1e-9
                )


def test_frame_conservation_untouched_objects_never_move():
    """Objects move only via place/handover/push effects or perturbations."""
    rng = random.Random(31)
    world = _world(
        objects=(
            obj("cup", 0.50, 0.20, 0.42),
            obj("box", 0.55, -0.05, 0.41),
            obj("tray", 0.45, -0.30, 0.40, graspable=False),
        )
    )
    poses = {label: record.pose for label, record in world.objects.items()}
    for _ in range(60):
        action = _random_action(rng)
        before_holding = world.robot.gripper_holding
        outcome = execute_primitive(world, action, CATALOG)
        if not outcome.ok:
            for label, pose in poses.items():
                assert world.objects[label].pose == pose
            continue
        moved = set()
        if action.name in ("grasp",):
            moved.add(outcome.outputs.get("held"))
        if before_holding:
            moved.add(before_holding)  # may ride the arm
        if action.name == "push":
            moved.add(outcome.outputs.get("pushed"))
        if action.name == "handover":
            moved.add(outcome.outputs.get("delivered"))
        for label, pose in poses.items():
            if label in world.objects and label not in moved:
                assert world.objects[label].pose == pose, (action.name, label)
        poses = {label: record.pose for label, record in world.objects.items()}
