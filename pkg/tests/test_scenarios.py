"""Scenario parsing, goal predicates, and the built-in corpus."""

import json

import pytest

from dynaplan.scenarios import (
    GoalPredicate,
    builtin_corpus,
    dynamic_corpus,
    parse_scenario,
    scenario_by_id,
    scenario_to_doc,
    static_corpus,
)
from dynaplan.world import ScenarioError, new_world

from helpers import make_scenario


def _doc(**overrides):
    doc = {
        "id": "t1",
        "family": "test",
        "embodiment": "quadruped_manipulator",
        "instruction": "pick up the cup and place it on the tray",
        "robot": {"base_pose": [0, 0, 0, 0, 0, 0]},
        "objects": [
            {"label": "cup", "pose": [0.5, 0.2, 0.42, 0, 0, 0]},
            {"label": "tray", "pose": [0.45, -0.3, 0.4, 0, 0, 0], "graspable": False},
        ],
        "goal": {"kind": "at_pose", "label": "cup", "pose": [0.45, -0.3, 0.4, 0, 0, 0], "eps": 0.05},
    }
    doc.update(overrides)
    return doc


def test_parse_scenario_round_trip():
    scenario = parse_scenario(json.dumps(_doc()))
    assert scenario.id == "t1"
    again = parse_scenario(json.dumps(scenario_to_doc(scenario)))
    assert again == scenario


def test_parse_scenario_with_events_round_trip():
    doc = _doc(
        scripted_events=[
            {"after_step": 2, "new_instruction": "hand me the cup", "goal": {"kind": "held_by_operator", "label": "cup"}},
            {"after_step": 3, "perturbation": {"kind": "move_object", "target": "cup", "new_pose": [0.2, 0.6, 0.42, 0, 0, 0]}},
        ]
    )
    scenario = parse_scenario(json.dumps(doc))
    assert len(scenario.scripted_events) == 2
    assert parse_scenario(json.dumps(scenario_to_doc(scenario))) == scenario


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d.pop("goal"),
        lambda d: d.pop("objects"),
        lambda d: d.update(embodiment="hexapod"),
        lambda d: d.update(goal={"kind": "levitating", "label": "cup"}),
        lambda d: d.update(goal={"kind": "absent", "label": "ghost"}),
        lambda d: d.update(scripted_events=[{"after_step": 0, "new_instruction": "x"}]),
        lambda d: d.update(scripted_events=[{"after_step": 1}]),
        lambda d: d.update(objects=[{"label": "cup", "pose": [0.5, 0.2, 0.42, 0, 0, 0]}] * 2),
        lambda d: d.update(objects=[{"label": "rock", "pose": [0.5, 0.2, 0.4, 0, 0, 0], "graspable": False, "held": True}, {"label": "cup", "pose": [0.4, 0.1, 0.4, 0, 0, 0]}]),
        lambda d: d.update(observation_noise=-0.1),
        lambda d: d.update(robot={}),
    ],
)
def test_parse_scenario_rejects_invalid(mutate):
    doc = _doc()
    mutate(doc)
    with pytest.raises(ScenarioError):
        parse_scenario(json.dumps(doc))


def test_goal_label_introduced_by_scripted_add_is_allowed():
    doc = _doc(
        goal={"kind": "absent", "label": "gift"},
        scripted_events=[
            {"after_step": 1, "perturbation": {"kind": "add_object", "target": "gift", "new_pose": [0.5, 0.1, 0.4, 0, 0, 0]}}
        ],
    )
    scenario = parse_scenario(json.dumps(doc))
    assert scenario.goal.label == "gift"


def test_goal_predicates_evaluate_on_ground_truth():
    world = new_world(make_scenario(), seed=0)
    at = GoalPredicate(kind="at_pose", label="cup", pose=world.objects["cup"].pose, eps=0.05)
    assert at.holds(world)
    off = GoalPredicate(kind="at_pose", label="cup", pose=(2, 2, 2, 0, 0, 0), eps=0.05)
    assert not off.holds(world)
    assert not GoalPredicate(kind="absent", label="cup").holds(world)
    assert GoalPredicate(kind="absent", label="ghost").holds(world)
    assert not GoalPredicate(kind="held_by_operator", label="cup").holds(world)
    world.delivered.add("cup")
    assert GoalPredicate(kind="held_by_operator", label="cup").holds(world)


def test_builtin_corpus_shape():
    corpus = builtin_corpus()
    assert len(corpus) == 12
    assert len({s.id for s in corpus}) == 12
    assert len(static_corpus()) == 9
    assert len(dynamic_corpus()) == 3
    families = {s.family for s in corpus}
    assert families == {"pick_place", "handover", "scene_interact", "dynamic"}
    for family in ("pick_place", "handover", "scene_interact"):
        assert sum(1 for s in corpus if s.family == family) == 3


def test_builtin_corpus_is_internally_consistent():
    for scenario in builtin_corpus():
        labels = {o.label for o in scenario.objects}
        assert scenario.goal.label in labels
        new_world(scenario, seed=0)  # must not raise
        # serializes and re-parses cleanly
        assert parse_scenario(json.dumps(scenario_to_doc(scenario))) == scenario


def test_dynamic_scenarios_carry_scripted_events():
    for scenario in dynamic_corpus():
        assert scenario.scripted_events
    handover = scenario_by_id("dynamic_object_handover")
    assert handover.scripted_events[0].new_instruction
    drawer = scenario_by_id("dynamic_conditional_drawer")
    assert drawer.scripted_events[0].perturbation is not None


def test_with_embodiment_only_changes_embodiment():
    scenario = scenario_by_id("pnp_cup_tray")
    moved = scenario.with_embodiment("mobile_single_arm")
    assert moved.embodiment == "mobile_single_arm"
    assert moved.objects == scenario.objects
    assert moved.goal == scenario.goal


def test_scenario_by_id_unknown():
    with pytest.raises(KeyError):
        scenario_by_id("nope")
