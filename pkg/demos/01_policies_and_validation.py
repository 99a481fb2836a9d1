"""Behavior policies: build one by hand, round-trip it, and see the validator work.

Run:  python3 demos/01_policies_and_validation.py
"""

from dynaplan import (
    BehaviorStep,
    OnFail,
    Phase,
    Policy,
    Ref,
    StepKind,
    builtin_catalog,
    parse_policy,
    serialize_policy,
    validate_policy,
)

# A policy is named phases over strictly sequential steps. Perception steps
# publish outputs; later steps consume them through {"$ref": "<id>.<field>"}.
policy = Policy(
    task_summary="move the cup onto the tray",
    phases=(
        Phase(
            name="acquire",
            steps=(
                BehaviorStep("p1", StepKind.PERCEPTION, "locate_object", {"label": "cup"}),
                BehaviorStep("p2", StepKind.PERCEPTION, "grasp_point", {"label": "cup"}),
                BehaviorStep("a1", StepKind.ACTION, "grasp", {"pose": Ref("p2.pose")}),
                BehaviorStep("a2", StepKind.ACTION, "lift"),
            ),
        ),
        Phase(
            name="deliver",
            steps=(
                BehaviorStep("p3", StepKind.PERCEPTION, "locate_object", {"label": "tray"}),
                BehaviorStep("a3", StepKind.ACTION, "place", {"pose": Ref("p3.pose")}, OnFail.ABORT),
            ),
        ),
    ),
)

text = serialize_policy(policy)
print("canonical document:")
print(text)
print()

# Canonical serialization is a fixed point: parse -> serialize reproduces the bytes.
assert parse_policy(text) == policy
assert serialize_policy(parse_policy(text)) == text
print("round-trip: parse(serialize(p)) == p and the bytes are stable")
print()

# The validator checks a policy against a concrete primitive catalog.
catalog = builtin_catalog("quadruped_manipulator")
report = validate_policy(policy, catalog)
print(f"well-formed policy -> ok={report.ok}, issues={len(report.issues)}")

broken = parse_policy(
    """
    {"task_summary": "confused model output",
     "phases": [{"name": "main", "steps": [
        {"id": "s1", "kind": "action", "name": "fly", "params": {}},
        {"id": "s2", "kind": "action", "name": "grasp", "params": {"pose": {"$ref": "s9.pose"}}},
        {"id": "s3", "kind": "perception", "name": "grasp", "params": {}}
     ]}],
     "version": "vlp-policy/1"}
    """
)
report = validate_policy(broken, catalog)
print(f"broken policy    -> ok={report.ok}")
for issue in report.issues:
    print(f"  [{issue.severity}] {issue.code} @ {issue.step_id}: {issue.message}")

# Symbolic forward simulation catches precondition chains, e.g. a double grasp.
double_grasp = parse_policy(
    """
    {"phases": [{"name": "main", "steps": [
        {"id": "g1", "kind": "action", "name": "grasp", "params": {"pose": [0.5, 0.2, 0.4, 0, 0, 0]}},
        {"id": "g2", "kind": "action", "name": "grasp", "params": {"pose": [0.4, 0.1, 0.4, 0, 0, 0]}}
    ]}]}
    """
)
for issue in validate_policy(double_grasp, catalog).warnings:
    print(f"chain warning: {issue.code} @ {issue.step_id}: {issue.message}")
