"""Mid-task replanning: a new instruction arrives while the robot is moving.

The episode executes a pick-and-place policy; after the grasp, the operator
changes their mind ("hand it to me instead"). The loop finishes the current
step, records a new-instruction trigger, regenerates the policy from the live
scene (cup already in the gripper), and completes the NEW task.

Run:  python3 demos/03_midtask_replanning.py
"""

import dataclasses
import json

from dynaplan import OraclePlanner, run_episode, scenario_by_id
from dynaplan.scenarios import ScriptedEvent

scenario = scenario_by_id("pnp_cup_tray")
redirect = ScriptedEvent(after_step=5, new_instruction="hand it to me instead")
scenario = dataclasses.replace(scenario, scripted_events=(redirect,))

result = run_episode(scenario, OraclePlanner(), seed=0)

policy_count = 0
for event in result.trace:
    if event.kind == "policy_generated":
        policy_count += 1
        policy = json.loads(event.details["policy_json"])
        names = [s["name"] for ph in policy["phases"] for s in ph["steps"]]
        print(f"policy #{policy_count}: {' -> '.join(names)}")
    elif event.kind == "step_finished":
        print(f"   step {event.details['step_id']}: {event.details['name']}")
    elif event.kind == "trigger_fired":
        print(f">> trigger: {event.details['kind']} ({event.details['payload']})")
    elif event.kind == "instruction_received" and event.details["source"] == "injected":
        print(f">> new instruction: {event.details['text']!r}")

print()
print(f"status={result.status} replans={result.replans}")
print(f"delivered to operator: {sorted(result.final_world.delivered)}")
assert result.replans == 1 and "cup" in result.final_world.delivered
