"""One full episode: oracle planner + kinematic simulator, step by step.

Run:  python3 demos/02_simulated_pick_and_place.py
"""

import json

from dynaplan import OraclePlanner, run_episode, scenario_by_id, event_to_line

scenario = scenario_by_id("pnp_cup_tray")
print(f"scenario : {scenario.id}")
print(f"instruction: {scenario.instruction!r}")
print(f"goal     : {scenario.goal.kind}({scenario.goal.label})")
print()

result = run_episode(scenario, OraclePlanner(), seed=0)

print("trace (canonical line-delimited JSON, same bytes the gateway streams):")
for event in result.trace:
    line = event_to_line(event)
    doc = json.loads(line)
    if doc["kind"] == "policy_generated":
        # The full policy rides inside the event; show its step names only.
        policy = json.loads(doc["details"]["policy_json"])
        names = [s["name"] for ph in policy["phases"] for s in ph["steps"]]
        print(f"  [{doc['tick']:>2}] policy_generated: {' -> '.join(names)}")
    elif doc["kind"] in ("step_started", "step_finished"):
        mark = "" if doc["kind"] == "step_started" else (" ok" if doc["details"]["ok"] else " FAILED")
        print(f"  [{doc['tick']:>2}] {doc['kind']}: {doc['details']['name']}{mark}")
    else:
        print(f"  [{doc['tick']:>2}] {doc['kind']}")

print()
print(f"status={result.status} steps={result.steps_executed} replans={result.replans}")
cup = result.final_world.objects["cup"].pose
print(f"final cup position: ({cup[0]:.3f}, {cup[1]:.3f}, {cup[2]:.3f})  (tray is at (0.45, -0.30, 0.40))")

print()
print("task memory (what a planner would see as context):")
print(result.memory.digest())
