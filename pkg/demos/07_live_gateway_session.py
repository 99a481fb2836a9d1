"""Driving the gateway HTTP API: what the operator console does, scripted.

Starts an in-process gateway, launches an episode with a small step delay,
redirects it mid-flight with a new instruction, and tails the event stream.

Run:  python3 demos/07_live_gateway_session.py
"""

import json
import time

import requests

from dynaplan import ExecutorConfig, GatewayConfig, GatewayServer

config = GatewayConfig(port=0, executor=ExecutorConfig(step_delay=0.1))
with GatewayServer(config) as server:
    base = server.base_url
    print(f"gateway at {base}")

    scenarios = requests.get(f"{base}/scenarios").json()["scenarios"]
    print(f"{len(scenarios)} scenarios available; using pnp_cup_tray")

    episode = requests.post(
        f"{base}/tasks", json={"scenario_id": "pnp_cup_tray", "planner": "oracle", "seed": 0}
    ).json()
    episode_id = episode["episode_id"]
    print(f"started episode {episode_id}")

    # Wait until the cup is in the gripper, then change the task.
    while True:
        state = requests.get(f"{base}/episodes/{episode_id}/state").json()
        observation = state.get("observation") or {}
        if observation.get("robot", {}).get("holding") == "cup":
            break
        time.sleep(0.05)
    print("cup is in the gripper -> injecting 'hand it to me instead'")
    requests.post(f"{base}/episodes/{episode_id}/instruction", json={"text": "hand it to me instead"})

    # Tail the stream: full replay from tick 0, then live until the episode closes.
    stream = requests.get(f"{base}/episodes/{episode_id}/events", stream=True)
    for raw in stream.iter_lines():
        if not raw:
            continue
        event = json.loads(raw)
        kind, details = event["kind"], event["details"]
        if kind == "step_finished":
            print(f"  [{event['tick']:>2}] {details['name']} {'ok' if details['ok'] else 'FAILED'}")
        elif kind == "trigger_fired":
            print(f"  [{event['tick']:>2}] TRIGGER {details['kind']}")
        elif kind == "policy_generated":
            steps = [
                s["name"]
                for ph in json.loads(details["policy_json"])["phases"]
                for s in ph["steps"]
            ]
            print(f"  [{event['tick']:>2}] policy: {' -> '.join(steps)}")
        elif kind == "episode_closed":
            print(f"  [{event['tick']:>2}] closed: {details['status']}")

    final = requests.get(f"{base}/episodes/{episode_id}/state").json()
    print(f"final status: {final['episode']['status']}")
