"""Gateway HTTP API: lifecycle, mid-task injection, streaming, listings."""

import json
import threading
import time

import pytest
import requests

from dynaplan.executor import ExecutorConfig, run_episode, trace_to_lines
from dynaplan.gateway import GatewayConfig, GatewayServer
from dynaplan.planner import OraclePlanner

TIMEOUT = 10


@pytest.fixture()
def gateway():
    config = GatewayConfig(port=0, executor=ExecutorConfig(step_delay=0.0))
    with GatewayServer(config) as server:
        yield server


@pytest.fixture()
def slow_gateway():
    config = GatewayConfig(port=0, executor=ExecutorConfig(step_delay=0.15))
    with GatewayServer(config) as server:
        yield server


def _start(server, scenario_id="pnp_cup_tray", **body):
    payload = {"scenario_id": scenario_id, "planner": "oracle", "seed": 0}
    payload.update(body)
    response = requests.post(f"{server.base_url}/tasks", json=payload, timeout=TIMEOUT)
    return response


def _wait_done(server, episode_id, deadline=15.0):
    end = time.time() + deadline
    while time.time() < end:
        state = requests.get(f"{server.base_url}/episodes/{episode_id}/state", timeout=TIMEOUT).json()
        if state["episode"]["status"] in ("done_success", "done_failure"):
            return state
        time.sleep(0.02)
    raise AssertionError("episode did not finish in time")


def _stream_lines(server, episode_id):
    response = requests.get(f"{server.base_url}/episodes/{episode_id}/events", stream=True, timeout=TIMEOUT)
    assert response.status_code == 200
    assert response.headers["Content-Type"] == "application/x-ndjson"
    return [line.decode("utf-8") for line in response.iter_lines() if line]


def test_lifecycle_and_stream_replay_matches_canonical_trace(gateway):
    response = _start(gateway, seed=3)
    assert response.status_code == 202
    episode_id = response.json()["episode_id"]
    state = _wait_done(gateway, episode_id)
    assert state["episode"]["status"] == "done_success"
    assert state["episode"]["result"]["status"] == "success"
    assert state["observation"] is not None

    lines = _stream_lines(gateway, episode_id)
    # The stream is exactly the canonical trace an offline run produces.
    from dynaplan.scenarios import scenario_by_id

    offline = run_episode(
        scenario_by_id("pnp_cup_tray"), OraclePlanner(), seed=3, episode_id=episode_id
    )
    assert lines == trace_to_lines(offline.trace).splitlines()
    # Replay of a finished episode is stable.
    assert _stream_lines(gateway, episode_id) == lines
    assert json.loads(lines[-1])["kind"] == "episode_closed"


def test_unknown_scenario_404(gateway):
    assert _start(gateway, scenario_id="nope").status_code == 404


def test_unknown_episode_404(gateway):
    base = gateway.base_url
    assert requests.get(f"{base}/episodes/ep-999/state", timeout=TIMEOUT).status_code == 404
    assert requests.post(f"{base}/episodes/ep-999/instruction", json={"text": "x"}, timeout=TIMEOUT).status_code == 404


def test_concurrent_episode_limit():
    config = GatewayConfig(port=0, episode_limit=1, executor=ExecutorConfig(step_delay=0.2))
    with GatewayServer(config) as server:
        first = _start(server)
        assert first.status_code == 202
        second = _start(server)
        assert second.status_code == 409
        _wait_done(server, first.json()["episode_id"])


def test_instruction_after_done_409(gateway):
    episode_id = _start(gateway).json()["episode_id"]
    _wait_done(gateway, episode_id)
    response = requests.post(
        f"{gateway.base_url}/episodes/{episode_id}/instruction", json={"text": "hand me the cup"}, timeout=TIMEOUT
    )
    assert response.status_code == 409


def test_mid_task_instruction_injects_trigger_and_new_policy(slow_gateway):
    episode_id = _start(slow_gateway, seed=1).json()["episode_id"]
    base = slow_gateway.base_url
    # Wait until the cup is actually in the gripper, then redirect the task.
    deadline = time.time() + 15
    while time.time() < deadline:
        state = requests.get(f"{base}/episodes/{episode_id}/state", timeout=TIMEOUT).json()
        holding = (state.get("observation") or {}).get("robot", {}).get("holding")
        if holding == "cup":
            break
        assert state["episode"]["status"] not in ("done_success", "done_failure")
        time.sleep(0.02)
    else:
        raise AssertionError("never observed the cup held")
    response = requests.post(
        f"{base}/episodes/{episode_id}/instruction", json={"text": "hand it to me instead"}, timeout=TIMEOUT
    )
    assert response.status_code == 202
    state = _wait_done(slow_gateway, episode_id)
    assert state["episode"]["status"] == "done_success"
    lines = [json.loads(l) for l in _stream_lines(slow_gateway, episode_id)]
    triggers = [l for l in lines if l["kind"] == "trigger_fired"]
    assert any(t["details"]["kind"] == "new_instruction" for t in triggers)
    policies = [l for l in lines if l["kind"] == "policy_generated"]
    assert len(policies) == 2
    assert "handover" in policies[-1]["details"]["policy_json"]
    assert lines[-1]["details"]["status"] == "success"


def test_two_rapid_injections_consumed_in_order(slow_gateway):
    episode_id = _start(slow_gateway, scenario_id="handover_apple", seed=1).json()["episode_id"]
    base = slow_gateway.base_url
    time.sleep(0.1)  # let the first step begin
    for text in ("give me the banana instead", "give me the apple instead"):
        response = requests.post(f"{base}/episodes/{episode_id}/instruction", json={"text": text}, timeout=TIMEOUT)
        assert response.status_code == 202
    state = _wait_done(slow_gateway, episode_id)
    assert state["episode"]["status"] == "done_success"
    lines = [json.loads(l) for l in _stream_lines(slow_gateway, episode_id)]
    injected = [
        l["details"]["text"]
        for l in lines
        if l["kind"] == "instruction_received" and l["details"]["source"] == "injected"
    ]
    assert injected == ["give me the banana instead", "give me the apple instead"]
    new_instruction_triggers = [
        l for l in lines if l["kind"] == "trigger_fired" and l["details"]["kind"] == "new_instruction"
    ]
    assert len(new_instruction_triggers) == 2


def test_perturb_endpoint_fires_state_change(slow_gateway):
    episode_id = _start(slow_gateway, seed=2).json()["episode_id"]
    base = slow_gateway.base_url
    time.sleep(0.2)
    response = requests.post(
        f"{base}/episodes/{episode_id}/perturb",
        json={"kind": "move_object", "target": "cup", "new_pose": [0.20, 0.60, 0.42, 0, 0, 0]},
        timeout=TIMEOUT,
    )
    assert response.status_code == 202
    state = _wait_done(slow_gateway, episode_id)
    lines = [json.loads(l) for l in _stream_lines(slow_gateway, episode_id)]
    kinds = [l["kind"] for l in lines]
    assert "perturbation_applied" in kinds
    if state["episode"]["status"] == "done_success":
        # Perturbation may land before grasp (tracked -> trigger) or after
        # (cup rides the gripper); the episode must succeed either way.
        assert lines[-1]["details"]["status"] == "success"


def test_perturb_validation(slow_gateway):
    episode_id = _start(slow_gateway).json()["episode_id"]
    base = slow_gateway.base_url
    bad_kind = requests.post(
        f"{base}/episodes/{episode_id}/perturb", json={"kind": "teleport", "target": "cup"}, timeout=TIMEOUT
    )
    assert bad_kind.status_code == 400
    bad_pose = requests.post(
        f"{base}/episodes/{episode_id}/perturb",
        json={"kind": "move_object", "target": "cup", "new_pose": [1, 2]},
        timeout=TIMEOUT,
    )
    assert bad_pose.status_code == 400
    _wait_done(slow_gateway, episode_id)


def test_scenarios_listing(gateway):
    doc = requests.get(f"{gateway.base_url}/scenarios", timeout=TIMEOUT).json()
    ids = [s["id"] for s in doc["scenarios"]]
    assert ids == sorted(ids)
    assert "pnp_cup_tray" in ids and "dynamic_conditional_drawer" in ids
    assert len(ids) == 12


def test_catalog_endpoint_matches_render_rules(gateway):
    doc = requests.get(f"{gateway.base_url}/catalog", timeout=TIMEOUT).json()
    names = [p["name"] for p in doc["primitives"]]
    assert names == sorted(names)
    assert "move_base" in names
    assert doc["embodiment"]["name"] == "quadruped_manipulator"
    other = requests.get(
        f"{gateway.base_url}/catalog", params={"embodiment": "mobile_single_arm"}, timeout=TIMEOUT
    ).json()
    assert other["embodiment"]["dof"] == 11
    missing = requests.get(f"{gateway.base_url}/catalog", params={"embodiment": "hexapod"}, timeout=TIMEOUT)
    assert missing.status_code == 404


def test_state_polling_never_perturbs_the_episode(gateway):
    # Episode A runs unobserved; episode B is polled heavily. Identical traces
    # (modulo the episode id in the first line) prove reads are side-effect free.
    id_a = _start(gateway, seed=6).json()["episode_id"]
    _wait_done(gateway, id_a)
    lines_a = _stream_lines(gateway, id_a)

    id_b = _start(gateway, seed=6).json()["episode_id"]
    stop = threading.Event()

    def hammer():
        while not stop.is_set():
            requests.get(f"{gateway.base_url}/episodes/{id_b}/state", timeout=TIMEOUT)

    poller = threading.Thread(target=hammer, daemon=True)
    poller.start()
    _wait_done(gateway, id_b)
    stop.set()
    poller.join(timeout=5)
    lines_b = _stream_lines(gateway, id_b)
    assert lines_a[1:] == lines_b[1:]  # first line carries the episode id


def test_custom_instruction_redefines_the_goal(gateway):
    # Starting pnp_cup_tray with a handover instruction must judge completion
    # by the handover goal, not the scenario's original placement goal.
    response = _start(gateway, instruction="hand me the cup")
    assert response.status_code == 202
    episode_id = response.json()["episode_id"]
    state = _wait_done(gateway, episode_id)
    assert state["episode"]["status"] == "done_success"
    assert "cup" in state["observation"]["delivered"]


def test_root_endpoint_lists_api(gateway):
    doc = requests.get(gateway.base_url + "/", timeout=TIMEOUT).json()
    assert doc["service"] == "dynaplan-gateway"


def test_cors_preflight(gateway):
    response = requests.options(f"{gateway.base_url}/tasks", timeout=TIMEOUT)
    assert response.status_code == 204
    assert response.headers["Access-Control-Allow-Origin"] == "*"
