"""The remote planner path, end to end against a fake served model.

A miniature chat-completions server stands in for a real serving stack. It
replays one scripted reply: a policy wrapped in prose and a code fence, the
way models actually answer. The episode runs the full loop through HTTP:
prompt assembly -> POST /v1/chat/completions -> extraction -> validation ->
execution.

Run:  python3 demos/06_remote_planner_stub.py
"""

import dataclasses
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from dynaplan import (
    PlannerRequest,
    RemoteEndpointConfig,
    RemotePlanner,
    builtin_catalog,
    new_world,
    observe,
    oracle_plan,
    render_catalog_for_prompt,
    run_episode,
    scenario_by_id,
    serialize_policy,
)

scenario = scenario_by_id("handover_bottle")

# Use the oracle to script what the "model" will answer, then wrap it in the
# kind of chatter a real model produces.
world = new_world(scenario, 0)
request = PlannerRequest(
    instruction=scenario.instruction,
    observation=observe(world),
    robot_state=dataclasses.replace(world.robot),
    catalog_text=render_catalog_for_prompt(builtin_catalog(scenario.embodiment_profile())),
    memory_digest="",
)
scripted_reply = (
    "Sure - here is a policy for that task.\n\n```json\n"
    + serialize_policy(oracle_plan(request).policy)
    + "\n```\nLet me know how it goes!"
)


class FakeModel(BaseHTTPRequestHandler):
    def log_message(self, *args):
        pass

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        print(f"[fake model] {self.path} model={body['model']} messages={len(body['messages'])}")
        payload = json.dumps(
            {"choices": [{"message": {"role": "assistant", "content": scripted_reply}}]}
        ).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)


server = ThreadingHTTPServer(("127.0.0.1", 0), FakeModel)
threading.Thread(target=server.serve_forever, daemon=True).start()
host, port = server.server_address[:2]

planner = RemotePlanner(
    RemoteEndpointConfig(base_url=f"http://{host}:{port}", model_name="demo-model", timeout=5.0)
)
result = run_episode(scenario, planner, seed=0)
server.shutdown()

print()
print(f"status={result.status} steps={result.steps_executed} backend episodes ran over HTTP")
print(f"delivered: {sorted(result.final_world.delivered)}")
