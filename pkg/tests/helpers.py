"""Shared fixtures: scenario factories, a random policy generator, a scripted
chat-completions stub server, and a scripted planner backend."""

from __future__ import annotations

import json
import random
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any, Optional, Sequence

from dynaplan.planner import PlannerResponse
from dynaplan.policy import BehaviorStep, OnFail, Phase, Policy, Ref, StepKind, serialize_policy
from dynaplan.scenarios import GoalPredicate, ScenarioSpec, ScriptedEvent
from dynaplan.world import ObjectRecord

ORIGIN = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


def obj(label, x, y, z, graspable=True, absorbs=False, held=False):
    return ObjectRecord(
        label=label, pose=(x, y, z, 0.0, 0.0, 0.0), graspable=graspable, absorbs=absorbs, held=held
    )


def make_scenario(
    *,
    scenario_id="test_scene",
    instruction="pick up the cup and place it on the tray",
    objects: Optional[Sequence[ObjectRecord]] = None,
    goal: Optional[GoalPredicate] = None,
    embodiment="quadruped_manipulator",
    events: Sequence[ScriptedEvent] = (),
    jitter=0.0,
    noise=0.0,
    family="test",
) -> ScenarioSpec:
    if objects is None:
        objects = (
            obj("cup", 0.50, 0.20, 0.42),
            obj("tray", 0.45, -0.30, 0.40, graspable=False),
        )
    if goal is None:
        goal = GoalPredicate(kind="at_pose", label="cup", pose=(0.45, -0.30, 0.40, 0, 0, 0))
    return ScenarioSpec(
        id=scenario_id,
        family=family,
        embodiment=embodiment,
        instruction=instruction,
        objects=tuple(objects),
        base_pose=ORIGIN,
        goal=goal,
        scripted_events=tuple(events),
        jitter=jitter,
        observation_noise=noise,
    )


# ---------------------------------------------------------------------------
# Random policy generator (parse/serialize round-trip properties)
# ---------------------------------------------------------------------------

_WORDS = ["grasp", "lift", "place", "handover", "locate_object", "scan", "tilt", "probe", "nudge"]
_TEXTS = ["cup", "blue box", "Становище", "naïve", "du thé", "", "x" * 40, 'quo"te', "back\\slash"]


def random_policy(rng: random.Random) -> Policy:
    counter = 0
    phases = []
    for _ in range(rng.randint(0, 4)):
        steps = []
        for _ in range(rng.randint(0, 5)):
            counter += 1
            params: dict[str, Any] = {}
            for key in rng.sample(["pose", "label", "force", "count", "target"], rng.randint(0, 3)):
                choice = rng.random()
                if choice < 0.25:
                    params[key] = rng.randint(-1000, 1000)
                elif choice < 0.5:
                    params[key] = rng.uniform(-10, 10)
                elif choice < 0.7:
                    params[key] = rng.choice(_TEXTS)
                elif choice < 0.9:
                    params[key] = tuple(rng.uniform(-2, 2) for _ in range(6))
                else:
                    params[key] = Ref(f"s{rng.randint(1, max(1, counter))}.pose")
            steps.append(
                BehaviorStep(
                    id=f"s{counter}",
                    kind=rng.choice([StepKind.ACTION, StepKind.PERCEPTION]),
                    name=rng.choice(_WORDS),
                    params=params,
                    on_fail=rng.choice([OnFail.ABORT, OnFail.REPLAN]),
                )
            )
        phases.append(Phase(name=rng.choice(["prep", "do", "finish", "φάση"]), steps=tuple(steps)))
    return Policy(task_summary=rng.choice(_TEXTS), phases=tuple(phases))


# ---------------------------------------------------------------------------
# Scripted planner backend
# ---------------------------------------------------------------------------


class ScriptedPlanner:
    """Replays canned policies (or raises canned exceptions) in order; the last
    entry repeats. Entries: Policy | None | Exception."""

    name = "scripted"

    def __init__(self, *entries):
        if not entries:
            raise ValueError("need at least one entry")
        self.entries = list(entries)
        self.calls = 0

    def plan(self, request) -> PlannerResponse:
        entry = self.entries[min(self.calls, len(self.entries) - 1)]
        self.calls += 1
        if isinstance(entry, Exception):
            raise entry
        if entry is None:
            return PlannerResponse(policy=None, raw_output="no plan", latency=0.0, backend=self.name)
        return PlannerResponse(
            policy=entry, raw_output=serialize_policy(entry), latency=0.0, backend=self.name
        )


def simple_policy(*steps: BehaviorStep, summary="scripted") -> Policy:
    return Policy(task_summary=summary, phases=(Phase(name="main", steps=tuple(steps)),))


def step(step_id, name, kind=StepKind.ACTION, params=None, on_fail=OnFail.REPLAN) -> BehaviorStep:
    return BehaviorStep(id=step_id, kind=kind, name=name, params=dict(params or {}), on_fail=on_fail)


# ---------------------------------------------------------------------------
# Chat-completions stub server
# ---------------------------------------------------------------------------


class StubChatServer:
    """Scripted OpenAI-compatible endpoint.

    Behaviors are consumed in request order; the last repeats:
    ``("reply", text)`` send 200 with the text as assistant content,
    ``("status", code)`` send that HTTP status,
    ``("sleep", seconds)`` stall before replying (timeout testing).
    """

    def __init__(self, *behaviors: tuple):
        self.behaviors = list(behaviors) or [("reply", "{}")]
        self.requests: list[dict] = []
        self.hits = 0
        self._lock = threading.Lock()
        stub = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def log_message(self, *args):
                pass

            def do_POST(self):
                length = int(self.headers.get("Content-Length") or 0)
                body = json.loads(self.rfile.read(length)) if length else {}
                with stub._lock:
                    stub.requests.append({"path": self.path, "body": body})
                    behavior = stub.behaviors[min(stub.hits, len(stub.behaviors) - 1)]
                    stub.hits += 1
                kind = behavior[0]
                if kind == "sleep":
                    time.sleep(behavior[1])
                    kind, behavior = "reply", ("reply", "{}")
                if kind == "status":
                    payload = b'{"error":"scripted failure"}'
                    self.send_response(behavior[1])
                    self.send_header("Content-Type", "application/json")
                    self.send_header("Content-Length", str(len(payload)))
                    self.end_headers()
                    self.wfile.write(payload)
                    return
                doc = {"choices": [{"message": {"role": "assistant", "content": behavior[1]}}]}
                payload = json.dumps(doc).encode("utf-8")
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._server.daemon_threads = True
        # A timed-out client closes its socket; the woken handler must not spam stderr.
        self._server.handle_error = lambda *args: None
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def base_url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def __enter__(self):
        self._thread.start()
        return self

    def __exit__(self, *exc_info):
        self._server.shutdown()
        self._server.server_close()
