"""HTTP service surface for live episodes.

Endpoints (JSON in/out, CORS open, no auth; operator tooling only):

- ``POST /tasks`` ``{scenario_id, instruction?, planner?, seed?}`` -> 202
  ``{episode_id}``; 404 unknown scenario, 409 at the concurrent-episode limit.
- ``POST /episodes/{id}/instruction`` ``{text}`` -> 202; consumed at the next
  step boundary as a new-instruction trigger. 409 once the episode is done.
- ``POST /episodes/{id}/perturb`` ``{kind, target, new_pose?}`` -> 202.
- ``GET /episodes/{id}/state`` -> episode handle + latest observation.
- ``GET /episodes/{id}/events`` -> line-delimited JSON stream: full replay
  from tick 0, then live follow until the episode closes.
- ``GET /scenarios``, ``GET /catalog?embodiment=`` -> listings.

All episode mutations funnel through the episode's inbox; stream readers never
block the control loop.
"""

from __future__ import annotations

import dataclasses
import json
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any, Iterator, Mapping, Optional
from urllib.parse import parse_qs, urlparse

from .executor import EpisodeEvent, EpisodeInbox, EpisodeResult, ExecutorConfig, event_to_line, run_episode
from .planner import OraclePlanner, RemoteEndpointConfig, RemotePlanner, infer_goal
from .primitives import (
    BUILTIN_EMBODIMENTS,
    PrimitiveCatalog,
    UnknownEmbodiment,
    builtin_catalog,
    embodiment_by_name,
)
from .scenarios import ScenarioSpec, builtin_corpus
from .world import Observation, Perturbation, PerturbationKind, new_world, observe

DONE_STATES = ("done_success", "done_failure")


@dataclass
class GatewayConfig:
    host: str = "127.0.0.1"
    port: int = 8089
    episode_limit: int = 4
    default_embodiment: str = "quadruped_manipulator"
    remote: Optional[RemoteEndpointConfig] = None
    executor: ExecutorConfig = field(default_factory=ExecutorConfig)
    extra_scenarios: tuple[ScenarioSpec, ...] = ()


def observation_to_doc(observation: Observation) -> dict[str, Any]:
    return {
        "tick": observation.tick,
        "objects": {
            label: {
                "pose": [round(c, 6) for c in record.pose],
                "graspable": record.graspable,
            }
            for label, record in sorted(observation.objects.items())
        },
        "robot": {
            "base_pose": [round(c, 6) for c in observation.robot.base_pose],
            "ee_pose": [round(c, 6) for c in observation.robot.ee_pose],
            "gripper_open": observation.robot.gripper_open,
            "holding": observation.robot.gripper_holding,
        },
        "delivered": list(observation.delivered),
    }


def catalog_to_doc(catalog: PrimitiveCatalog) -> dict[str, Any]:
    emb = catalog.embodiment
    return {
        "embodiment": {
            "name": emb.name,
            "dof": emb.dof,
            "reach_radius": emb.reach_radius,
            "gripper": emb.gripper.value,
            "base_mobile": emb.base_mobile,
            "camera_mount": emb.camera_mount.value,
        },
        "primitives": [
            {
                "name": spec.name,
                "kind": spec.kind.value,
                "params": [
                    {"name": p.name, "type": p.type, "required": p.required} for p in spec.params
                ],
                "preconditions": list(spec.preconditions),
                "postconditions": list(spec.postconditions),
                "outputs": {k: v for k, v in sorted(spec.outputs.items())},
                "description": spec.description,
            }
            for name, spec in sorted(catalog.primitives.items())
        ],
    }


class EpisodeRuntime:
    """Thread-safe projection of one running episode for HTTP clients."""

    def __init__(self, episode_id: str, scenario: ScenarioSpec, planner_name: str):
        self.id = episode_id
        self.scenario = scenario
        self.planner_name = planner_name
        self.inbox = EpisodeInbox()
        self._cond = threading.Condition()
        self._lines: list[str] = []
        self.status = "planning"
        self.policy_digest: Optional[str] = None
        self.step_cursor: Optional[str] = None
        self.replans = 0
        self.steps_executed = 0
        self.latest_observation: Optional[dict[str, Any]] = None
        self.result: Optional[EpisodeResult] = None
        self.done = False

    # -- called from the episode thread -------------------------------------

    def sink(self, event: EpisodeEvent) -> None:
        with self._cond:
            self._lines.append(event_to_line(event))
            self._project(event)
            self._cond.notify_all()

    def observe_hook(self, observation: Observation) -> None:
        doc = observation_to_doc(observation)
        with self._cond:
            self.latest_observation = doc

    def finish(self, result: Optional[EpisodeResult], error: Optional[str] = None) -> None:
        with self._cond:
            if error is not None:
                self._lines.append(
                    json.dumps(
                        {"tick": -1, "kind": "episode_crashed", "details": {"error": error}},
                        separators=(",", ":"),
                    )
                )
                self.status = "done_failure"
            self.result = result
            self.done = True
            self._cond.notify_all()

    def _project(self, event: EpisodeEvent) -> None:
        kind = event.kind
        if kind == "planner_queried":
            self.status = "replanning" if event.details.get("replans", 0) else "planning"
        elif kind == "policy_generated":
            self.status = "executing"
            self.policy_digest = event.details.get("digest")
        elif kind == "step_started":
            self.status = "executing"
            self.step_cursor = event.details.get("step_id")
        elif kind == "step_finished":
            self.steps_executed += 1
        elif kind == "trigger_fired":
            self.status = "replanning"
            self.replans += 1
        elif kind == "episode_closed":
            self.status = "done_success" if event.details.get("status") == "success" else "done_failure"

    # -- called from request handlers ---------------------------------------

    def handle_doc(self) -> dict[str, Any]:
        with self._cond:
            result_doc = None
            if self.result is not None:
                result_doc = {
                    "status": self.result.status,
                    "failure_class": self.result.failure_class,
                    "replans": self.result.replans,
                    "steps_executed": self.result.steps_executed,
                }
            return {
                "id": self.id,
                "scenario_id": self.scenario.id,
                "planner": self.planner_name,
                "status": self.status,
                "policy_digest": self.policy_digest,
                "step_cursor": self.step_cursor,
                "replans": self.replans,
                "steps_executed": self.steps_executed,
                "result": result_doc,
            }

    def observation_doc(self) -> Optional[dict[str, Any]]:
        with self._cond:
            return self.latest_observation

    def is_done(self) -> bool:
        with self._cond:
            return self.done

    def stream_lines(self, poll_timeout: float = 0.25) -> Iterator[str]:
        """Replay every recorded event line, then follow live until done."""
        index = 0
        while True:
            with self._cond:
                while index >= len(self._lines) and not self.done:
                    self._cond.wait(timeout=poll_timeout)
                chunk = self._lines[index:]
                index = len(self._lines)
                done = self.done and index >= len(self._lines)
            yield from chunk
            if done:
                return


class EpisodeManager:
    def __init__(self, config: GatewayConfig):
        self.config = config
        self._lock = threading.Lock()
        self._episodes: dict[str, EpisodeRuntime] = {}
        self._next_id = 0
        corpus = list(builtin_corpus()) + list(config.extra_scenarios)
        self.scenarios: dict[str, ScenarioSpec] = {s.id: s for s in corpus}

    def _running_count(self) -> int:
        return sum(1 for rt in self._episodes.values() if not rt.is_done())

    def get(self, episode_id: str) -> Optional[EpisodeRuntime]:
        with self._lock:
            return self._episodes.get(episode_id)

    def start(
        self, scenario_id: str, instruction: Optional[str], planner_name: str, seed: int
    ) -> EpisodeRuntime:
        scenario = self.scenarios.get(scenario_id)
        if scenario is None:
            raise KeyError(scenario_id)
        if planner_name == "remote":
            if self.config.remote is None:
                raise ValueError("remote planner is not configured on this gateway")
            planner = RemotePlanner(self.config.remote)
        elif planner_name == "oracle":
            planner = OraclePlanner()
        else:
            raise ValueError(f"unknown planner {planner_name!r}")
        if instruction and instruction != scenario.instruction:
            # A custom instruction redefines the task, so the completion judge
            # must follow it; fall back to the scenario goal when the
            # instruction is out of grammar.
            world = new_world(scenario, seed)
            goal = infer_goal(instruction, observe(world), world.robot) or scenario.goal
            scenario = dataclasses.replace(scenario, instruction=instruction, goal=goal)

        with self._lock:
            if self._running_count() >= self.config.episode_limit:
                raise RuntimeError("concurrent episode limit reached")
            self._next_id += 1
            episode_id = f"ep-{self._next_id}"
            runtime = EpisodeRuntime(episode_id, scenario, planner_name)
            self._episodes[episode_id] = runtime

        def target():
            try:
                result = run_episode(
                    scenario,
                    planner,
                    inbox=runtime.inbox,
                    seed=seed,
                    config=self.config.executor,
                    event_sink=runtime.sink,
                    observation_hook=runtime.observe_hook,
                    episode_id=episode_id,
                )
                runtime.finish(result)
            except Exception as exc:  # defensive: surface crashes to clients
                runtime.finish(None, error=f"{type(exc).__name__}: {exc}")

        thread = threading.Thread(target=target, name=f"episode-{episode_id}", daemon=True)
        thread.start()
        return runtime


class _Handler(BaseHTTPRequestHandler):
    manager: EpisodeManager  # injected by GatewayServer
    protocol_version = "HTTP/1.1"

    # -- plumbing ------------------------------------------------------------

    def log_message(self, format: str, *args: Any) -> None:  # quiet by default
        pass

    def _cors(self) -> None:
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")

    def _json(self, status: int, doc: Mapping[str, Any]) -> None:
        body = json.dumps(doc).encode("utf-8")
        self.send_response(status)
        self._cors()
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _error(self, status: int, message: str) -> None:
        self._json(status, {"error": message})

    def _body(self) -> dict[str, Any]:
        length = int(self.headers.get("Content-Length") or 0)
        if length == 0:
            return {}
        raw = self.rfile.read(length)
        try:
            doc = json.loads(raw)
        except json.JSONDecodeError:
            raise ValueError("request body is not valid JSON")
        if not isinstance(doc, dict):
            raise ValueError("request body must be a JSON object")
        return doc

    # -- routing ---------------------------------------------------------------

    def do_OPTIONS(self) -> None:  # CORS preflight
        self.send_response(204)
        self._cors()
        self.send_header("Content-Length", "0")
        self.end_headers()

    def do_GET(self) -> None:
        url = urlparse(self.path)
        parts = [p for p in url.path.split("/") if p]
        try:
            if not parts:
                self._json(
                    200,
                    {
                        "service": "dynaplan-gateway",
                        "endpoints": [
                            "POST /tasks",
                            "POST /episodes/{id}/instruction",
                            "POST /episodes/{id}/perturb",
                            "GET /episodes/{id}/state",
                            "GET /episodes/{id}/events",
                            "GET /scenarios",
                            "GET /catalog",
                        ],
                    },
                )
            elif parts == ["scenarios"]:
                self._scenarios()
            elif parts == ["catalog"]:
                self._catalog(parse_qs(url.query))
            elif len(parts) == 3 and parts[0] == "episodes" and parts[2] == "state":
                self._state(parts[1])
            elif len(parts) == 3 and parts[0] == "episodes" and parts[2] == "events":
                self._events(parts[1])
            else:
                self._error(404, "no such endpoint")
        except BrokenPipeError:
            pass

    def do_POST(self) -> None:
        url = urlparse(self.path)
        parts = [p for p in url.path.split("/") if p]
        try:
            if parts == ["tasks"]:
                self._start_task()
            elif len(parts) == 3 and parts[0] == "episodes" and parts[2] == "instruction":
                self._instruction(parts[1])
            elif len(parts) == 3 and parts[0] == "episodes" and parts[2] == "perturb":
                self._perturb(parts[1])
            else:
                self._error(404, "no such endpoint")
        except ValueError as exc:
            self._error(400, str(exc))
        except BrokenPipeError:
            pass

    # -- endpoints -------------------------------------------------------------

    def _scenarios(self) -> None:
        scenarios = [
            {
                "id": s.id,
                "family": s.family,
                "embodiment": s.embodiment,
                "instruction": s.instruction,
                "objects": sorted(o.label for o in s.objects),
                "has_scripted_events": bool(s.scripted_events),
            }
            for s in sorted(self.manager.scenarios.values(), key=lambda s: s.id)
        ]
        self._json(200, {"scenarios": scenarios})

    def _catalog(self, query: Mapping[str, list[str]]) -> None:
        name = query.get("embodiment", [self.manager.config.default_embodiment])[0]
        try:
            catalog = builtin_catalog(embodiment_by_name(name))
        except UnknownEmbodiment:
            self._error(404, f"unknown embodiment {name!r}; built-ins: {sorted(BUILTIN_EMBODIMENTS)}")
            return
        self._json(200, catalog_to_doc(catalog))

    def _start_task(self) -> None:
        body = self._body()
        scenario_id = body.get("scenario_id")
        if not isinstance(scenario_id, str):
            raise ValueError("scenario_id is required")
        planner_name = body.get("planner", "oracle")
        seed = body.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise ValueError("seed must be an integer")
        instruction = body.get("instruction")
        try:
            runtime = self.manager.start(scenario_id, instruction, planner_name, seed)
        except KeyError:
            self._error(404, f"unknown scenario {scenario_id!r}")
            return
        except RuntimeError as exc:
            self._error(409, str(exc))
            return
        self._json(202, {"episode_id": runtime.id})

    def _find_episode(self, episode_id: str) -> Optional[EpisodeRuntime]:
        runtime = self.manager.get(episode_id)
        if runtime is None:
            self._error(404, f"unknown episode {episode_id!r}")
        return runtime

    def _instruction(self, episode_id: str) -> None:
        runtime = self._find_episode(episode_id)
        if runtime is None:
            return
        if runtime.is_done():
            self._error(409, "episode already finished")
            return
        body = self._body()
        text = body.get("text")
        if not isinstance(text, str) or not text.strip():
            raise ValueError("text is required")
        runtime.inbox.put_instruction(text.strip())
        self._json(202, {"queued": True})

    def _perturb(self, episode_id: str) -> None:
        runtime = self._find_episode(episode_id)
        if runtime is None:
            return
        if runtime.is_done():
            self._error(409, "episode already finished")
            return
        body = self._body()
        try:
            kind = PerturbationKind(body.get("kind"))
        except ValueError:
            raise ValueError(f"kind must be one of {[k.value for k in PerturbationKind]}")
        target = body.get("target")
        if not isinstance(target, str) or not target:
            raise ValueError("target is required")
        new_pose = None
        if kind != PerturbationKind.REMOVE_OBJECT:
            pose_raw = body.get("new_pose")
            if not isinstance(pose_raw, list) or len(pose_raw) != 6:
                raise ValueError("new_pose must be a 6-component pose")
            new_pose = tuple(float(c) for c in pose_raw)
        runtime.inbox.put_perturbation(Perturbation(kind=kind, target=target, new_pose=new_pose))
        self._json(202, {"queued": True})

    def _state(self, episode_id: str) -> None:
        runtime = self._find_episode(episode_id)
        if runtime is None:
            return
        self._json(200, {"episode": runtime.handle_doc(), "observation": runtime.observation_doc()})

    def _events(self, episode_id: str) -> None:
        runtime = self._find_episode(episode_id)
        if runtime is None:
            return
        self.send_response(200)
        self._cors()
        self.send_header("Content-Type", "application/x-ndjson")
        self.send_header("Cache-Control", "no-cache")
        self.send_header("Transfer-Encoding", "chunked")
        self.end_headers()
        try:
            for line in runtime.stream_lines():
                payload = line.encode("utf-8") + b"\n"
                self.wfile.write(f"{len(payload):X}\r\n".encode("ascii") + payload + b"\r\n")
                self.wfile.flush()
            self.wfile.write(b"0\r\n\r\n")
        except (BrokenPipeError, ConnectionResetError):
            pass


class GatewayServer:
    """Threaded HTTP server wrapper with a test-friendly lifecycle."""

    def __init__(self, config: Optional[GatewayConfig] = None):
        self.config = config or GatewayConfig()
        self.manager = EpisodeManager(self.config)
        handler = type("BoundHandler", (_Handler,), {"manager": self.manager})
        self._server = ThreadingHTTPServer((self.config.host, self.config.port), handler)
        self._server.daemon_threads = True
        self._thread: Optional[threading.Thread] = None

    @property
    def address(self) -> tuple[str, int]:
        return self._server.server_address[:2]

    @property
    def base_url(self) -> str:
        host, port = self.address
        return f"http://{host}:{port}"

    def start(self) -> "GatewayServer":
        self._thread = threading.Thread(target=self._server.serve_forever, name="gateway", daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def serve_forever(self) -> None:
        self._server.serve_forever()

    def __enter__(self) -> "GatewayServer":
        return self.start()

    def __exit__(self, *exc_info) -> None:
        self.stop()
