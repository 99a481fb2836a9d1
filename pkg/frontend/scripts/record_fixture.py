"""Record canonical gateway traces used as console test fixtures.

Run from the repository root:  python3 frontend/scripts/record_fixture.py

Produces:
- tests/fixtures/replan_trace.jsonl   pick&place redirected mid-task to a
  handover ("hand it to me instead" once the cup is held); the headline
  console flow: trigger -> struck policy -> new policy with handover.
- tests/fixtures/failure_trace.jsonl  an episode closed as failure/execution
  (abort on an unreachable grasp), for failure-badge rendering.
"""

import dataclasses
from pathlib import Path

from dynaplan import OraclePlanner, run_episode, scenario_by_id, trace_to_lines
from dynaplan.policy import OnFail, Phase, Policy, BehaviorStep, StepKind
from dynaplan.planner import PlannerResponse
from dynaplan.policy import serialize_policy
from dynaplan.scenarios import ScriptedEvent

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def record_replan() -> None:
    scenario = dataclasses.replace(
        scenario_by_id("pnp_cup_tray"),
        scripted_events=(ScriptedEvent(after_step=5, new_instruction="hand it to me instead"),),
    )
    result = run_episode(scenario, OraclePlanner(), seed=0, episode_id="ep-1")
    assert result.succeeded and result.replans == 1
    (FIXTURES / "replan_trace.jsonl").write_text(trace_to_lines(result.trace) + "\n")
    print(f"replan_trace.jsonl: {len(result.trace)} events")


class _AbortPlanner:
    name = "scripted"

    def plan(self, request):
        policy = Policy(
            task_summary="doomed reach",
            phases=(
                Phase(
                    name="main",
                    steps=(
                        BehaviorStep(
                            "s1", StepKind.ACTION, "grasp", {"pose": (5.0, 5.0, 0.4, 0.0, 0.0, 0.0)}, OnFail.ABORT
                        ),
                    ),
                ),
            ),
        )
        return PlannerResponse(policy=policy, raw_output=serialize_policy(policy), latency=0.0, backend=self.name)


def record_failure() -> None:
    result = run_episode(scenario_by_id("pnp_cup_tray"), _AbortPlanner(), seed=0, episode_id="ep-2")
    assert result.status == "failure" and result.failure_class == "execution"
    (FIXTURES / "failure_trace.jsonl").write_text(trace_to_lines(result.trace) + "\n")
    print(f"failure_trace.jsonl: {len(result.trace)} events")


if __name__ == "__main__":
    FIXTURES.mkdir(parents=True, exist_ok=True)
    record_replan()
    record_failure()
