"""State-change triggers: the scene shifts under the robot mid-task.

Two dynamics are shown:

1. pick-and-place where someone slides the cup half a meter away after the
   robot has already located it (stale perception -> trigger -> replan);
2. the conditional drawer task: the drawer is yanked further open while the
   closing push is still pending, landing beyond static arm reach, so the
   replanned policy has to walk the base closer.

Run:  python3 demos/04_state_change_trigger.py
"""

import dataclasses

from dynaplan import OraclePlanner, run_episode, scenario_by_id
from dynaplan.scenarios import ScriptedEvent
from dynaplan.world import Perturbation, PerturbationKind


def show(result, title):
    print(f"--- {title}")
    for event in result.trace:
        if event.kind == "step_finished":
            print(f"   step: {event.details['name']}")
        elif event.kind == "perturbation_applied":
            print(f">> scene change: {event.details['kind']} {event.details['target']}")
        elif event.kind == "trigger_fired":
            print(f">> trigger: {event.details['kind']} ({event.details['payload']})")
    print(f"   => status={result.status} replans={result.replans}\n")


slide = ScriptedEvent(
    after_step=2,
    perturbation=Perturbation(PerturbationKind.MOVE_OBJECT, "cup", (0.20, 0.60, 0.42, 0, 0, 0)),
)
scenario = dataclasses.replace(scenario_by_id("pnp_cup_tray"), scripted_events=(slide,))
show(run_episode(scenario, OraclePlanner(), seed=0), "cup slides away mid-plan")

show(
    run_episode(scenario_by_id("dynamic_conditional_drawer"), OraclePlanner(), seed=0),
    "drawer re-opened beyond arm reach while closing it",
)
