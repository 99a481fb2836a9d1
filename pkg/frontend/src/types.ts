// Wire types for the gateway API and the canonical event stream.

export type Pose = [number, number, number, number, number, number];

export interface TraceEvent {
  tick: number;
  kind: string;
  details: Record<string, unknown>;
}

export interface PolicyStepDoc {
  id: string;
  kind: 'action' | 'perception';
  name: string;
  params: Record<string, unknown>;
  on_fail: 'abort' | 'replan';
}

export interface PolicyPhaseDoc {
  name: string;
  steps: PolicyStepDoc[];
}

export interface PolicyDoc {
  task_summary: string;
  phases: PolicyPhaseDoc[];
  version: string;
}

export interface ScenarioSummary {
  id: string;
  family: string;
  embodiment: string;
  instruction: string;
  objects: string[];
  has_scripted_events: boolean;
}

export interface EpisodeHandle {
  id: string;
  scenario_id: string;
  planner: string;
  status: string;
  policy_digest: string | null;
  step_cursor: string | null;
  replans: number;
  steps_executed: number;
  result: {
    status: string;
    failure_class: string | null;
    replans: number;
    steps_executed: number;
  } | null;
}

export interface ObservationDoc {
  tick: number;
  objects: Record<string, { pose: Pose; graspable: boolean }>;
  robot: {
    base_pose: Pose;
    ee_pose: Pose;
    gripper_open: boolean;
    holding: string | null;
  };
  delivered: string[];
}

export interface EpisodeState {
  episode: EpisodeHandle;
  observation: ObservationDoc | null;
}
