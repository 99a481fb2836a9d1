// Console session state: a pure fold over the canonical event stream.
//
// The UI never invents episode semantics: everything it shows derives from
// gateway events, applied strictly in stream order. On reconnect the stream
// replays from tick 0, so the session is rebuilt from scratch (see
// resetSession), which makes rendering lossless by construction.

import type { PolicyDoc, TraceEvent } from './types.js';

export type StepStatus = 'pending' | 'running' | 'ok' | 'failed';

export interface TriggerMark {
  kind: string; // new_instruction | task_state_changed
  payload: string;
  tick: number;
}

export interface PolicyVersion {
  index: number;
  digest: string;
  doc: PolicyDoc;
  backend: string;
  /** Set when a later trigger abandoned this policy's remaining steps. */
  superseded: boolean;
  supersededBy: TriggerMark | null;
  stepStatus: Record<string, StepStatus>;
}

export interface TimelineEntry {
  tick: number;
  kind: string;
  summary: string;
}

export interface SessionState {
  episodeId: string | null;
  scenarioId: string | null;
  instruction: string | null;
  status: string; // planning | executing | replanning | done_success | done_failure
  policies: PolicyVersion[];
  cursor: string | null;
  replans: number;
  stepsExecuted: number;
  triggers: TriggerMark[];
  timeline: TimelineEntry[];
  failureClass: string | null;
  closed: boolean;
  eventCount: number;
  lastTick: number;
}

export function newSession(): SessionState {
  return {
    episodeId: null,
    scenarioId: null,
    instruction: null,
    status: 'planning',
    policies: [],
    cursor: null,
    replans: 0,
    stepsExecuted: 0,
    triggers: [],
    timeline: [],
    failureClass: null,
    closed: false,
    eventCount: 0,
    lastTick: 0,
  };
}

/** Reconnects replay the full trace, so the reducer always restarts clean. */
export function resetSession(): SessionState {
  return newSession();
}

function currentPolicy(state: SessionState): PolicyVersion | null {
  return state.policies.length > 0 ? state.policies[state.policies.length - 1]! : null;
}

function summarize(event: TraceEvent): string {
  const d = event.details;
  switch (event.kind) {
    case 'episode_started':
      return `episode ${d['episode_id']} on ${d['scenario_id']} (${d['embodiment']})`;
    case 'instruction_received':
      return `${d['source']} instruction: "${d['text']}"`;
    case 'planner_queried':
      return `asking planner (${d['backend']})`;
    case 'planner_unavailable':
      return `planner unreachable: ${d['error']}`;
    case 'policy_generated':
      return `policy ${d['digest']} ready`;
    case 'policy_rejected':
      return `policy rejected: ${d['reason']}`;
    case 'reference_unresolved':
      return `broken parameter reference at ${d['step_id']}`;
    case 'step_started':
      return `step ${d['step_id']}: ${d['name']}`;
    case 'step_finished':
      return d['ok']
        ? `step ${d['step_id']} ok`
        : `step ${d['step_id']} FAILED (${d['reason'] ?? 'unknown'})`;
    case 'trigger_fired':
      return `TRIGGER ${d['kind']}: ${d['payload']}`;
    case 'perturbation_applied':
      return `scene change: ${d['kind']} ${d['target']}`;
    case 'perturbation_failed':
      return `scene change rejected: ${d['error']}`;
    case 'goal_reached':
      return 'goal reached';
    case 'replan_budget_exhausted':
      return `replan budget exhausted (${d['budget']})`;
    case 'episode_closed':
      return d['status'] === 'success'
        ? 'episode closed: success'
        : `episode closed: failure (${d['failure_class']})`;
    case 'episode_crashed':
      return `runtime crashed: ${d['error']}`;
    default:
      return event.kind;
  }
}

/** Fold one canonical event into the session. Returns the same (mutated) state. */
export function applyEvent(state: SessionState, event: TraceEvent): SessionState {
  state.eventCount += 1;
  state.lastTick = event.tick;
  state.timeline.push({ tick: event.tick, kind: event.kind, summary: summarize(event) });

  const d = event.details;
  switch (event.kind) {
    case 'episode_started': {
      state.episodeId = String(d['episode_id']);
      state.scenarioId = String(d['scenario_id']);
      state.status = 'planning';
      break;
    }
    case 'instruction_received': {
      state.instruction = String(d['text']);
      break;
    }
    case 'planner_queried': {
      state.status = Number(d['replans'] ?? 0) > 0 ? 'replanning' : 'planning';
      break;
    }
    case 'policy_generated': {
      const doc = JSON.parse(String(d['policy_json'])) as PolicyDoc;
      const stepStatus: Record<string, StepStatus> = {};
      for (const phase of doc.phases) {
        for (const step of phase.steps) stepStatus[step.id] = 'pending';
      }
      state.policies.push({
        index: state.policies.length,
        digest: String(d['digest']),
        doc,
        backend: String(d['backend'] ?? ''),
        superseded: false,
        supersededBy: null,
        stepStatus,
      });
      state.status = 'executing';
      state.cursor = null;
      break;
    }
    case 'step_started': {
      const policy = currentPolicy(state);
      const stepId = String(d['step_id']);
      if (policy) policy.stepStatus[stepId] = 'running';
      state.cursor = stepId;
      state.status = 'executing';
      break;
    }
    case 'step_finished': {
      const policy = currentPolicy(state);
      const stepId = String(d['step_id']);
      if (policy) policy.stepStatus[stepId] = d['ok'] ? 'ok' : 'failed';
      state.stepsExecuted += 1;
      break;
    }
    case 'trigger_fired': {
      const mark: TriggerMark = {
        kind: String(d['kind']),
        payload: String(d['payload'] ?? ''),
        tick: event.tick,
      };
      state.triggers.push(mark);
      state.replans += 1;
      const policy = currentPolicy(state);
      if (policy) {
        policy.superseded = true;
        policy.supersededBy = mark;
      }
      state.status = 'replanning';
      break;
    }
    case 'episode_closed': {
      state.closed = true;
      state.status = d['status'] === 'success' ? 'done_success' : 'done_failure';
      state.failureClass = (d['failure_class'] as string | null) ?? null;
      state.replans = Number(d['replans'] ?? state.replans);
      break;
    }
    default:
      break;
  }
  return state;
}

export function applyLine(state: SessionState, line: string): SessionState {
  return applyEvent(state, JSON.parse(line) as TraceEvent);
}

/** Step names of a policy in execution order (handy for tests and summaries). */
export function policyStepNames(policy: PolicyVersion): string[] {
  return policy.doc.phases.flatMap((phase) => phase.steps.map((step) => step.name));
}
