// Console wiring: forms -> gateway calls, event stream -> session -> render.

import { GatewayClient, GatewayError } from './api.js';
import { renderPolicyPanel, renderStatusBadge, renderTimeline } from './render.js';
import { drawScene } from './scene.js';
import { applyLine, newSession, resetSession, type SessionState } from './session.js';
import type { ScenarioSummary } from './types.js';

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const gatewayInput = el<HTMLInputElement>('gateway-url');
const scenarioSelect = el<HTMLSelectElement>('scenario');
const plannerSelect = el<HTMLSelectElement>('planner');
const seedInput = el<HTMLInputElement>('seed');
const startButton = el<HTMLButtonElement>('start');
const banner = el<HTMLDivElement>('banner');
const statusBadges = el<HTMLDivElement>('status-badges');
const policyPanel = el<HTMLDivElement>('policy-panel');
const timelineList = el<HTMLOListElement>('timeline');
const sceneCanvas = el<HTMLCanvasElement>('scene');
const instructionInput = el<HTMLInputElement>('instruction-text');
const instructionButton = el<HTMLButtonElement>('instruction-send');
const perturbTarget = el<HTMLInputElement>('perturb-target');
const perturbKind = el<HTMLSelectElement>('perturb-kind');
const perturbPose = el<HTMLInputElement>('perturb-pose');
const perturbButton = el<HTMLButtonElement>('perturb-send');
const connectionDot = el<HTMLSpanElement>('connection');

let client = new GatewayClient(gatewayInput.value);
let session: SessionState = newSession();
let episodeId: string | null = null;
let cancelStream: (() => void) | null = null;
let statePoll: number | null = null;

function showBanner(text: string, isError = true): void {
  banner.textContent = text;
  banner.className = isError ? 'banner error' : 'banner info';
  banner.hidden = false;
  window.setTimeout(() => {
    banner.hidden = true;
  }, 6000);
}

function render(): void {
  statusBadges.innerHTML = renderStatusBadge(session);
  policyPanel.innerHTML = renderPolicyPanel(session);
  timelineList.innerHTML = renderTimeline(session.timeline);
  timelineList.scrollTop = timelineList.scrollHeight;
  const done = session.closed;
  instructionButton.disabled = done || episodeId === null;
  perturbButton.disabled = done || episodeId === null;
  instructionButton.title = done
    ? 'the episode is finished; start a new task to steer again'
    : 'queued instructions are consumed at the next step boundary';
  perturbButton.title = instructionButton.title;
}

async function refreshScenarios(): Promise<void> {
  client = new GatewayClient(gatewayInput.value.replace(/\/+$/, ''));
  try {
    const { scenarios } = await client.listScenarios();
    scenarioSelect.innerHTML = scenarios
      .map(
        (s: ScenarioSummary) =>
          `<option value="${s.id}">${s.id}: ${s.instruction}${s.has_scripted_events ? ' [scripted]' : ''}</option>`,
      )
      .join('');
    connectionDot.className = 'dot ok';
  } catch (error) {
    connectionDot.className = 'dot bad';
    showBanner(`gateway unreachable at ${gatewayInput.value}`);
  }
}

function subscribe(id: string): void {
  cancelStream?.();
  cancelStream = client.streamEvents(id, {
    onReset: () => {
      session = resetSession();
      render();
    },
    onLine: (line) => {
      applyLine(session, line);
      render();
    },
    onEnd: () => {
      connectionDot.className = 'dot ok';
      render();
    },
    onError: () => {
      connectionDot.className = 'dot bad';
      showBanner('event stream lost and could not reconnect');
    },
  });
}

function pollState(id: string): void {
  if (statePoll !== null) window.clearInterval(statePoll);
  statePoll = window.setInterval(async () => {
    try {
      const state = await client.state(id);
      drawScene(sceneCanvas, state.observation);
      if (state.episode.result) {
        window.clearInterval(statePoll!);
        statePoll = null;
      }
    } catch {
      /* polling is best-effort; the stream carries the truth */
    }
  }, 400);
}

startButton.addEventListener('click', async () => {
  try {
    const { episode_id } = await client.startTask(
      scenarioSelect.value,
      plannerSelect.value,
      Number(seedInput.value) || 0,
    );
    episodeId = episode_id;
    showBanner(`started ${episode_id}`, false);
    subscribe(episode_id);
    pollState(episode_id);
  } catch (error) {
    if (error instanceof GatewayError) {
      showBanner(`start failed (${error.status}): ${error.message}`);
    } else {
      showBanner('start failed: gateway unreachable');
    }
  }
});

instructionButton.addEventListener('click', async () => {
  if (!episodeId || !instructionInput.value.trim()) return;
  try {
    await client.injectInstruction(episodeId, instructionInput.value.trim());
    showBanner('instruction queued; it takes effect at the next step boundary', false);
    instructionInput.value = '';
  } catch (error) {
    if (error instanceof GatewayError) showBanner(`rejected (${error.status}): ${error.message}`);
  }
});

perturbButton.addEventListener('click', async () => {
  if (!episodeId || !perturbTarget.value.trim()) return;
  let pose: number[] | undefined;
  if (perturbKind.value !== 'remove_object') {
    pose = perturbPose.value.split(',').map((c) => Number(c.trim()));
    if (pose.length !== 6 || pose.some(Number.isNaN)) {
      showBanner('pose must be six comma-separated numbers: x,y,z,roll,pitch,yaw');
      return;
    }
  }
  try {
    await client.injectPerturbation(episodeId, perturbKind.value, perturbTarget.value.trim(), pose);
    showBanner('scene perturbation queued', false);
  } catch (error) {
    if (error instanceof GatewayError) showBanner(`rejected (${error.status}): ${error.message}`);
  }
});

gatewayInput.addEventListener('change', refreshScenarios);
void refreshScenarios();
render();
drawScene(sceneCanvas, null);
