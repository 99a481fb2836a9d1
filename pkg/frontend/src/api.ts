// Thin gateway client. The event stream is line-delimited JSON over a
// long-lived response; reconnection re-requests the stream, which replays the
// full trace from tick 0 (the caller resets its session before re-applying).

import { NdjsonSplitter } from './ndjson.js';
import type { EpisodeState, ScenarioSummary } from './types.js';

export class GatewayError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const response = await fetch(url, init);
  const body = (await response.json().catch(() => ({}))) as Record<string, unknown>;
  if (!response.ok) {
    throw new GatewayError(response.status, String(body['error'] ?? response.statusText));
  }
  return body as T;
}

export class GatewayClient {
  constructor(public baseUrl: string) {}

  listScenarios(): Promise<{ scenarios: ScenarioSummary[] }> {
    return request(`${this.baseUrl}/scenarios`);
  }

  startTask(scenarioId: string, planner: string, seed: number, instruction?: string) {
    const body: Record<string, unknown> = { scenario_id: scenarioId, planner, seed };
    if (instruction) body['instruction'] = instruction;
    return request<{ episode_id: string }>(`${this.baseUrl}/tasks`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
    });
  }

  injectInstruction(episodeId: string, text: string) {
    return request<{ queued: boolean }>(`${this.baseUrl}/episodes/${episodeId}/instruction`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ text }),
    });
  }

  injectPerturbation(episodeId: string, kind: string, target: string, newPose?: number[]) {
    const body: Record<string, unknown> = { kind, target };
    if (newPose) body['new_pose'] = newPose;
    return request<{ queued: boolean }>(`${this.baseUrl}/episodes/${episodeId}/perturb`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
    });
  }

  state(episodeId: string): Promise<EpisodeState> {
    return request(`${this.baseUrl}/episodes/${episodeId}/state`);
  }

  /**
   * Subscribe to an episode's event stream with auto-reconnect.
   *
   * `onReset` fires before the first line of every (re)connection so the
   * consumer can rebuild its session from the replayed trace, so rendering stays
   * lossless across drops. Returns a cancel function.
   */
  streamEvents(
    episodeId: string,
    handlers: {
      onReset: () => void;
      onLine: (line: string) => void;
      onEnd: () => void;
      onError: (error: unknown) => void;
    },
    maxReconnects = 20,
  ): () => void {
    let cancelled = false;
    let attempts = 0;

    const connect = async (): Promise<void> => {
      const response = await fetch(`${this.baseUrl}/episodes/${episodeId}/events`);
      if (!response.ok || response.body === null) {
        throw new GatewayError(response.status, 'stream unavailable');
      }
      handlers.onReset();
      const splitter = new NdjsonSplitter();
      const reader = response.body.getReader();
      const decoder = new TextDecoder();
      for (;;) {
        const { done, value } = await reader.read();
        if (cancelled) {
          await reader.cancel().catch(() => undefined);
          return;
        }
        if (done) break;
        for (const line of splitter.push(decoder.decode(value, { stream: true }))) {
          handlers.onLine(line);
        }
      }
      for (const line of splitter.end()) handlers.onLine(line);
      handlers.onEnd();
    };

    const run = () => {
      connect().catch((error) => {
        if (cancelled) return;
        attempts += 1;
        if (attempts > maxReconnects) {
          handlers.onError(error);
          return;
        }
        setTimeout(run, Math.min(2000, 200 * attempts));
      });
    };
    run();
    return () => {
      cancelled = true;
    };
  }
}
