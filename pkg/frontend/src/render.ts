// Pure HTML-string renderers. Keeping these DOM-free makes the rendering
// contract (lossless, order-preserving, struck-through superseded policies)
// testable without a browser; main.ts only assigns the strings to innerHTML.

import type { PolicyVersion, SessionState, TimelineEntry } from './session.js';

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

function renderParams(params: Record<string, unknown>): string {
  const parts = Object.entries(params).map(([key, value]) => {
    if (value !== null && typeof value === 'object' && '$ref' in (value as object)) {
      return `${key}=@${(value as { $ref: string }).$ref}`;
    }
    if (Array.isArray(value)) {
      return `${key}=[${value.map((c) => (typeof c === 'number' ? c.toFixed(2) : String(c))).join(', ')}]`;
    }
    return `${key}=${String(value)}`;
  });
  return parts.length > 0 ? escapeHtml(parts.join(' ')) : '';
}

export function renderPolicy(policy: PolicyVersion, isCurrent: boolean): string {
  const classes = ['policy'];
  if (policy.superseded) classes.push('superseded');
  if (isCurrent) classes.push('current');
  const phases = policy.doc.phases
    .map((phase) => {
      const steps = phase.steps
        .map((step) => {
          const status = policy.stepStatus[step.id] ?? 'pending';
          const params = renderParams(step.params);
          return (
            `<li class="step ${status}" data-step="${escapeHtml(step.id)}">` +
            `<span class="step-id">${escapeHtml(step.id)}</span>` +
            `<span class="step-name">${escapeHtml(step.name)}</span>` +
            `<span class="step-kind ${step.kind}">${step.kind}</span>` +
            (params ? `<span class="step-params">${params}</span>` : '') +
            `</li>`
          );
        })
        .join('');
      return `<div class="phase"><h4>${escapeHtml(phase.name)}</h4><ol>${steps}</ol></div>`;
    })
    .join('');
  const summary = escapeHtml(policy.doc.task_summary || '(no summary)');
  const header =
    `<header><span class="digest">${escapeHtml(policy.digest)}</span>` +
    `<span class="summary">${summary}</span></header>`;
  const body = `${header}${phases}`;
  const strike = policy.superseded
    ? `<del>${body}</del>` +
      `<div class="replan-marker">replanned: ${escapeHtml(policy.supersededBy?.kind ?? '')}: ` +
      `${escapeHtml(policy.supersededBy?.payload ?? '')}</div>`
    : body;
  return `<section class="${classes.join(' ')}" data-policy="${policy.index}">${strike}</section>`;
}

export function renderPolicyPanel(state: SessionState): string {
  if (state.policies.length === 0) {
    return '<p class="placeholder">no policy yet; waiting for the planner</p>';
  }
  return state.policies
    .map((policy, i) => renderPolicy(policy, i === state.policies.length - 1 && !state.closed))
    .join('');
}

export function renderTimeline(entries: TimelineEntry[]): string {
  // One <li> per event, stream order; renderers must never drop or reorder.
  return entries
    .map(
      (entry) =>
        `<li class="evt evt-${escapeHtml(entry.kind)}">` +
        `<span class="tick">${entry.tick}</span>` +
        `<span class="what">${escapeHtml(entry.summary)}</span></li>`,
    )
    .join('');
}

export function renderStatusBadge(state: SessionState): string {
  const label = state.status.replace('_', ' ');
  let html = `<span class="badge status-${escapeHtml(state.status)}">${escapeHtml(label)}</span>`;
  if (state.status === 'done_failure' && state.failureClass) {
    html += `<span class="badge failure-${escapeHtml(state.failureClass)}">${escapeHtml(
      state.failureClass,
    )} failure</span>`;
  }
  if (state.replans > 0) {
    html += `<span class="badge replans">replans: ${state.replans}</span>`;
  }
  return html;
}
