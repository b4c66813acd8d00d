/** Pure view functions: state in, HTML out.
 *
 * Follow-up questions and final recommendations are distinct components
 * (`followup-banner` vs `recommendation-card`) so a doctor can tell at a
 * glance whether the engine is asking or concluding. Missing optional
 * fields render as an em-free "—" placeholder.
 */

import type { ConsoleState } from "./store.js";
import type { Recommendation, SessionSummary, SessionView } from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;")
    .replaceAll("'", "&#39;");
}

const MISSING = "&#8212;"; // "—" for absent optional fields

export function renderHistoryPanel(sessions: SessionSummary[], activeId: string | null): string {
  if (sessions.length === 0) {
    return '<div class="history-empty">No consultations yet. Start one to see it here.</div>';
  }
  const items = sessions
    .map((s) => {
      const selected = s.session_id === activeId ? " selected" : "";
      return (
        `<li class="history-entry${selected}" data-session-id="${escapeHtml(s.session_id)}">` +
        `<span class="history-id">${escapeHtml(s.session_id.slice(0, 8))}</span>` +
        `<span class="history-status">${escapeHtml(s.status)}</span>` +
        `<span class="history-count">${s.evidence_count} items</span>` +
        `</li>`
      );
    })
    .join("");
  return `<ul class="history-list">${items}</ul>`;
}

export function renderFollowUpBanner(question: string): string {
  return (
    '<div class="followup-banner" role="alert">' +
    '<span class="followup-label">Suggested follow-up question</span>' +
    `<span class="followup-text">${escapeHtml(question)}</span>` +
    "</div>"
  );
}

export function renderErrorBanner(message: string): string {
  return `<div class="error-banner" role="alert">${escapeHtml(message)}</div>`;
}

function field(label: string, value: string | null): string {
  const body = value ? escapeHtml(value) : MISSING;
  return (
    `<div class="rec-field rec-${label.toLowerCase().replaceAll(" ", "-")}">` +
    `<span class="rec-label">${label}</span>` +
    `<span class="rec-value">${body}</span></div>`
  );
}

export function renderRecommendationCard(rec: Recommendation): string {
  const ids = rec.supporting_ehr_ids
    .map((id) => `<li class="provenance-ehr">${escapeHtml(id)}</li>`)
    .join("");
  const triplets = rec.supporting_triplets
    .map(
      (t) =>
        `<li class="provenance-triplet">${escapeHtml(t.disease)} ${escapeHtml(t.relation)} ${escapeHtml(t.feature)}</li>`,
    )
    .join("");
  return (
    '<div class="recommendation-card">' +
    field("Diagnosis", rec.diagnosis) +
    field("Treatment", rec.treatment) +
    field("Medication", rec.medication) +
    field("Follow-up question", rec.follow_up_question) +
    '<details class="provenance">' +
    "<summary>Why: supporting records and knowledge</summary>" +
    `<ul class="provenance-ehrs">${ids}</ul>` +
    `<ul class="provenance-triplets">${triplets}</ul>` +
    "</details>" +
    "</div>"
  );
}

export function renderTranscript(view: SessionView): string {
  const items = view.transcript
    .map(
      (item) =>
        `<li class="evidence evidence-${item.kind}">` +
        `<span class="evidence-kind">${escapeHtml(item.kind)}</span>` +
        `<span class="evidence-text">${escapeHtml(item.text)}</span></li>`,
    )
    .join("");
  const inlineQuestion = view.pending_question
    ? `<li class="evidence evidence-question">${escapeHtml(view.pending_question)}</li>`
    : "";
  return `<ol class="transcript">${items}${inlineQuestion}</ol>`;
}

export function renderActivePane(state: ConsoleState): string {
  const parts: string[] = [];
  if (state.errorBanner) parts.push(renderErrorBanner(state.errorBanner));
  const view = state.active;
  if (view) {
    parts.push(renderTranscript(view));
    if (view.pending_question) parts.push(renderFollowUpBanner(view.pending_question));
    if (view.latest_recommendation) parts.push(renderRecommendationCard(view.latest_recommendation));
  } else {
    parts.push('<div class="no-session">No active consultation.</div>');
  }
  if (state.queryResult) parts.push(renderRecommendationCard(state.queryResult));
  return parts.join("\n");
}

export function renderModeTabs(state: ConsoleState): string {
  const modes: Array<[string, string]> = [
    ["speaking", "Speaking"],
    ["uploading", "Uploading Files"],
    ["typewriting", "Typewriting"],
  ];
  return modes
    .map(([mode, label]) => {
      const active = state.inputMode === mode ? " active" : "";
      return `<button class="mode-tab${active}" data-mode="${mode}">${label}</button>`;
    })
    .join("");
}

export function renderApp(state: ConsoleState): string {
  return (
    '<div class="layout">' +
    `<aside class="left-panel">${renderHistoryPanel(state.sessions, state.active?.session_id ?? null)}</aside>` +
    '<main class="main-panel">' +
    `<nav class="mode-tabs">${renderModeTabs(state)}</nav>` +
    `<section class="active-pane">${renderActivePane(state)}</section>` +
    "</main>" +
    "</div>"
  );
}
