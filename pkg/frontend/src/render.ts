/**
 * HTML renderers. Pure string builders so they run (and get tested) in
 * node; main.ts assigns the output to innerHTML and wires events.
 */

import type { TableView } from "./api.js";
import type { ChatMessage, UiSessionState } from "./state.js";
import { highlightRank, modeLabel } from "./state.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderModeBadge(mode: string): string {
  return `<span class="mode-badge" data-mode="${escapeHtml(mode)}">${escapeHtml(modeLabel(mode))}</span>`;
}

export function renderMessages(messages: ChatMessage[]): string {
  return messages
    .map((m) => `<div class="msg msg-${m.role}">${escapeHtml(m.text)}</div>`)
    .join("");
}

export function renderTable(state: UiSessionState): string {
  const table: TableView | null = state.table;
  if (table === null) {
    return `<p class="table-empty">No table retrieved yet.</p>`;
  }
  const caption = `${escapeHtml(table.page_title)} <code>${escapeHtml(table.table_id)}</code>`;
  const head = table.headers.map((h) => `<th>${escapeHtml(h)}</th>`).join("");
  const body = table.rows
    .map((row, r) => {
      const cells = row
        .map((cell, c) => {
          const rank = highlightRank(state, r, c);
          const badge = rank === null ? "" : `<span class="rank-badge">K${rank}</span>`;
          const cls = rank === null ? "" : ` class="highlight" data-rank="${rank}"`;
          return `<td${cls}>${badge}${escapeHtml(cell.value)}</td>`;
        })
        .join("");
      return `<tr>${cells}</tr>`;
    })
    .join("");
  return (
    `<table class="grounding-table"><caption>${caption}</caption>` +
    `<thead><tr>${head}</tr></thead><tbody>${body}</tbody></table>`
  );
}

export function renderBanner(text: string | null): string {
  if (text === null) return "";
  return `<div class="banner">${escapeHtml(text)} <button id="retry">Retry</button></div>`;
}

export function renderApp(state: UiSessionState, banner: string | null): string {
  return (
    renderBanner(banner) +
    `<header>${renderModeBadge(state.mode)}</header>` +
    `<section id="table-pane">${renderTable(state)}</section>` +
    `<section id="chat-pane">${renderMessages(state.messages)}</section>` +
    `<form id="composer"><input id="query" autocomplete="off"` +
    `${state.sending ? " disabled" : ""} placeholder="Ask about a table..." />` +
    `<button type="submit"${state.sending ? " disabled" : ""}>Send</button></form>`
  );
}
