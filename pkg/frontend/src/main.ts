/**
 * Browser entry point: wires the API client, the state reducer, and the
 * renderers to the DOM. No business logic lives here; it dispatches on
 * user events and re-renders the whole app from state.
 */

import { ApiError, GrounderApi } from "./api.js";
import { renderApp } from "./render.js";
import {
  UiSessionState,
  applyError,
  applyReply,
  beginSend,
  newSession,
} from "./state.js";

const api = new GrounderApi("");
const root = document.getElementById("app") as HTMLElement;

let state: UiSessionState | null = null;
let banner: string | null = null;
let mode = "top3";

function render(): void {
  root.innerHTML = state
    ? renderApp(state, banner)
    : renderApp(newSession("", mode), banner);
  const form = document.getElementById("composer") as HTMLFormElement | null;
  form?.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const input = document.getElementById("query") as HTMLInputElement;
    const query = input.value.trim();
    if (query) void send(query);
  });
  document.getElementById("retry")?.addEventListener("click", () => void start(mode));
  const select = document.getElementById("mode-select") as HTMLSelectElement | null;
  select?.addEventListener("change", () => void start(select.value));
}

async function start(nextMode: string): Promise<void> {
  mode = nextMode;
  banner = null;
  try {
    // a fresh session replaces the previous one; modes are immutable
    // server-side, so switching mode means starting over
    const { session_id } = await api.createSession(mode, "mock");
    state = newSession(session_id, mode);
  } catch (err) {
    state = null;
    banner = err instanceof ApiError ? err.detail : String(err);
  }
  render();
}

async function send(query: string): Promise<void> {
  if (state === null || state.sending) return;
  state = beginSend(state, query);
  render();
  try {
    const reply = await api.sendMessage(state.sessionId, query);
    const table =
      state.table && state.table.table_id === reply.table_id
        ? state.table
        : await api.getTable(reply.table_id);
    state = applyReply(state, reply, table);
  } catch (err) {
    const detail = err instanceof ApiError ? err.detail : String(err);
    state = applyError(state, detail);
  }
  render();
}

const modeBar = document.getElementById("mode-bar");
if (modeBar) {
  modeBar.innerHTML =
    `<label>Mode <select id="mode-select">` +
    `<option value="top3" selected>Top-3</option>` +
    `<option value="top1">Top-1</option>` +
    `<option value="nok">No knowledge</option>` +
    `</select></label>`;
}

void start(mode);
