/**
 * Session state reducer. Pure functions over UiSessionState so every
 * transition is unit-testable without a DOM or a server; the server stays
 * the source of truth (errors never append a turn locally, and a reload
 * rebuilds the same state from GET /api/sessions/{id}).
 */

import type { KnowledgeItem, SessionView, TableView, TurnReply } from "./api.js";

export type Role = "user" | "system" | "error";

export interface ChatMessage {
  role: Role;
  text: string;
}

export interface UiSessionState {
  sessionId: string;
  mode: string;
  messages: ChatMessage[];
  table: TableView | null;
  /** "row,col" -> 1-based knowledge rank of the latest turn */
  highlights: Record<string, number>;
  /** single in-flight message per session, enforced client-side */
  sending: boolean;
}

export function newSession(sessionId: string, mode: string): UiSessionState {
  return {
    sessionId,
    mode,
    messages: [],
    table: null,
    highlights: {},
    sending: false,
  };
}

export function modeLabel(mode: string): string {
  switch (mode) {
    case "nok":
      return "No knowledge";
    case "top1":
      return "Top-1";
    case "top3":
      return "Top-3";
    default:
      return mode;
  }
}

function inBounds(table: TableView, row: number, col: number): boolean {
  return row >= 0 && row < table.rows.length && col >= 0 && col < table.headers.length;
}

/** Highlight map for one turn's knowledge; out-of-bounds or foreign-table
 * cells are dropped so rendered highlights always land inside the table. */
export function highlightMap(table: TableView | null, knowledge: KnowledgeItem[]): Record<string, number> {
  const out: Record<string, number> = {};
  if (table === null) return out;
  knowledge.forEach((item, i) => {
    const { table_id, row, col } = item.cell;
    if (table_id === table.table_id && inBounds(table, row, col)) {
      out[`${row},${col}`] = i + 1;
    }
  });
  return out;
}

export function beginSend(state: UiSessionState, query: string): UiSessionState {
  return {
    ...state,
    messages: [...state.messages, { role: "user", text: query }],
    sending: true,
  };
}

export function applyReply(state: UiSessionState, reply: TurnReply, table: TableView): UiSessionState {
  return {
    ...state,
    messages: [...state.messages, { role: "system", text: reply.response }],
    table,
    highlights: highlightMap(table, reply.knowledge),
    sending: false,
  };
}

/** Provider/transport failure: inline error bubble, table and highlights
 * untouched, input unlocked. The failed turn is not part of the history. */
export function applyError(state: UiSessionState, detail: string): UiSessionState {
  return {
    ...state,
    messages: [...state.messages, { role: "error", text: detail }],
    sending: false,
  };
}

/** Rebuild state from the server's session record (page reload). */
export function fromServerSession(view: SessionView, table: TableView | null): UiSessionState {
  const messages: ChatMessage[] = [];
  for (const turn of view.turns) {
    messages.push({ role: "user", text: turn.query });
    messages.push({ role: "system", text: turn.response });
  }
  const last = view.turns[view.turns.length - 1];
  return {
    sessionId: view.session_id,
    mode: view.mode,
    messages,
    table,
    highlights: last ? highlightMap(table, last.knowledge) : {},
    sending: false,
  };
}

export function highlightRank(state: UiSessionState, row: number, col: number): number | null {
  return state.highlights[`${row},${col}`] ?? null;
}
