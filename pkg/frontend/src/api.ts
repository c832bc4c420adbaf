/**
 * Typed client for the grounder HTTP API. Thin wrapper over fetch; every
 * endpoint maps to one method and non-2xx responses become ApiError.
 */

export interface HealthInfo {
  status: string;
  tables: number;
  dense_index: boolean;
}

export interface CellAddress {
  table_id: string;
  row: number;
  col: number;
}

export interface KnowledgeItem {
  cell: CellAddress;
  score: number;
  text: string;
}

export interface TurnReply {
  response: string;
  table_id: string;
  knowledge: KnowledgeItem[];
}

export interface SessionTurn {
  query: string;
  response: string;
  table_id: string;
  knowledge: KnowledgeItem[];
}

export interface SessionView {
  session_id: string;
  created_at: number;
  mode: string;
  provider: string;
  active_table_id: string | null;
  turns: SessionTurn[];
}

export interface TableCell {
  value: string;
  linked_text: string | null;
}

export interface TableView {
  table_id: string;
  page_title: string;
  page_intro: string;
  section_title: string;
  section_intro: string;
  headers: string[];
  rows: TableCell[][];
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  let resp: Response;
  try {
    resp = await fetch(url, init);
  } catch (err) {
    throw new ApiError(0, `service unreachable: ${String(err)}`);
  }
  if (!resp.ok) {
    let detail = resp.statusText;
    try {
      const body = (await resp.json()) as { detail?: string };
      if (body.detail) detail = body.detail;
    } catch {
      // keep the status text
    }
    throw new ApiError(resp.status, detail);
  }
  return (await resp.json()) as T;
}

export class GrounderApi {
  constructor(readonly baseUrl: string = "") {}

  health(): Promise<HealthInfo> {
    return request(`${this.baseUrl}/api/health`);
  }

  createSession(mode: string, provider: string = "mock"): Promise<{ session_id: string }> {
    return request(`${this.baseUrl}/api/sessions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ mode, provider }),
    });
  }

  sendMessage(sessionId: string, query: string): Promise<TurnReply> {
    return request(`${this.baseUrl}/api/sessions/${sessionId}/messages`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ query }),
    });
  }

  getSession(sessionId: string): Promise<SessionView> {
    return request(`${this.baseUrl}/api/sessions/${sessionId}`);
  }

  getTable(tableId: string): Promise<TableView> {
    return request(`${this.baseUrl}/api/tables/${tableId}`);
  }
}
