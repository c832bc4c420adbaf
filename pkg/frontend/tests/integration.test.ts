/**
 * Full-stack check against the real Python service on a small synthetic
 * corpus. Covers the release criterion for the UI layer: a 3-turn
 * conversation with table rendering and exact highlight mapping, plus a
 * forced provider failure that must not corrupt session state.
 */

import { type ChildProcess, spawn } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiError, GrounderApi } from "../src/api.js";
import { renderTable } from "../src/render.js";
import {
  type UiSessionState,
  applyError,
  applyReply,
  beginSend,
  fromServerSession,
  newSession,
} from "../src/state.js";

const PORT = 8773;
const BASE = `http://127.0.0.1:${PORT}`;

const SERVER_SCRIPT = `
import sys, uvicorn
from grounder.encoder import init_dual_encoder
from grounder.index import build_index
from grounder.responder import Engine
from grounder.service import create_app
from grounder.sparse import build_bm25
from grounder.synth import DemoSpec, generate_demo
from grounder.text_features import load_stopwords

port, data_dir = int(sys.argv[1]), sys.argv[2]
data = generate_demo(DemoSpec(n_topics=3, tables_per_topic=2, n_dialogues=2))
de = init_dual_encoder(V=1024, d=16, ngram_max=2, seed=0)
engine = Engine(
    encoder=de,
    corpus={t.table_id: t for t in data.tables},
    dense=build_index(de, data.tables, "f" * 64),
    bm25=build_bm25(data.tables),
    stopwords=load_stopwords(),
)
uvicorn.run(create_app(engine, data_dir), host="127.0.0.1", port=port, log_level="warning")
`;

let server: ChildProcess;
const api = new GrounderApi(BASE);

async function waitForHealth(timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const h = await api.health();
      if (h.status === "ok") return;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 200));
  }
  throw new Error("service did not become healthy in time");
}

beforeAll(async () => {
  const dataDir = mkdtempSync(join(tmpdir(), "grounder-ui-"));
  server = spawn("python3", ["-c", SERVER_SCRIPT, String(PORT), dataDir], {
    env: {
      ...process.env,
      // unreachable on purpose: sessions using the http provider must fail
      GROUNDER_LLM_BASE_URL: "http://127.0.0.1:9",
    },
    stdio: ["ignore", "inherit", "inherit"],
  });
  await waitForHealth();
}, 40_000);

afterAll(() => {
  server?.kill();
});

describe("UI against the live service", () => {
  it("completes a 3-turn conversation with table render and exact highlights", async () => {
    const { session_id } = await api.createSession("top3", "mock");
    let state: UiSessionState = newSession(session_id, "top3");

    const queries = [
      "show me the first entry",
      "which value is listed in the table?",
      "and what about the next column?",
    ];
    for (const q of queries) {
      state = beginSend(state, q);
      const reply = await api.sendMessage(state.sessionId, q);
      const table =
        state.table && state.table.table_id === reply.table_id
          ? state.table
          : await api.getTable(reply.table_id);
      state = applyReply(state, reply, table);

      // highlight ranks mirror exactly the server-reported knowledge cells
      const expected: Record<string, number> = {};
      reply.knowledge.forEach((item, i) => {
        expected[`${item.cell.row},${item.cell.col}`] = i + 1;
      });
      expect(state.highlights).toEqual(expected);
    }

    expect(state.messages).toHaveLength(6);
    expect(state.table).not.toBeNull();
    const html = renderTable(state);
    expect(html).toContain(`<code>${state.table!.table_id}</code>`);
    // follow-up turns in top3 mode highlight up to 3 ranked cells
    const lastKnowledgeCount = Object.keys(state.highlights).length;
    expect(lastKnowledgeCount).toBeGreaterThan(0);
    expect(lastKnowledgeCount).toBeLessThanOrEqual(3);
    for (let rank = 1; rank <= lastKnowledgeCount; rank++) {
      expect(html).toContain(`>K${rank}</span>`);
    }

    // reload-consistency: rebuilding from the server yields the same chat
    const view = await api.getSession(session_id);
    const reloaded = fromServerSession(view, state.table);
    expect(reloaded.messages).toEqual(state.messages);
    expect(reloaded.highlights).toEqual(state.highlights);
  }, 30_000);

  it("renders a provider failure inline without corrupting the session", async () => {
    const { session_id } = await api.createSession("top3", "http");
    let state: UiSessionState = newSession(session_id, "top3");
    state = beginSend(state, "this will fail");
    const err = await api.sendMessage(session_id, "this will fail").catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).status).toBe(502);
    state = applyError(state, (err as ApiError).detail);

    expect(state.sending).toBe(false);
    expect(state.messages[state.messages.length - 1].role).toBe("error");
    expect(state.table).toBeNull(); // table pane unchanged

    // the failed turn never entered the server-side history
    const view = await api.getSession(session_id);
    expect(view.turns).toHaveLength(0);

    // the session still works afterwards (switching back to checks on the
    // mock session path is covered above; here the state simply stays sane)
    const reloaded = fromServerSession(view, null);
    expect(reloaded.messages).toEqual([]);
    console.log(
      "ACCEPTANCE 9: PASS - 3-turn conversation rendered with exact Top-3 highlights; provider failure shown inline without corrupting session state",
    );
  }, 30_000);
});
