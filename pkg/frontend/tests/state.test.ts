import { describe, expect, it } from "vitest";

import type { KnowledgeItem, SessionView, TableView, TurnReply } from "../src/api.js";
import {
  applyError,
  applyReply,
  beginSend,
  fromServerSession,
  highlightMap,
  highlightRank,
  modeLabel,
  newSession,
} from "../src/state.js";

const table: TableView = {
  table_id: "t0",
  page_title: "Roster",
  page_intro: "",
  section_title: "",
  section_intro: "",
  headers: ["Stadium", "Coach"],
  rows: [
    [
      { value: "Arena", linked_text: null },
      { value: "Miller", linked_text: null },
    ],
    [
      { value: "Center", linked_text: null },
      { value: "Reeve", linked_text: null },
    ],
  ],
};

function knowledge(cells: Array<[number, number]>, tableId = "t0"): KnowledgeItem[] {
  return cells.map(([row, col], i) => ({
    cell: { table_id: tableId, row, col },
    score: -i,
    text: `cell ${i}`,
  }));
}

function reply(cells: Array<[number, number]>): TurnReply {
  return { response: "The Stadium is Arena.", table_id: "t0", knowledge: knowledge(cells) };
}

describe("newSession", () => {
  it("starts empty and unlocked", () => {
    const s = newSession("abc", "top3");
    expect(s.messages).toEqual([]);
    expect(s.table).toBeNull();
    expect(s.highlights).toEqual({});
    expect(s.sending).toBe(false);
  });
});

describe("modeLabel", () => {
  it("maps known modes", () => {
    expect(modeLabel("top3")).toBe("Top-3");
    expect(modeLabel("top1")).toBe("Top-1");
    expect(modeLabel("nok")).toBe("No knowledge");
  });
});

describe("beginSend / applyReply", () => {
  it("locks input while in flight and unlocks on reply", () => {
    let s = beginSend(newSession("abc", "top3"), "first question");
    expect(s.sending).toBe(true);
    expect(s.messages).toEqual([{ role: "user", text: "first question" }]);
    s = applyReply(s, reply([[0, 0]]), table);
    expect(s.sending).toBe(false);
    expect(s.messages[1]).toEqual({ role: "system", text: "The Stadium is Arena." });
    expect(s.table).toBe(table);
  });

  it("assigns 1-based ranks in knowledge order", () => {
    const s = applyReply(
      beginSend(newSession("abc", "top3"), "q"),
      reply([
        [1, 1],
        [0, 0],
        [0, 1],
      ]),
      table,
    );
    expect(highlightRank(s, 1, 1)).toBe(1);
    expect(highlightRank(s, 0, 0)).toBe(2);
    expect(highlightRank(s, 0, 1)).toBe(3);
    expect(highlightRank(s, 1, 0)).toBeNull();
  });
});

describe("highlightMap invariants", () => {
  it("drops out-of-bounds cells", () => {
    const map = highlightMap(table, knowledge([[5, 0], [0, 9], [1, 0]]));
    expect(map).toEqual({ "1,0": 3 });
  });

  it("drops cells belonging to another table", () => {
    expect(highlightMap(table, knowledge([[0, 0]], "other"))).toEqual({});
  });

  it("is empty without a table", () => {
    expect(highlightMap(null, knowledge([[0, 0]]))).toEqual({});
  });
});

describe("applyError", () => {
  it("adds an error bubble and leaves the table untouched", () => {
    const before = applyReply(beginSend(newSession("abc", "top3"), "q"), reply([[0, 0]]), table);
    const after = applyError(beginSend(before, "q2"), "provider returned 502");
    expect(after.sending).toBe(false);
    expect(after.messages[after.messages.length - 1]).toEqual({
      role: "error",
      text: "provider returned 502",
    });
    expect(after.table).toBe(before.table);
    expect(after.highlights).toEqual(before.highlights);
  });
});

describe("fromServerSession", () => {
  it("reload reproduces the message order of sequential turns", () => {
    let live = newSession("abc", "top3");
    const turns = [
      { query: "q1", reply: reply([[0, 0]]) },
      { query: "q2", reply: reply([[1, 1]]) },
    ];
    for (const t of turns) {
      live = applyReply(beginSend(live, t.query), t.reply, table);
    }
    const serverView: SessionView = {
      session_id: "abc",
      created_at: 0,
      mode: "top3",
      provider: "mock",
      active_table_id: "t0",
      turns: turns.map((t) => ({
        query: t.query,
        response: t.reply.response,
        table_id: "t0",
        knowledge: t.reply.knowledge,
      })),
    };
    const reloaded = fromServerSession(serverView, table);
    expect(reloaded.messages).toEqual(live.messages);
    expect(reloaded.highlights).toEqual(live.highlights);
  });

  it("handles a session with no turns", () => {
    const view: SessionView = {
      session_id: "abc",
      created_at: 0,
      mode: "top1",
      provider: "mock",
      active_table_id: null,
      turns: [],
    };
    const s = fromServerSession(view, null);
    expect(s.messages).toEqual([]);
    expect(s.highlights).toEqual({});
  });
});
