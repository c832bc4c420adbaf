import { describe, expect, it } from "vitest";

import type { TableView, TurnReply } from "../src/api.js";
import { escapeHtml, renderApp, renderMessages, renderModeBadge, renderTable } from "../src/render.js";
import { applyReply, beginSend, newSession } from "../src/state.js";

const table: TableView = {
  table_id: "t0",
  page_title: "Roster <b>",
  page_intro: "",
  section_title: "",
  section_intro: "",
  headers: ["Stadium", "Coach"],
  rows: [
    [
      { value: "Arena", linked_text: null },
      { value: "Miller", linked_text: null },
    ],
  ],
};

function stateWithReply(reply: TurnReply) {
  return applyReply(beginSend(newSession("abc", "top3"), "q"), reply, table);
}

describe("escapeHtml", () => {
  it("escapes markup characters", () => {
    expect(escapeHtml(`<b>&"x"</b>`)).toBe("&lt;b&gt;&amp;&quot;x&quot;&lt;/b&gt;");
  });
});

describe("renderModeBadge", () => {
  it("shows the human label", () => {
    expect(renderModeBadge("top3")).toContain("Top-3");
    expect(renderModeBadge("top3")).toContain(`data-mode="top3"`);
  });
});

describe("renderMessages", () => {
  it("renders one div per message with its role class", () => {
    const html = renderMessages([
      { role: "user", text: "hello" },
      { role: "error", text: "boom" },
    ]);
    expect(html).toContain(`class="msg msg-user"`);
    expect(html).toContain(`class="msg msg-error"`);
    expect(html).toContain("boom");
  });
});

describe("renderTable", () => {
  it("shows a placeholder before retrieval", () => {
    expect(renderTable(newSession("abc", "top3"))).toContain("No table retrieved yet");
  });

  it("renders caption with table id and escapes the title", () => {
    const s = stateWithReply({ response: "r", table_id: "t0", knowledge: [] });
    const html = renderTable(s);
    expect(html).toContain("<code>t0</code>");
    expect(html).toContain("Roster &lt;b&gt;");
  });

  it("badges highlighted cells with their ranks", () => {
    const s = stateWithReply({
      response: "r",
      table_id: "t0",
      knowledge: [
        { cell: { table_id: "t0", row: 0, col: 1 }, score: 0, text: "" },
        { cell: { table_id: "t0", row: 0, col: 0 }, score: -1, text: "" },
      ],
    });
    const html = renderTable(s);
    expect(html).toContain(`<span class="rank-badge">K1</span>Miller`);
    expect(html).toContain(`<span class="rank-badge">K2</span>Arena`);
    expect(html).toContain(`data-rank="1"`);
  });

  it("leaves unhighlighted cells plain", () => {
    const s = stateWithReply({ response: "r", table_id: "t0", knowledge: [] });
    expect(renderTable(s)).toContain("<td>Arena</td>");
  });
});

describe("renderApp", () => {
  it("disables the composer while a message is in flight", () => {
    const sending = beginSend(newSession("abc", "top3"), "q");
    expect(renderApp(sending, null)).toContain("disabled");
    expect(renderApp(newSession("abc", "top3"), null)).not.toContain("disabled");
  });

  it("renders the banner with a retry button when set", () => {
    const html = renderApp(newSession("", "top3"), "service unreachable");
    expect(html).toContain("service unreachable");
    expect(html).toContain(`id="retry"`);
  });
});
