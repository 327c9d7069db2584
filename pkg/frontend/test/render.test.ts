// Snapshot-to-DOM rendering: pure, and bit-for-bit faithful to the
// recorded server session (the same golden file the Python suite
// replays against a live server).

import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { initialUiState, renderPanel, UiState } from "../src/panel.js";
import { StateEvent, validateState } from "../src/protocol.js";

const SESSION = join(
  __dirname, "..", "..", "tests", "golden", "panel", "session1.jsonl",
);

function sessionStates(): StateEvent[] {
  const lines = readFileSync(SESSION, "utf-8").trim().split("\n");
  const states: StateEvent[] = [];
  for (const line of lines) {
    const record = JSON.parse(line);
    if (record.recv && record.recv.event === "state") {
      states.push(validateState(record.recv));
    }
  }
  return states;
}

function gridBits(panel: HTMLElement): string[] {
  const rows: string[] = [];
  panel.querySelectorAll(".lamp-grid .lamp-row").forEach((row) => {
    let bits = "";
    row.querySelectorAll(".lamp").forEach((lamp) => {
      bits += lamp.classList.contains("on") ? "1" : "0";
    });
    rows.push(bits);
  });
  return rows;
}

function render(snapshot: StateEvent | null, ui?: UiState): HTMLElement {
  return renderPanel(snapshot, ui ?? initialUiState(), document);
}

describe("golden session replay", () => {
  it("renders every recorded snapshot's lamp grid and registers bit-for-bit", () => {
    const states = sessionStates();
    expect(states.length).toBeGreaterThanOrEqual(5);
    for (const snapshot of states) {
      const panel = render(snapshot);
      expect(gridBits(panel)).toEqual(snapshot.plane.rows);
      expect(panel.querySelector(".reg-pc")!.textContent).toBe(snapshot.pc);
      expect(panel.querySelector(".reg-acc")!.textContent).toBe(snapshot.acc);
      expect(panel.querySelector(".status")!.getAttribute("data-status")).toBe(
        snapshot.status,
      );
      expect(panel.querySelector(".reg-time")!.textContent).toBe(
        `${snapshot.sim_time_us} us`,
      );
    }
  });

  it("shows the deposited bit lit at lamp (0,0) on plane 0", () => {
    const plane0 = sessionStates().filter((s) => s.plane.index === 0);
    expect(plane0.length).toBeGreaterThan(0);
    const panel = render(plane0[0]);
    const lamp = panel.querySelector('.lamp[data-x="0"][data-y="0"]')!;
    expect(lamp.classList.contains("on")).toBe(true);
    expect(panel.querySelectorAll(".lamp.on").length).toBe(1);
  });

  it("lists breakpoints from the snapshot", () => {
    const states = sessionStates();
    const last = states[states.length - 1];
    expect(last.breakpoints).toEqual(["0100"]);
    const panel = render(last);
    const shown = Array.from(panel.querySelectorAll(".breakpoints .bp")).map(
      (bp) => bp.textContent,
    );
    expect(shown).toEqual(["0100"]);
  });
});

describe("affordances and purity", () => {
  function syntheticState(overrides: Partial<StateEvent>): StateEvent {
    return validateState({
      event: "state",
      pc: "0001",
      acc: "000014",
      ir: "020144",
      overflow: 0,
      status: "halted",
      sim_time_us: 16,
      plane: { index: 17, rows: Array(32).fill("0".repeat(32)) },
      breakpoints: [],
      devices: [],
      last_step: null,
      ...overrides,
    });
  }

  it("halted: start and step enabled, stop disabled", () => {
    const panel = render(syntheticState({ status: "halted" }));
    expect((panel.querySelector("#start") as HTMLButtonElement).disabled).toBe(false);
    expect((panel.querySelector("#step") as HTMLButtonElement).disabled).toBe(false);
    expect((panel.querySelector("#stop") as HTMLButtonElement).disabled).toBe(true);
  });

  it("running: stop enabled, start/step/reset disabled", () => {
    const panel = render(syntheticState({ status: "running" }));
    expect((panel.querySelector("#stop") as HTMLButtonElement).disabled).toBe(false);
    expect((panel.querySelector("#start") as HTMLButtonElement).disabled).toBe(true);
    expect((panel.querySelector("#step") as HTMLButtonElement).disabled).toBe(true);
    expect((panel.querySelector("#reset") as HTMLButtonElement).disabled).toBe(true);
  });

  it("time display reads 16 us after one add", () => {
    const panel = render(syntheticState({ sim_time_us: 16 }));
    expect(panel.querySelector(".reg-time")!.textContent).toBe("16 us");
  });

  it("rendering is a pure function of snapshot and ui state", () => {
    const snapshot = syntheticState({});
    const a = render(snapshot).outerHTML;
    const b = render(snapshot).outerHTML;
    expect(a).toBe(b);
  });

  it("disconnected rendering shows the error state, no machine data", () => {
    const ui = initialUiState();
    ui.connection = "error";
    ui.connectionDetail = "socket closed";
    const panel = render(null, ui);
    expect(panel.querySelector(".connection")!.getAttribute("data-state")).toBe("error");
    expect(panel.querySelector(".connection")!.textContent).toContain("socket closed");
    expect(panel.querySelector(".reg-pc")!.textContent).toBe("----");
    expect(panel.querySelectorAll(".lamp.on").length).toBe(0);
  });

  it("pending deposit register lights its own lamps only", () => {
    const ui = initialUiState();
    ui.pendingWord = 0o000005; // bits 0 and 2
    const panel = render(syntheticState({}), ui);
    const lit = Array.from(panel.querySelectorAll(".word-row .bit.on")).map(
      (bit) => bit.getAttribute("data-bit"),
    );
    expect(lit.sort()).toEqual(["0", "2"]);
  });
});
