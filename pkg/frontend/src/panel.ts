// Pure snapshot-to-DOM rendering. The panel computes no machine
// semantics: every lamp, digit and affordance below is a direct copy
// of snapshot data (plus explicit UI state like the pending deposit
// register). renderPanel is a pure function of its arguments.

import { StateEvent } from "./protocol.js";

export type ConnectionState = "connecting" | "connected" | "error";

export interface UiState {
  plane: number;             // selected plane (sign bit 17 by default)
  depositAddr: string;       // 4 octal digits
  pendingWord: number | null; // the deposit register, edited locally
  connection: ConnectionState;
  connectionDetail: string;
  commandError: string;      // last inline error frame, "" when none
  throttleMs: number;        // playback pacing between step commands
  playing: boolean;
}

export function initialUiState(): UiState {
  return {
    plane: 17,
    depositAddr: "0000",
    pendingWord: null,
    connection: "connecting",
    connectionDetail: "",
    commandError: "",
    throttleMs: 250,
    playing: false,
  };
}

function el(
  doc: Document,
  tag: string,
  attrs: Record<string, string | boolean> = {},
  children: (Node | string)[] = [],
): HTMLElement {
  const node = doc.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (typeof value === "boolean") {
      if (value) {
        node.setAttribute(key, "");
      }
    } else {
      node.setAttribute(key, value);
    }
  }
  for (const child of children) {
    node.append(child);
  }
  return node;
}

function lampGrid(doc: Document, snapshot: StateEvent | null): HTMLElement {
  const grid = el(doc, "div", { class: "lamp-grid" });
  for (let y = 0; y < 32; y++) {
    const rowBits = snapshot ? snapshot.plane.rows[y] : null;
    const row = el(doc, "div", { class: "lamp-row", "data-y": String(y) });
    for (let x = 0; x < 32; x++) {
      const lit = rowBits !== null && rowBits[x] === "1";
      row.append(
        el(doc, "span", {
          class: lit ? "lamp on" : "lamp off",
          "data-x": String(x),
          "data-y": String(y),
        }),
      );
    }
    grid.append(row);
  }
  return grid;
}

function wordRegister(doc: Document, ui: UiState): HTMLElement {
  // 18 lamps for the pending deposit value, bit 17 leftmost
  const row = el(doc, "div", { class: "word-row" });
  for (let bit = 17; bit >= 0; bit--) {
    const lit = ui.pendingWord !== null && ((ui.pendingWord >> bit) & 1) === 1;
    row.append(
      el(doc, "span", {
        class: lit ? "bit on" : "bit off",
        "data-bit": String(bit),
      }),
    );
  }
  return row;
}

function switches(doc: Document, snapshot: StateEvent | null): HTMLElement {
  const status = snapshot?.status ?? null;
  const running = status === "running";
  const connected = snapshot !== null;
  const disabledUnlessIdle = !connected || running;
  return el(doc, "div", { class: "switches" }, [
    el(doc, "button", { id: "start", disabled: disabledUnlessIdle }, ["start"]),
    el(doc, "button", { id: "stop", disabled: !connected || !running }, ["stop"]),
    el(doc, "button", { id: "step", disabled: disabledUnlessIdle }, ["step"]),
    el(doc, "button", { id: "step-micro", disabled: disabledUnlessIdle }, ["step u"]),
    el(doc, "button", { id: "reset", disabled: !connected || running }, ["reset"]),
    el(doc, "button", { id: "boot", disabled: disabledUnlessIdle }, ["boot"]),
  ]);
}

function planeSelector(doc: Document, ui: UiState): HTMLElement {
  const select = el(doc, "select", { id: "plane" });
  for (let p = 0; p < 18; p++) {
    const option = el(
      doc,
      "option",
      { value: String(p), selected: p === ui.plane },
      [`plane ${p}${p === 17 ? " (sign)" : ""}`],
    );
    select.append(option);
  }
  return select;
}

export function renderPanel(
  snapshot: StateEvent | null,
  ui: UiState,
  doc: Document,
): HTMLElement {
  const root = el(doc, "div", { class: "panel" });

  const banner = el(
    doc,
    "div",
    { class: "connection", "data-state": ui.connection },
    [
      ui.connection === "connected"
        ? "on line"
        : ui.connection === "connecting"
          ? "connecting..."
          : `connection error: ${ui.connectionDetail}`,
    ],
  );
  root.append(banner);

  const registers = el(doc, "div", { class: "registers" }, [
    el(doc, "span", { class: "reg reg-pc" }, [snapshot ? snapshot.pc : "----"]),
    el(doc, "span", { class: "reg reg-acc" }, [snapshot ? snapshot.acc : "------"]),
    el(doc, "span", { class: "reg reg-time" }, [
      snapshot ? `${snapshot.sim_time_us} us` : "-",
    ]),
    el(doc, "span", {
      class: "status",
      "data-status": snapshot ? snapshot.status : "disconnected",
    }, [snapshot ? snapshot.status : "disconnected"]),
  ]);
  root.append(registers);

  root.append(switches(doc, snapshot));
  root.append(planeSelector(doc, ui));
  root.append(lampGrid(doc, snapshot));

  const deposit = el(doc, "div", { class: "deposit" }, [
    el(doc, "input", { id: "addr", value: ui.depositAddr, maxlength: "4" }),
    el(doc, "button", { id: "examine", disabled: snapshot === null }, ["examine"]),
    wordRegister(doc, ui),
    el(doc, "button", {
      id: "deposit",
      disabled: snapshot === null || ui.pendingWord === null,
    }, ["deposit"]),
    el(doc, "button", { id: "toggle-breakpoint", disabled: snapshot === null }, [
      "breakpoint",
    ]),
  ]);
  root.append(deposit);

  const breakpoints = el(doc, "div", { class: "breakpoints" },
    snapshot ? snapshot.breakpoints.map(
      (addr) => el(doc, "span", { class: "bp", "data-addr": addr }, [addr]),
    ) : []);
  root.append(breakpoints);

  const tape = el(doc, "div", { class: "tape" }, [
    el(doc, "input", { id: "tape-file", type: "file" }),
    el(doc, "select", { id: "tape-channel" }, [
      el(doc, "option", { value: "4", selected: true }, ["channel 4 (TR5)"]),
      el(doc, "option", { value: "3" }, ["channel 3 (T2TA10)"]),
    ]),
  ]);
  root.append(tape);

  const throttle = el(doc, "div", { class: "throttle" }, [
    el(doc, "input", {
      id: "throttle",
      type: "range",
      min: "16",
      max: "2000",
      value: String(ui.throttleMs),
    }),
    el(doc, "button", { id: "play", disabled: snapshot === null }, [
      ui.playing ? "pause playback" : "play",
    ]),
  ]);
  root.append(throttle);

  root.append(
    el(doc, "div", { class: "cmd-error", "data-empty": ui.commandError === "" }, [
      ui.commandError,
    ]),
  );

  return root;
}
