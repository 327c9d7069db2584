// Composition root: one socket, one view model, snapshots applied in
// arrival order, user actions queued through dispatchControl.

import { commands, ServerEvent, StateEvent, validateState } from "./protocol.js";
import { initialUiState, renderPanel } from "./panel.js";
import { Action, dispatchControl } from "./controls.js";
import { PanelSocket } from "./socket.js";

const ui = initialUiState();
let snapshot: StateEvent | null = null;
let playTimer: ReturnType<typeof setInterval> | null = null;

const container = document.getElementById("panel-root")!;

const socket = new PanelSocket(`ws://${location.host}/ws`, {
  onOpen() {
    ui.connection = "connected";
    ui.connectionDetail = "";
    socket.send(commands.hello("controller"));
    render();
  },
  onClose(detail: string) {
    ui.connection = "error";
    ui.connectionDetail = detail;
    snapshot = null;
    stopPlayback();
    render();
  },
  onEvent(event: ServerEvent) {
    handleEvent(event);
  },
});

function handleEvent(event: ServerEvent): void {
  switch (event.event) {
    case "state":
      try {
        snapshot = validateState(event);
      } catch (error) {
        ui.connection = "error";
        ui.connectionDetail = String(error);
        snapshot = null;
        stopPlayback();
      }
      break;
    case "examine":
      if (event.addr === ui.depositAddr) {
        ui.pendingWord = parseInt(event.word, 8);
      }
      break;
    case "error":
      ui.commandError = `${event.cmd ?? "?"}: ${event.message}`;
      break;
    case "hello":
    case "ok":
      ui.commandError = "";
      break;
  }
  render();
}

function dispatch(action: Action): void {
  dispatchControl(action, {
    snapshot,
    ui,
    send: socket.isOpen() ? (c) => socket.send(c) : null,
  });
  render();
}

function stopPlayback(): void {
  if (playTimer !== null) {
    clearInterval(playTimer);
    playTimer = null;
  }
  ui.playing = false;
}

function togglePlayback(): void {
  // purely presentational pacing: spaced step commands; simulated
  // time stays the emulator's
  if (ui.playing) {
    stopPlayback();
  } else {
    ui.playing = true;
    playTimer = setInterval(() => dispatch({ kind: "step" }), ui.throttleMs);
  }
  render();
}

function render(): void {
  const panel = renderPanel(snapshot, ui, document);
  container.replaceChildren(panel);
  wire(panel);
}

function wire(panel: HTMLElement): void {
  const simple: [string, Action][] = [
    ["#start", { kind: "start" }],
    ["#stop", { kind: "stop" }],
    ["#step", { kind: "step" }],
    ["#step-micro", { kind: "step-micro" }],
    ["#reset", { kind: "reset" }],
    ["#boot", { kind: "boot" }],
    ["#examine", { kind: "examine" }],
    ["#deposit", { kind: "deposit" }],
    ["#toggle-breakpoint", { kind: "toggle-breakpoint" }],
  ];
  for (const [selector, action] of simple) {
    panel.querySelector(selector)?.addEventListener("click", () => dispatch(action));
  }
  panel.querySelector("#plane")?.addEventListener("change", (event) => {
    const plane = parseInt((event.target as HTMLSelectElement).value, 10);
    dispatch({ kind: "select-plane", plane });
  });
  panel.querySelector("#addr")?.addEventListener("change", (event) => {
    dispatch({
      kind: "set-address",
      addr: (event.target as HTMLInputElement).value.trim(),
    });
  });
  panel.querySelectorAll(".word-row .bit").forEach((bit) => {
    bit.addEventListener("click", () => {
      dispatch({
        kind: "toggle-pending-bit",
        bit: parseInt((bit as HTMLElement).getAttribute("data-bit")!, 10),
      });
    });
  });
  panel.querySelectorAll(".lamp-grid .lamp").forEach((lamp) => {
    lamp.addEventListener("click", () => {
      dispatch({
        kind: "lamp-click",
        x: parseInt((lamp as HTMLElement).getAttribute("data-x")!, 10),
        y: parseInt((lamp as HTMLElement).getAttribute("data-y")!, 10),
      });
    });
  });
  panel.querySelector("#throttle")?.addEventListener("change", (event) => {
    ui.throttleMs = parseInt((event.target as HTMLInputElement).value, 10);
    if (ui.playing) {
      stopPlayback();
      togglePlayback();
    }
  });
  panel.querySelector("#play")?.addEventListener("click", () => togglePlayback());
  panel.querySelector("#tape-file")?.addEventListener("change", async (event) => {
    const input = event.target as HTMLInputElement;
    const file = input.files?.[0];
    if (!file) {
      return;
    }
    const bytes = new Uint8Array(await file.arrayBuffer());
    const channel = parseInt(
      (panel.querySelector("#tape-channel") as HTMLSelectElement).value,
      10,
    );
    dispatch({ kind: "mount-tape", channel, bytes });
  });
}

render();
socket.connect();
