// User action -> exactly one protocol command (or a pure UI-state
// edit). Optimistic UI is forbidden: nothing here touches machine
// state locally; changes become visible only through snapshots. With
// no transport connected every action is inert.

import { Command, commands, StateEvent } from "./protocol.js";
import { UiState } from "./panel.js";

export type Action =
  | { kind: "start" }
  | { kind: "stop" }
  | { kind: "step" }
  | { kind: "step-micro" }
  | { kind: "reset" }
  | { kind: "boot" }
  | { kind: "examine" }
  | { kind: "deposit" }
  | { kind: "toggle-breakpoint" }
  | { kind: "select-plane"; plane: number }
  | { kind: "set-address"; addr: string }
  | { kind: "toggle-pending-bit"; bit: number }
  | { kind: "lamp-click"; x: number; y: number }
  | { kind: "mount-tape"; channel: number; bytes: Uint8Array };

export interface DispatchContext {
  snapshot: StateEvent | null;
  ui: UiState;
  send: ((command: Command) => void) | null; // null while disconnected
}

const OCTAL_ADDR = /^[0-7]{1,4}$/;

/** Returns the command that was sent, or null for UI-only actions
 * (and for everything while disconnected). */
export function dispatchControl(action: Action, ctx: DispatchContext): Command | null {
  const { ui } = ctx;

  // pure UI-state edits first: legal even without a connection
  switch (action.kind) {
    case "set-address":
      if (OCTAL_ADDR.test(action.addr)) {
        ui.depositAddr = action.addr.padStart(4, "0");
        ui.pendingWord = null;
      }
      return null;
    case "toggle-pending-bit":
      if (ui.pendingWord !== null && action.bit >= 0 && action.bit < 18) {
        ui.pendingWord ^= 1 << action.bit;
      }
      return null;
    default:
      break;
  }

  if (ctx.send === null || ctx.snapshot === null) {
    return null; // controls are inert without the machine
  }

  let command: Command | null = null;
  switch (action.kind) {
    case "start":
      command = commands.start();
      break;
    case "stop":
      command = commands.stop();
      break;
    case "step":
      command = commands.step();
      break;
    case "step-micro":
      command = commands.stepMicro();
      break;
    case "reset":
      command = commands.reset();
      break;
    case "boot":
      command = commands.boot();
      break;
    case "examine":
      command = commands.examine(ui.depositAddr);
      break;
    case "deposit":
      if (ui.pendingWord === null) {
        return null;
      }
      command = commands.deposit(
        ui.depositAddr,
        (ui.pendingWord >>> 0).toString(8).padStart(6, "0"),
      );
      break;
    case "toggle-breakpoint":
      // decision comes from snapshot data, not local bookkeeping
      command = ctx.snapshot.breakpoints.includes(ui.depositAddr)
        ? commands.clearBreakpoint(ui.depositAddr)
        : commands.setBreakpoint(ui.depositAddr);
      break;
    case "select-plane":
      ui.plane = action.plane;
      command = commands.selectPlane(action.plane);
      break;
    case "lamp-click": {
      // clicking the grid selects that word's address and examines it;
      // the examine reply fills the deposit register
      const addr = action.y * 32 + action.x;
      ui.depositAddr = addr.toString(8).padStart(4, "0");
      ui.pendingWord = null;
      command = commands.examine(ui.depositAddr);
      break;
    }
    case "mount-tape":
      command = commands.mountTape(action.channel, action.bytes);
      break;
  }
  if (command !== null) {
    ctx.send(command);
  }
  return command;
}
