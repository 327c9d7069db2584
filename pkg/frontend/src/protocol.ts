// Panel protocol messages. Command serialization is golden-tested
// byte-for-byte against tests/golden/panel/commands/, so builders must
// keep the canonical key order and JSON.stringify must be used as-is.

export type MachineStatus = "halted" | "running" | "paused_at_breakpoint";

export interface PlaneData {
  index: number;
  rows: string[];
}

export interface StateEvent {
  event: "state";
  pc: string;
  acc: string;
  ir: string;
  overflow: number;
  status: MachineStatus;
  sim_time_us: number;
  plane: PlaneData;
  breakpoints: string[];
  devices: unknown[];
  last_step: LastStep | null;
}

export interface LastStep {
  kind: "step" | "run";
  [key: string]: unknown;
}

export interface HelloEvent {
  event: "hello";
  role: "controller" | "observer";
  machine: { memory_words: number; word_bits: number; planes: number };
}

export interface OkEvent {
  event: "ok";
  cmd: string;
  [key: string]: unknown;
}

export interface ErrorEvent {
  event: "error";
  cmd: string | null;
  message: string;
}

export interface ExamineEvent {
  event: "examine";
  addr: string;
  word: string;
}

export type ServerEvent =
  | StateEvent
  | HelloEvent
  | OkEvent
  | ErrorEvent
  | ExamineEvent;

export type Command = { cmd: string } & Record<string, unknown>;

const STATUSES = new Set(["halted", "running", "paused_at_breakpoint"]);

export class SchemaError extends Error {}

function requireOctal(value: unknown, digits: number, field: string): string {
  if (typeof value !== "string" || value.length !== digits || !/^[0-7]+$/.test(value)) {
    throw new SchemaError(`${field} must be ${digits} octal digits, got ${JSON.stringify(value)}`);
  }
  return value;
}

/** Validate a state event; the renderer computes no machine semantics,
 * so everything it shows must already be well-formed here. */
export function validateState(raw: unknown): StateEvent {
  const obj = raw as Record<string, unknown>;
  if (!obj || obj["event"] !== "state") {
    throw new SchemaError("not a state event");
  }
  requireOctal(obj["pc"], 4, "pc");
  requireOctal(obj["acc"], 6, "acc");
  requireOctal(obj["ir"], 6, "ir");
  if (!STATUSES.has(obj["status"] as string)) {
    throw new SchemaError(`unknown status ${JSON.stringify(obj["status"])}`);
  }
  if (typeof obj["sim_time_us"] !== "number" || obj["sim_time_us"] < 0) {
    throw new SchemaError("sim_time_us must be a non-negative number");
  }
  const plane = obj["plane"] as PlaneData | undefined;
  if (
    !plane ||
    typeof plane.index !== "number" ||
    plane.index < 0 ||
    plane.index > 17 ||
    !Array.isArray(plane.rows) ||
    plane.rows.length !== 32 ||
    plane.rows.some((row) => typeof row !== "string" || !/^[01]{32}$/.test(row))
  ) {
    throw new SchemaError("plane must carry 32 rows of 32 bits");
  }
  const breakpoints = obj["breakpoints"];
  if (!Array.isArray(breakpoints) || breakpoints.some((a) => typeof a !== "string")) {
    throw new SchemaError("breakpoints must be a list of octal strings");
  }
  return obj as unknown as StateEvent;
}

export function encodeCommand(command: Command): string {
  return JSON.stringify(command);
}

// Builders: property order below is the canonical wire order.

export const commands = {
  hello(role: "controller" | "observer"): Command {
    return { cmd: "hello", role };
  },
  start(): Command {
    return { cmd: "start" };
  },
  stop(): Command {
    return { cmd: "stop" };
  },
  step(): Command {
    return { cmd: "step" };
  },
  stepMicro(): Command {
    return { cmd: "step_micro" };
  },
  reset(): Command {
    return { cmd: "reset" };
  },
  boot(): Command {
    return { cmd: "boot" };
  },
  deposit(addr: string, word: string): Command {
    return { cmd: "deposit", addr, word };
  },
  examine(addr: string): Command {
    return { cmd: "examine", addr };
  },
  selectPlane(plane: number): Command {
    return { cmd: "select_plane", plane };
  },
  mountTape(channel: number, bytes: Uint8Array): Command {
    let raw = "";
    for (const b of bytes) {
      raw += String.fromCharCode(b);
    }
    return { cmd: "mount_tape", channel, data: btoa(raw) };
  },
  setBreakpoint(addr: string): Command {
    return { cmd: "set_breakpoint", addr };
  },
  clearBreakpoint(addr: string): Command {
    return { cmd: "clear_breakpoint", addr };
  },
};

export function octalAddr(value: number): string {
  return (value & 0o1777).toString(8).padStart(4, "0");
}

export function octalWord(value: number): string {
  return (value & 0o777777).toString(8).padStart(6, "0");
}
