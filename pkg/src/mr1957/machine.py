"""The emulator core: registers, core memory, and the two-microword cycle.

Every instruction costs exactly one fetch microword (8 us, it reads
core) plus one execute microword (8 us when it touches core, 4 us
otherwise), so per-instruction cost is always 12 or 16 us and the
sustained rate sits between 62500 and 83333 instructions per second.
The ADD/SUB datapath goes through the width-18 lookahead network from
the adder module, in its cone-tabulated form; subtraction is one's
complement plus carry-in.

Concurrency contract: the machine is a single-owner state object.  One
executor thread advances it; control inputs from other threads (hot
breakpoints, stop requests, deposits, tape mounts) go through a command
queue drained between microwords, and observers get immutable
snapshots.  That queue is what makes breakpoints "hot": they can be
set while the machine runs, without touching program memory.
"""

from __future__ import annotations

import hashlib
import threading
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache

from . import devices, isa, microcode
from .adder import CompiledAdder, build_lookahead_adder
from .microcode import ControlLine

STATUS_HALTED = "halted"
STATUS_RUNNING = "running"
STATUS_PAUSED = "paused_at_breakpoint"

WORD_MASK = isa.WORD_MASK
SIGN_BIT = isa.SIGN_BIT
ADDR_MASK = isa.ADDRESS_MASK

BOOT_CHANNEL = 4  # the fast reader feeds the direct-memory boot path

_TABLE1_DEVICES = (
    (0, devices.KIND_PRINT, "Olivetti T2CN"),
    (1, devices.KIND_PRINT_PUNCH, "Olivetti T2CN-PF"),
    (2, devices.KIND_PRINT_PUNCH, "Olivetti T2CN-PF"),
    (3, devices.KIND_READER, "Olivetti T2TA10"),
    (4, devices.KIND_FAST_READER, "Ferranti TR5"),
)


class MachineError(Exception):
    pass


class HaltedError(MachineError):
    """The machine is halted; pressing step without start is an error."""


@dataclass(frozen=True)
class MachineConfig:
    """The one machine this artifact models; any other combination is
    rejected.  All values are fixed characteristics of the 1957 build."""

    word_bits: int = 18
    memory_words: int = 1024
    plane_rows: int = 32
    plane_cols: int = 32
    plane_count: int = 18
    instruction_count: int = 32
    cycle_us: tuple = (4, 8)
    devices: tuple = _TABLE1_DEVICES

    def __post_init__(self):
        reference = (18, 1024, 32, 32, 18, 32, (4, 8), _TABLE1_DEVICES)
        got = (
            self.word_bits,
            self.memory_words,
            self.plane_rows,
            self.plane_cols,
            self.plane_count,
            self.instruction_count,
            tuple(self.cycle_us),
            tuple(self.devices),
        )
        if got != reference:
            raise MachineError(
                "this artifact models exactly one machine; "
                f"unsupported configuration {got!r}"
            )
        if self.plane_rows * self.plane_cols != self.memory_words:
            raise MachineError("plane geometry does not cover memory")
        if self.plane_count != self.word_bits:
            raise MachineError("one plane per word bit required")


@dataclass(frozen=True)
class PlaneView:
    """One core plane: bit (x, y) equals bit plane_index of the word at
    address y*32 + x."""

    plane_index: int
    bits: tuple  # 32 rows (y) of 32 cells (x)


@dataclass(frozen=True)
class StepReport:
    pc_before: int
    pc_after: int
    word: int
    opcode: int
    mnemonic: str
    disassembly: str
    microwords: tuple  # (("fetch", us), ("execute", us))
    elapsed_us: int
    status: str
    warnings: tuple = ()


@dataclass(frozen=True)
class RunReport:
    reason: str  # halted | breakpoint | break_instruction | stopped | max_instructions | max_sim_us
    instructions: int
    elapsed_us: int
    sim_time_us: int
    pc: int


@dataclass(frozen=True)
class Snapshot:
    """Immutable machine state, taken between microwords."""

    acc: int
    pc: int
    ir: int
    mar: int
    mdr: int
    overflow: int
    status: str
    sim_time_us: int
    breakpoints: tuple
    memory: tuple
    devices: tuple


@lru_cache(maxsize=1)
def _machine_adder() -> CompiledAdder:
    return CompiledAdder(build_lookahead_adder(18, 6))


_L = ControlLine
_ALU_ANY = int(microcode.ALU_LINES)
_COND_ANY = int(_L.COND_ZERO | _L.COND_NEG | _L.COND_OVF)
_MEM_READ = int(_L.MEM_READ)
_MEM_WRITE = int(_L.MEM_WRITE)
_ALU_ADD = int(_L.ALU_ADD)
_ALU_SUB = int(_L.ALU_SUB)
_ALU_AND = int(_L.ALU_AND)
_ALU_IOR = int(_L.ALU_IOR)
_ALU_XOR = int(_L.ALU_XOR)
_ALU_SHL = int(_L.ALU_SHL)
_ACC_LOAD = int(_L.ACC_LOAD)
_ACC_CLEAR = int(_L.ACC_CLEAR)
_ACC_COMPLEMENT = int(_L.ACC_COMPLEMENT)
_MAR_FROM_PC = int(_L.MAR_FROM_PC)
_MAR_FROM_ADDR = int(_L.MAR_FROM_ADDR)
_MDR_TO_ACC = int(_L.MDR_TO_ACC)
_ACC_TO_MDR = int(_L.ACC_TO_MDR)
_IR_LOAD = int(_L.IR_LOAD)
_PC_INCREMENT = int(_L.PC_INCREMENT)
_PC_FROM_ADDR = int(_L.PC_FROM_ADDR)
_COND_ZERO = int(_L.COND_ZERO)
_COND_NEG = int(_L.COND_NEG)
_ADDR_FIELD_WRITE = int(_L.ADDR_FIELD_WRITE)
_IO_STROBE = int(_L.IO_STROBE)
_HALT = int(_L.HALT)
_BREAK = int(_L.BREAK)
_OP_SHIFT = isa.MODIFIER_BITS + isa.ADDRESS_BITS
_MOD_SHIFT = isa.ADDRESS_BITS


class Machine:
    """One simulated machine instance plus its mounted devices."""

    __slots__ = (
        "config", "rom", "table", "roster", "_adder", "_t0", "_t1", "_t2",
        "_fetch_mask", "_fetch_us", "_row_mask", "_row_us", "_sem",
        "_commands", "_idle_drain", "_stop_flag", "memory", "acc", "pc",
        "ir", "mar", "mdr", "overflow", "status", "breakpoints",
        "sim_time_us", "_bp_pass", "_pending_execute", "_last_report",
    )

    def __init__(self, config: MachineConfig | None = None,
                 rom: microcode.MicroRom | None = None,
                 table: isa.IsaTable | None = None,
                 roster: devices.DeviceRoster | None = None):
        self.config = config or MachineConfig()
        self.rom = rom or microcode.default_rom()
        self.table = table or isa.default_table()
        self.roster = roster or devices.DeviceRoster.default()
        self._check_consistency()
        self._adder = _machine_adder()
        # the 18/6 network tabulates to exactly three stages; keep them
        # unpacked for the add/sub hot path
        self._t0, self._t1, self._t2 = self._adder.stages
        if [(s[0], s[1]) for s in self._adder.stages] != [(0, 6), (6, 6), (12, 6)]:
            raise MachineError("unexpected adder stage layout")
        # per-opcode dispatch data, frozen at construction
        self._fetch_mask = int(self.rom.fetch.asserted)
        self._fetch_us = self.rom.fetch.duration_us
        self._row_mask = [int(w.asserted) for w in self.rom.execute]
        self._row_us = [w.duration_us for w in self.rom.execute]
        self._sem = [e.semantics for e in self.table.entries]
        self._commands = deque()
        self._idle_drain = threading.Lock()
        self._stop_flag = False
        self.reset()

    def _check_consistency(self):
        bad = [str(d) for d in microcode.validate_rom(self.rom) if d.severity == "error"]
        if bad:
            raise MachineError("control ROM invalid: " + "; ".join(bad))
        for entry in self.table.entries:
            rom_us = self.rom.execute[entry.opcode].duration_us
            if rom_us != entry.duration_us:
                raise MachineError(
                    f"{entry.mnemonic}: instruction table says {entry.duration_us} us "
                    f"but control row takes {rom_us} us"
                )
        roster_kinds = {
            (c, ch.kind, ch.name) for c, ch in self.roster.channels.items()
        }
        if roster_kinds != set(self.config.devices):
            raise MachineError("device roster does not match the configuration")

    # -- state management ---------------------------------------------------

    def reset(self):
        """Fresh state: zero memory and registers, halted, clock at zero."""
        self.memory = [0] * self.config.memory_words
        self.acc = 0
        self.pc = 0
        self.ir = 0
        self.mar = 0
        self.mdr = 0
        self.overflow = 0
        self.status = STATUS_HALTED
        self.breakpoints = set()
        self.sim_time_us = 0
        self._bp_pass = None
        self._pending_execute = False
        self._stop_flag = False
        self._last_report = None

    def start(self):
        """The operator's start switch: arm a halted or paused machine."""
        if self.status == STATUS_PAUSED:
            # allow the watched address to execute once on resume
            self._bp_pass = self.pc
        self.status = STATUS_RUNNING
        self._stop_flag = False

    def pause(self):
        """Operator pause: running -> paused (halted stays halted)."""
        if self.status == STATUS_RUNNING:
            self.status = STATUS_PAUSED

    # -- command queue ------------------------------------------------------

    def post(self, command, *args):
        """Queue a control input; applied at the next microword boundary.
        Safe from any thread.  When no executor is active the command is
        applied immediately by the calling thread."""
        self._commands.append((command, *args))
        if self._idle_drain.acquire(blocking=False):
            try:
                self._drain()
            finally:
                self._idle_drain.release()

    def _drain(self):
        while self._commands:
            cmd = self._commands.popleft()
            name = cmd[0]
            if name == "set_breakpoint":
                addr = cmd[1]
                if not 0 <= addr < self.config.memory_words:
                    raise MachineError(f"breakpoint address out of range: {addr}")
                self.breakpoints.add(addr)
            elif name == "clear_breakpoint":
                self.breakpoints.discard(cmd[1])
            elif name == "stop":
                self._stop_flag = True
            elif name == "deposit":
                addr, word = cmd[1], cmd[2]
                if not 0 <= addr < self.config.memory_words:
                    raise MachineError(f"deposit address out of range: {addr}")
                self.memory[addr] = word & WORD_MASK
            elif name == "mount_tape":
                self.roster.get(cmd[1]).mount(cmd[2])
            else:
                raise MachineError(f"unknown command {name!r}")

    def set_breakpoint(self, addr: int):
        self.post("set_breakpoint", addr)

    def clear_breakpoint(self, addr: int):
        self.post("clear_breakpoint", addr)

    def request_stop(self):
        self.post("stop")

    def deposit(self, addr: int, word: int):
        self.post("deposit", addr, word)

    def examine(self, addr: int) -> int:
        if not 0 <= addr < self.config.memory_words:
            raise MachineError(f"examine address out of range: {addr}")
        return self.memory[addr]

    def mount_tape(self, channel: int, tape: devices.TapeImage):
        self.post("mount_tape", channel, tape)

    # -- the datapath -------------------------------------------------------

    def _alu_add(self, a, b, cin):
        """Add through the gate-level lookahead network (its three
        tabulated stages, unrolled); sets the sticky overflow flag on
        signed wraparound.  b arrives already complemented for
        subtraction, so the effective-addend sign test is uniform."""
        _base, _n, _m, table0 = self._t0
        packed = table0[(cin << 12) | ((a & 63) << 6) | (b & 63)]
        total = packed & 63
        _base, _n, _m, table1 = self._t1
        packed = table1[
            ((packed >> 6) << 12) | (((a >> 6) & 63) << 6) | ((b >> 6) & 63)
        ]
        total |= (packed & 63) << 6
        _base, _n, _m, table2 = self._t2
        packed = table2[
            ((packed >> 6) << 12) | (((a >> 12) & 63) << 6) | ((b >> 12) & 63)
        ]
        total |= (packed & 63) << 12
        if (a ^ b) & SIGN_BIT == 0 and (total ^ a) & SIGN_BIT:
            self.overflow = 1
        return total

    def _microword(self, mask, duration_us):
        """Apply one control row.  Effects follow the documented datapath
        order; all 18 bits of every register update at once, and no state
        is observable until the row completes."""
        extra_us = 0
        acc = self.acc
        mar = self.mar
        mdr = self.mdr
        ir_fields = self.ir
        address = ir_fields & ADDR_MASK
        opcode = ir_fields >> _OP_SHIFT
        if mask & _MAR_FROM_PC:
            mar = self.pc
        if mask & _MAR_FROM_ADDR:
            mar = address
        if mask & _MEM_READ:
            mdr = self.memory[mar]
        if mask & _IR_LOAD:
            self.ir = mdr
        acc_in = None
        if mask & _IO_STROBE:
            channel = (ir_fields >> _MOD_SHIFT) & (isa.MODIFIER_COUNT - 1)
            if self._sem[opcode] == "io_read":
                frame, extra_us = self.roster.transfer(channel, "read")
                acc_in = frame
            else:
                _, extra_us = self.roster.transfer(
                    channel, "write", acc & devices.FRAME_MASK
                )
        if mask & _ALU_ANY:
            if mask & _ALU_ADD:
                acc_in = self._alu_add(acc, mdr, 0)
            elif mask & _ALU_SUB:
                acc_in = self._alu_add(acc, ~mdr & WORD_MASK, 1)
            elif mask & _ALU_AND:
                acc_in = acc & mdr
            elif mask & _ALU_IOR:
                acc_in = acc | mdr
            elif mask & _ALU_XOR:
                acc_in = acc ^ mdr
            elif mask & _ALU_SHL:
                acc_in = (acc << 1) & WORD_MASK
                if (acc_in ^ acc) & SIGN_BIT and self._sem[opcode] == "shift_left_arith":
                    self.overflow = 1
            else:  # ALU_SHR
                acc_in = acc >> 1
                if self._sem[opcode] == "shift_right_arith":
                    acc_in |= acc & SIGN_BIT
        if mask & _MDR_TO_ACC:
            acc_in = mdr
        if mask & _ACC_CLEAR:
            acc = 0
        if mask & _ACC_COMPLEMENT:
            acc = ~acc & WORD_MASK
        if acc_in is not None and mask & _ACC_LOAD:
            acc = acc_in
        if mask & _ACC_TO_MDR:
            mdr = acc
        if mask & _ADDR_FIELD_WRITE:
            # read-modify-rewrite within the destructive core cycle
            mdr = (mdr & ~ADDR_MASK) | (acc & ADDR_MASK)
            self.memory[mar] = mdr
        if mask & _MEM_WRITE:
            self.memory[mar] = mdr
        if mask & _PC_INCREMENT:
            self.pc = (self.pc + 1) & ADDR_MASK
        if mask & _PC_FROM_ADDR:
            take = True
            if mask & _COND_ANY:
                if mask & _COND_ZERO:
                    take = acc == 0
                elif mask & _COND_NEG:
                    take = bool(acc & SIGN_BIT)
                else:  # COND_OVF: reading the sticky flag clears it
                    take = bool(self.overflow)
                    self.overflow = 0
            if take:
                self.pc = address
        if mask & _HALT:
            self.status = STATUS_HALTED
        if mask & _BREAK:
            self.status = STATUS_PAUSED
        self.acc = acc
        self.mar = mar
        self.mdr = mdr
        self.sim_time_us += duration_us + extra_us

    # -- stepping -----------------------------------------------------------

    def step_microword(self) -> dict:
        """Advance by a single microword (panel step_micro).  Alternates
        fetch and execute phases."""
        if self._commands:
            self._drain()
        if self.status == STATUS_HALTED:
            raise HaltedError("machine is halted; press start first")
        if not self._pending_execute:
            before = self.sim_time_us
            self._microword(self._fetch_mask, self._fetch_us)
            self._pending_execute = True
            return {"phase": "fetch", "duration_us": self.sim_time_us - before}
        opcode = self.ir >> _OP_SHIFT
        before = self.sim_time_us
        self._microword(self._row_mask[opcode], self._row_us[opcode])
        self._pending_execute = False
        return {"phase": "execute", "duration_us": self.sim_time_us - before}

    def step_instruction(self) -> StepReport:
        """Execute exactly one instruction: one fetch plus one execute
        microword.  Stepping a halted machine raises HaltedError."""
        if self._commands:
            self._drain()
        if self.status == STATUS_HALTED:
            raise HaltedError("machine is halted; press start first")
        pc_before = self.pc
        t0 = self.sim_time_us
        if self._pending_execute:
            # finish an instruction begun by step_microword
            word = self.ir
            fetch_us = 0
        else:
            self._microword(self._fetch_mask, self._fetch_us)
            word = self.ir
            fetch_us = self.sim_time_us - t0
        opcode = word >> _OP_SHIFT
        t1 = self.sim_time_us
        self._microword(self._row_mask[opcode], self._row_us[opcode])
        self._pending_execute = False
        entry = self.table[opcode]
        warnings = ()
        if entry.semantics == "spare":
            warnings = (f"spare opcode {opcode:02o} ({entry.mnemonic}) executed as NOP",)
        self._last_report = report = StepReport(
            pc_before=pc_before,
            pc_after=self.pc,
            word=word,
            opcode=opcode,
            mnemonic=entry.mnemonic,
            disassembly=isa.disassemble(word, self.table),
            microwords=(("fetch", fetch_us), ("execute", self.sim_time_us - t1)),
            elapsed_us=self.sim_time_us - t0,
            status=self.status,
            warnings=warnings,
        )
        return report

    @property
    def last_report(self):
        return self._last_report

    def run(self, max_instructions: int | None = None,
            max_sim_us: int | None = None) -> RunReport:
        """Run until HLT, a breakpoint fires on fetch, a stop request
        arrives, or a limit is reached.  Requires a started machine."""
        for name, limit in (("max_instructions", max_instructions),
                            ("max_sim_us", max_sim_us)):
            if limit is not None and limit <= 0:
                raise MachineError(f"{name} must be positive, got {limit}")
        if self.status == STATUS_HALTED:
            raise HaltedError("machine is halted; press start first")
        if self.status != STATUS_RUNNING:
            raise MachineError("machine is paused; press start first")
        t0 = self.sim_time_us
        executed = 0
        # hot locals for the two-microword loop
        commands = self._commands
        breakpoints = self.breakpoints
        fetch_mask = self._fetch_mask
        fetch_us = self._fetch_us
        row_mask = self._row_mask
        row_us = self._row_us
        microword = self._microword
        reason = None
        if self._pending_execute:
            # a step_micro left an instruction half done: finish it
            opcode = self.ir >> _OP_SHIFT
            microword(row_mask[opcode], row_us[opcode])
            self._pending_execute = False
            executed = 1
        while True:
            if self.status != STATUS_RUNNING:
                reason = (
                    "halted" if self.status == STATUS_HALTED else "break_instruction"
                )
                break
            if commands:
                self._drain()
            if self._stop_flag:
                self._stop_flag = False
                self.status = STATUS_PAUSED
                reason = "stopped"
                break
            if max_instructions is not None and executed >= max_instructions:
                reason = "max_instructions"
                break
            if max_sim_us is not None and self.sim_time_us - t0 >= max_sim_us:
                reason = "max_sim_us"
                break
            if breakpoints:
                pc = self.pc
                if pc in breakpoints and pc != self._bp_pass:
                    self.status = STATUS_PAUSED
                    reason = "breakpoint"
                    break
            self._bp_pass = None
            microword(fetch_mask, fetch_us)
            if commands:
                self._drain()
            opcode = self.ir >> _OP_SHIFT
            microword(row_mask[opcode], row_us[opcode])
            executed += 1
        return RunReport(
            reason=reason,
            instructions=executed,
            elapsed_us=self.sim_time_us - t0,
            sim_time_us=self.sim_time_us,
            pc=self.pc,
        )

    # -- boot ---------------------------------------------------------------

    def boot_load(self, tape: devices.TapeImage):
        """Deposit a tape directly into memory from address 0, without
        executing a single instruction, charging the reader's transfer
        time to the clock.  The machine stays halted; the operator then
        presses start."""
        if self.status != STATUS_HALTED:
            raise MachineError("boot requires a halted machine")
        if not tape.frames:
            raise devices.TapeError("empty tape: nothing to boot")
        words = devices.decode_tape(tape)
        if len(words) > self.config.memory_words:
            raise devices.TapeError(
                f"tape holds {len(words)} words, memory only "
                f"{self.config.memory_words}"
            )
        for addr, word in enumerate(words):
            self.memory[addr] = word
        self.pc = 0
        reader = self.roster.get(BOOT_CHANNEL)
        self.sim_time_us += len(tape.frames) * reader.frame_us
        return len(words)

    # -- observation --------------------------------------------------------

    def plane_view(self, plane_index: int) -> PlaneView:
        if not 0 <= plane_index < self.config.plane_count:
            raise MachineError(f"plane index out of range: {plane_index}")
        memory = self.memory
        cols = self.config.plane_cols
        bits = tuple(
            tuple((memory[y * cols + x] >> plane_index) & 1 for x in range(cols))
            for y in range(self.config.plane_rows)
        )
        return PlaneView(plane_index, bits)

    def snapshot(self) -> Snapshot:
        return Snapshot(
            acc=self.acc,
            pc=self.pc,
            ir=self.ir,
            mar=self.mar,
            mdr=self.mdr,
            overflow=self.overflow,
            status=self.status,
            sim_time_us=self.sim_time_us,
            breakpoints=tuple(sorted(self.breakpoints)),
            memory=tuple(self.memory),
            devices=tuple(self.roster.summary()),
        )

    def dump_state(self) -> str:
        """Bit-exact text rendering of the machine state (golden format):
        registers in octal, memory as 32 lines of 32 six-digit words."""
        lines = [
            f"ACC {isa.octal_word(self.acc)}",
            f"PC {isa.octal_addr(self.pc)}",
            f"IR {isa.octal_word(self.ir)}",
            f"MAR {isa.octal_addr(self.mar)}",
            f"MDR {isa.octal_word(self.mdr)}",
            f"OVF {self.overflow}",
            f"STATUS {self.status}",
            f"SIM_TIME_US {self.sim_time_us}",
            "MEMORY",
        ]
        for base in range(0, self.config.memory_words, 32):
            lines.append(
                " ".join(isa.octal_word(w) for w in self.memory[base : base + 32])
            )
        return "\n".join(lines) + "\n"

    def memory_hash(self) -> str:
        digest = hashlib.sha256()
        for word in self.memory:
            digest.update(word.to_bytes(3, "big"))
        return digest.hexdigest()
