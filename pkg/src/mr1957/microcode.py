"""The diode-matrix microprogrammed control.

Every instruction runs as exactly two microwords: the shared fetch row
and one execute row per opcode.  A microword is a set of asserted
control lines plus a duration of 4 or 8 microseconds; the 8 us class is
tied to a core-memory access cycle (destructive read plus rewrite), so
a row lasts 8 us exactly when it asserts MEM_READ or MEM_WRITE.  The
ROM is serialized as a text matrix where removing a diode is literally
deleting a token from a row.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from importlib import resources


class ControlLine(enum.IntFlag):
    MEM_READ = enum.auto()
    MEM_WRITE = enum.auto()
    ALU_ADD = enum.auto()
    ALU_SUB = enum.auto()
    ALU_AND = enum.auto()
    ALU_IOR = enum.auto()
    ALU_XOR = enum.auto()
    ALU_SHL = enum.auto()
    ALU_SHR = enum.auto()
    ACC_LOAD = enum.auto()
    ACC_CLEAR = enum.auto()
    ACC_COMPLEMENT = enum.auto()
    MAR_FROM_PC = enum.auto()
    MAR_FROM_ADDR = enum.auto()
    MDR_TO_ACC = enum.auto()
    ACC_TO_MDR = enum.auto()
    IR_LOAD = enum.auto()
    PC_INCREMENT = enum.auto()
    PC_FROM_ADDR = enum.auto()
    COND_ZERO = enum.auto()
    COND_NEG = enum.auto()
    COND_OVF = enum.auto()
    ADDR_FIELD_WRITE = enum.auto()
    IO_STROBE = enum.auto()
    HALT = enum.auto()
    BREAK = enum.auto()


ALU_LINES = (
    ControlLine.ALU_ADD
    | ControlLine.ALU_SUB
    | ControlLine.ALU_AND
    | ControlLine.ALU_IOR
    | ControlLine.ALU_XOR
    | ControlLine.ALU_SHL
    | ControlLine.ALU_SHR
)

MEM_LINES = ControlLine.MEM_READ | ControlLine.MEM_WRITE

FETCH_REQUIRED = (
    ControlLine.MEM_READ
    | ControlLine.IR_LOAD
    | ControlLine.MAR_FROM_PC
    | ControlLine.PC_INCREMENT
)

EXECUTE_ROWS = 32


class RomError(ValueError):
    """Unloadable control ROM; carries one message per problem row."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class MicroWord:
    """One row of the control matrix."""

    asserted: ControlLine
    duration_us: int

    def lines(self) -> list[ControlLine]:
        return [line for line in ControlLine if line & self.asserted]

    def violations(self) -> list[str]:
        out = []
        if self.duration_us not in (4, 8):
            out.append(f"duration must be 4 or 8, got {self.duration_us}")
        touches_memory = bool(self.asserted & MEM_LINES)
        if touches_memory and self.duration_us != 8:
            out.append("memory access requires the 8 us core cycle")
        if not touches_memory and self.duration_us != 4:
            out.append("row without memory access must take 4 us")
        if (self.asserted & ControlLine.MEM_READ) and (
            self.asserted & ControlLine.MEM_WRITE
        ):
            out.append("MEM_READ and MEM_WRITE both asserted")
        alu = self.asserted & ALU_LINES
        if alu and bin(alu.value).count("1") > 1:
            out.append("more than one ALU line asserted")
        return out


@dataclass(frozen=True)
class MicroRom:
    """Shared fetch row plus one execute row per opcode.  Pure lookup:
    executing any instruction issues these two microwords and nothing
    else."""

    fetch: MicroWord
    execute: tuple[MicroWord, ...]

    def __post_init__(self):
        if len(self.execute) != EXECUTE_ROWS:
            raise RomError([f"need {EXECUTE_ROWS} execute rows, got {len(self.execute)}"])


def microstep_cost(rom: MicroRom, opcode: int) -> int:
    """Total microseconds to execute one instruction of this opcode."""
    return rom.fetch.duration_us + rom.execute[opcode].duration_us


@dataclass(frozen=True)
class RomDiagnostic:
    severity: str  # "error" | "warning"
    row: str       # "FETCH" or the octal opcode
    message: str

    def __str__(self):
        return f"{self.severity}: row {self.row}: {self.message}"


def validate_rom(rom: MicroRom) -> list[RomDiagnostic]:
    """Structural check of the ROM; empty list means all invariants hold.

    Semantics are exercised in the machine tests, not here.
    """
    out = []

    def err(row, msg):
        out.append(RomDiagnostic("error", row, msg))

    def warn(row, msg):
        out.append(RomDiagnostic("warning", row, msg))

    for msg in rom.fetch.violations():
        err("FETCH", msg)
    missing = FETCH_REQUIRED & ~rom.fetch.asserted
    for line in ControlLine:
        if line & missing:
            err("FETCH", f"fetch must assert {line.name}")
    for opcode, row in enumerate(rom.execute):
        name = f"{opcode:02o}"
        for msg in row.violations():
            err(name, msg)
        if (row.asserted & ControlLine.HALT) and (
            row.asserted & ControlLine.PC_FROM_ADDR
        ):
            warn(name, "halt also jumps")
        cond = row.asserted & (
            ControlLine.COND_ZERO | ControlLine.COND_NEG | ControlLine.COND_OVF
        )
        if cond and not (row.asserted & ControlLine.PC_FROM_ADDR):
            warn(name, "condition line asserted without PC_FROM_ADDR")
    return out


def _parse_row(fields, lineno, problems):
    if len(fields) < 2 or not fields[1].startswith("dur="):
        problems.append(f"line {lineno}: expected '<row> dur=<4|8> [lines...]'")
        return None
    try:
        duration = int(fields[1][4:])
    except ValueError:
        problems.append(f"line {lineno}: bad duration {fields[1]!r}")
        return None
    asserted = ControlLine(0)
    for token in fields[2:]:
        try:
            asserted |= ControlLine[token]
        except KeyError:
            problems.append(f"line {lineno}: unknown control line {token!r}")
            return None
    return MicroWord(asserted, duration)


def load_rom(text: str) -> MicroRom:
    """Parse and validate a ROM text file; raises RomError with one
    message per problem row."""
    problems = []
    fetch = None
    execute = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        word = _parse_row(fields, lineno, problems)
        if word is None:
            continue
        if fields[0] == "FETCH":
            if fetch is not None:
                problems.append(f"line {lineno}: duplicate FETCH row")
                continue
            fetch = word
        else:
            try:
                opcode = int(fields[0], 8)
            except ValueError:
                problems.append(f"line {lineno}: bad row label {fields[0]!r}")
                continue
            if not 0 <= opcode < EXECUTE_ROWS:
                problems.append(f"line {lineno}: opcode {fields[0]} out of range")
                continue
            if opcode in execute:
                problems.append(f"line {lineno}: duplicate row for opcode {opcode:02o}")
                continue
            execute[opcode] = word
    if fetch is None:
        problems.append("missing FETCH row")
    for opcode in range(EXECUTE_ROWS):
        if opcode not in execute:
            problems.append(f"missing execute row for opcode {opcode:02o}")
    if problems:
        raise RomError(problems)
    rom = MicroRom(fetch, tuple(execute[i] for i in range(EXECUTE_ROWS)))
    errors = [str(d) for d in validate_rom(rom) if d.severity == "error"]
    if errors:
        raise RomError(errors)
    return rom


def format_rom(rom: MicroRom) -> str:
    lines = []

    def row(label, word):
        names = " ".join(line.name for line in word.lines())
        lines.append(f"{label:<5} dur={word.duration_us}  {names}".rstrip())

    row("FETCH", rom.fetch)
    for opcode, word in enumerate(rom.execute):
        row(f"{opcode:02o}", word)
    return "\n".join(lines) + "\n"


def default_rom() -> MicroRom:
    """The control matrix shipped with the package."""
    text = resources.files("mr1957").joinpath("data/microcode_default.rom").read_text()
    return load_rom(text)
