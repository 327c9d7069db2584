"""Two-pass symbolic assembler and the arithmetic subroutine library.

The assembler is a modern convenience: the 1957 machine shipped only a
simple program loader and basic arithmetic subroutines, and programs
were written in machine language.  Source syntax (one statement per
line, octal numbers everywhere):

    LABEL:  MNEMONIC OPERAND   ; comment
            ORG 100            ; set location counter
    K1:     DATA BACK1+2       ; word initialized to an expression
    N:      EQU 17             ; symbol definition
            END                ; required terminator

Memory-class operands are an address expression (label, octal constant,
or label+/-octal), optionally followed by ",modifier".  Device-class
operands are the channel number, optionally ",address".  Expressions
for DATA may be negative (two's complement).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources

from . import devices, isa

MEMORY_WORDS = 1024


class AsmError(ValueError):
    def __init__(self, lineno, message):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}" if lineno else message)


@dataclass(frozen=True)
class Statement:
    lineno: int
    label: str | None
    op: str | None
    operand: str | None
    raw: str


@dataclass(frozen=True)
class AssemblyOutput:
    origin: int
    words: tuple          # (address, word) in address order
    tape: devices.TapeImage
    listing: str
    symbols: dict


_LABEL_RE = re.compile(r"^([A-Za-z][A-Za-z0-9_]*):")
_SYMBOL_RE = re.compile(r"^[A-Za-z][A-Za-z0-9_]*$")

DIRECTIVES = ("ORG", "DATA", "EQU", "END")


def _parse_line(raw: str, lineno: int) -> Statement | None:
    text = raw.split(";", 1)[0].rstrip()
    stripped = text.strip()
    if not stripped:
        return None
    label = None
    m = _LABEL_RE.match(stripped)
    if m:
        label = m.group(1)
        stripped = stripped[m.end():].strip()
    if not stripped:
        return Statement(lineno, label, None, None, raw)
    parts = stripped.split(None, 1)
    op = parts[0].upper()
    operand = parts[1].strip() if len(parts) > 1 else None
    return Statement(lineno, label, op, operand, raw)


class _Expr:
    """label +/- octal constant, or a plain (possibly negative) constant."""

    def __init__(self, text, lineno):
        self.lineno = lineno
        self.text = text
        m = re.match(
            r"^(-)?(?:([A-Za-z][A-Za-z0-9_]*)|([0-7]+))(?:\s*([+-])\s*([0-7]+))?$",
            text,
        )
        if not m:
            raise AsmError(lineno, f"cannot parse operand expression {text!r}")
        self.negate, self.symbol, const, sign, offset = m.groups()
        if self.negate and self.symbol:
            raise AsmError(lineno, f"cannot negate a label: {text!r}")
        self.base = int(const, 8) if const is not None else None
        self.offset = 0
        if offset is not None:
            self.offset = int(offset, 8) * (1 if sign == "+" else -1)

    def resolve(self, symbols) -> int:
        if self.symbol is not None:
            if self.symbol not in symbols:
                raise AsmError(self.lineno, f"undefined label {self.symbol!r}")
            value = symbols[self.symbol]
        else:
            value = -self.base if self.negate else self.base
        return value + self.offset


def _split_operand(operand, lineno):
    if operand is None:
        return None, None
    if "," in operand:
        first, second = operand.split(",", 1)
        return first.strip(), second.strip()
    return operand.strip(), None


def assemble(source: str, table: isa.IsaTable | None = None) -> AssemblyOutput:
    """Two passes: collect labels (forward references allowed), then
    encode.  Deterministic: identical source yields identical output."""
    table = table or isa.default_table()
    statements = []
    for lineno, raw in enumerate(source.splitlines(), 1):
        st = _parse_line(raw, lineno)
        if st is not None:
            statements.append(st)

    # pass 1: locations and symbols
    symbols: dict[str, int] = {}
    location = 0
    regions = []  # (start, end, lineno) of emitted stretches
    region_start = None
    saw_end = False

    def close_region():
        nonlocal region_start
        if region_start is not None and location > region_start:
            regions.append((region_start, location))
        region_start = None

    placed = []  # (statement, address or None)
    for st in statements:
        if saw_end and (st.op or st.label):
            raise AsmError(st.lineno, "statement after END")
        if st.label is not None and st.op != "EQU":
            if st.label in symbols:
                raise AsmError(st.lineno, f"duplicate label {st.label!r}")
            symbols[st.label] = location
        if st.op is None:
            placed.append((st, None))
            continue
        if st.op == "ORG":
            if st.operand is None:
                raise AsmError(st.lineno, "ORG needs an address")
            close_region()
            location = _Expr(st.operand, st.lineno).resolve(symbols)
            if not 0 <= location < MEMORY_WORDS:
                raise AsmError(st.lineno, f"ORG address out of range: {location:#o}")
            region_start = location
            placed.append((st, None))
        elif st.op == "EQU":
            if st.label is None:
                raise AsmError(st.lineno, "EQU needs a label")
            if st.label in symbols:
                raise AsmError(st.lineno, f"duplicate label {st.label!r}")
            if st.operand is None:
                raise AsmError(st.lineno, "EQU needs a value")
            symbols[st.label] = _Expr(st.operand, st.lineno).resolve(symbols)
            placed.append((st, None))
        elif st.op == "END":
            saw_end = True
            close_region()
            placed.append((st, None))
        else:
            if region_start is None:
                region_start = location
            if location >= MEMORY_WORDS:
                raise AsmError(st.lineno, "program runs past the end of memory")
            placed.append((st, location))
            location += 1
    if not saw_end:
        raise AsmError(len(statements) and statements[-1].lineno or 0,
                       "source has no END directive")
    close_region()
    regions.sort()
    for (s1, e1), (s2, e2) in zip(regions, regions[1:]):
        if s2 < e1:
            raise AsmError(0, f"ORG regions overlap at {s2:04o}")

    # pass 2: encode
    emitted: dict[int, int] = {}
    listing_lines = []

    def encode_statement(st, address):
        if st.op == "DATA":
            if st.operand is None:
                raise AsmError(st.lineno, "DATA needs a value")
            value = _Expr(st.operand, st.lineno).resolve(symbols)
            if not -(1 << 17) <= value < (1 << 18):
                raise AsmError(st.lineno, f"DATA value out of range: {value}")
            return isa.to_word(value)
        try:
            entry = table.by_mnemonic(st.op)
        except isa.IsaError:
            raise AsmError(st.lineno, f"unknown mnemonic {st.op!r}") from None
        first, second = _split_operand(st.operand, st.lineno)
        address_field = 0
        modifier = 0
        if entry.operand_class == "device":
            if first is None:
                raise AsmError(st.lineno, f"{st.op} needs a channel")
            modifier = _Expr(first, st.lineno).resolve(symbols)
            if not 0 <= modifier < isa.MODIFIER_COUNT:
                raise AsmError(st.lineno, f"channel out of range: {modifier}")
            if second is not None:
                address_field = _Expr(second, st.lineno).resolve(symbols)
        else:
            if first is not None:
                address_field = _Expr(first, st.lineno).resolve(symbols)
            elif entry.operand_class == "memory":
                raise AsmError(st.lineno, f"{st.op} needs an address")
            if second is not None:
                modifier = _Expr(second, st.lineno).resolve(symbols)
                if not 0 <= modifier < isa.MODIFIER_COUNT:
                    raise AsmError(st.lineno, f"modifier out of range: {modifier}")
        if not 0 <= address_field < isa.ADDRESS_COUNT:
            raise AsmError(st.lineno, f"address out of range: {address_field:#o}")
        return isa.encode(isa.Instruction(entry.opcode, modifier, address_field))

    for st, address in placed:
        if address is None or st.op in ("ORG", "EQU", "END") or st.op is None:
            listing_lines.append(f"{'':4} {'':6}  {st.raw.rstrip()}")
            continue
        word = encode_statement(st, address)
        emitted[address] = word
        listing_lines.append(f"{address:04o} {word:06o}  {st.raw.rstrip()}")

    if not emitted:
        raise AsmError(0, "program emits no words")
    origin = min(emitted)
    top = max(emitted)
    # boot-loadable image: contiguous from address 0, gaps zero-filled
    image = [emitted.get(addr, 0) for addr in range(0, top + 1)]
    tape = devices.encode_tape(image, note="assembled")
    return AssemblyOutput(
        origin=origin,
        words=tuple(sorted(emitted.items())),
        tape=tape,
        listing="\n".join(listing_lines) + "\n",
        symbols=dict(symbols),
    )


def disassemble_region(memory, start: int, end: int,
                       table: isa.IsaTable | None = None) -> str:
    """Re-assemblable listing of memory[start:end] (labels come out as
    numeric addresses).  Words that do not render as a canonical
    instruction (spare opcodes, stray field bits) become DATA, so the
    round trip preserves every bit."""
    table = table or isa.default_table()
    if not 0 <= start <= end <= len(memory):
        raise isa.IsaError(f"region {start}..{end} outside memory")
    lines = [f"        ORG {start:04o}"]
    for addr in range(start, end):
        word = memory[addr]
        instr = isa.decode(word)
        entry = table[instr.opcode]
        canonical = (
            entry.semantics != "spare"
            and (
                (entry.operand_class == "memory" and instr.modifier == 0)
                or (entry.operand_class == "device" and instr.address == 0)
                or (
                    entry.operand_class == "none"
                    and instr.modifier == 0
                    and instr.address == 0
                )
            )
        )
        if canonical:
            text = isa.disassemble(word, table)
        else:
            text = f"DATA {word:06o}"
        lines.append(f"        {text}")
    lines.append("        END")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# The subroutine library
# ---------------------------------------------------------------------------


class SuiteError(Exception):
    pass


def library_source() -> str:
    return resources.files("mr1957").joinpath("lib/arith.mra").read_text()


def assemble_library(table: isa.IsaTable | None = None) -> AssemblyOutput:
    return assemble(library_source(), table)


def run_subroutine_suite(machine, library: AssemblyOutput, pairs) -> list[dict]:
    """Boot the arithmetic library and drive multiply and divide over
    the given operand pairs, reading results from the convention cells.

    Divide-by-zero is handled by the assembly code itself (it sets the
    ERR cell); the emulator never intervenes.
    """
    sym = library.symbols
    for name in ("ARGA", "ARGB", "PROD", "QUOT", "REM", "ERR", "DRVMUL", "DRVDIV"):
        if name not in sym:
            raise SuiteError(f"library lacks required symbol {name}")
    machine.reset()
    machine.boot_load(library.tape)
    results = []
    for a, b in pairs:
        machine.deposit(sym["ARGA"], isa.to_word(a))
        machine.deposit(sym["ARGB"], isa.to_word(b))
        machine.pc = sym["DRVMUL"]
        machine.start()
        report = machine.run(max_instructions=200_000)
        if report.reason != "halted":
            raise SuiteError(f"multiply of ({a}, {b}) did not halt: {report.reason}")
        record = {"a": a, "b": b, "product": machine.examine(sym["PROD"])}
        machine.deposit(sym["ARGA"], isa.to_word(a))
        machine.deposit(sym["ARGB"], isa.to_word(b))
        machine.pc = sym["DRVDIV"]
        machine.start()
        report = machine.run(max_instructions=200_000)
        if report.reason != "halted":
            raise SuiteError(f"divide of ({a}, {b}) did not halt: {report.reason}")
        record["quotient"] = machine.examine(sym["QUOT"])
        record["remainder"] = machine.examine(sym["REM"])
        record["err"] = machine.examine(sym["ERR"])
        results.append(record)
    return results
