"""Word format, instruction encoding, and the reconstructed instruction set.

Machine words are plain ints kept in [0, 2^18); the canonical text
rendering is six octal digits.  An instruction packs a 5-bit opcode
(bits 17..13), a 3-bit modifier (bits 12..10, used as the device
channel by I/O instructions), and a 10-bit address (bits 9..0).  The
split is forced by the machine's 32 opcodes and 1024-word memory; the
modifier assignment and all mnemonics are a documented reconstruction
(see docs/isa-reconstruction.md), revisable by loading an alternative
table file.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

WORD_BITS = 18
WORD_MASK = (1 << WORD_BITS) - 1
SIGN_BIT = 1 << (WORD_BITS - 1)

OPCODE_BITS = 5
MODIFIER_BITS = 3
ADDRESS_BITS = 10
OPCODE_COUNT = 1 << OPCODE_BITS
MODIFIER_COUNT = 1 << MODIFIER_BITS
ADDRESS_COUNT = 1 << ADDRESS_BITS
ADDRESS_MASK = ADDRESS_COUNT - 1

OPERAND_CLASSES = ("memory", "device", "none")

# Semantic tags the machine's execution unit understands.  The tag
# "jump_subroutine" is recognized only so the table validator can
# reject it: this machine links subroutines by address substitution.
SEMANTIC_TAGS = frozenset(
    {
        "halt",
        "alu_add",
        "alu_sub",
        "load",
        "store",
        "alu_and",
        "alu_ior",
        "alu_xor",
        "acc_clear",
        "acc_complement",
        "shift_left_arith",
        "shift_right_arith",
        "shift_left_logic",
        "shift_right_logic",
        "jump",
        "jump_zero",
        "jump_neg",
        "jump_ovf",
        "addr_substitute",
        "io_read",
        "io_write",
        "nop",
        "break",
        "spare",
    }
)


class IsaError(ValueError):
    """Malformed instruction field or instruction table."""


def to_word(value: int) -> int:
    """Reduce any integer to an 18-bit word (two's complement wrap)."""
    return value & WORD_MASK


def signed(word: int) -> int:
    """Two's complement reading of an 18-bit word."""
    word &= WORD_MASK
    return word - (1 << WORD_BITS) if word & SIGN_BIT else word


def octal_word(word: int) -> str:
    return f"{word & WORD_MASK:06o}"


def octal_addr(addr: int) -> str:
    return f"{addr & ADDRESS_MASK:04o}"


@dataclass(frozen=True)
class Instruction:
    opcode: int
    modifier: int = 0
    address: int = 0

    def __post_init__(self):
        if not 0 <= self.opcode < OPCODE_COUNT:
            raise IsaError(f"opcode out of range: {self.opcode}")
        if not 0 <= self.modifier < MODIFIER_COUNT:
            raise IsaError(f"modifier out of range: {self.modifier}")
        if not 0 <= self.address < ADDRESS_COUNT:
            raise IsaError(f"address out of range: {self.address}")


def encode(instr: Instruction) -> int:
    return (
        (instr.opcode << (MODIFIER_BITS + ADDRESS_BITS))
        | (instr.modifier << ADDRESS_BITS)
        | instr.address
    )


def decode(word: int) -> Instruction:
    word &= WORD_MASK
    return Instruction(
        opcode=word >> (MODIFIER_BITS + ADDRESS_BITS),
        modifier=(word >> ADDRESS_BITS) & (MODIFIER_COUNT - 1),
        address=word & ADDRESS_MASK,
    )


@dataclass(frozen=True)
class OpEntry:
    opcode: int
    mnemonic: str
    operand_class: str
    duration_us: int
    semantics: str


@dataclass(frozen=True)
class IsaTable:
    """The 32-entry opcode table shared by machine, assembler and tools."""

    entries: tuple[OpEntry, ...]

    def __post_init__(self):
        if len(self.entries) != OPCODE_COUNT:
            raise IsaError(f"table needs {OPCODE_COUNT} entries, got {len(self.entries)}")
        seen = set()
        halts = 0
        for i, e in enumerate(self.entries):
            if e.opcode != i:
                raise IsaError(f"entry {i} carries opcode {e.opcode}")
            if e.mnemonic in seen:
                raise IsaError(f"duplicate mnemonic {e.mnemonic}")
            seen.add(e.mnemonic)
            if e.operand_class not in OPERAND_CLASSES:
                raise IsaError(f"{e.mnemonic}: bad operand class {e.operand_class!r}")
            if e.duration_us not in (4, 8):
                raise IsaError(f"{e.mnemonic}: duration must be 4 or 8")
            if e.semantics == "jump_subroutine":
                raise IsaError(
                    f"{e.mnemonic}: jump-to-subroutine is not part of this machine"
                )
            if e.semantics not in SEMANTIC_TAGS:
                raise IsaError(f"{e.mnemonic}: unknown semantics {e.semantics!r}")
            if e.semantics == "halt":
                halts += 1
        if halts != 1:
            raise IsaError(f"table must contain exactly one halt, found {halts}")

    def __getitem__(self, opcode: int) -> OpEntry:
        return self.entries[opcode]

    def by_mnemonic(self, mnemonic: str) -> OpEntry:
        for e in self.entries:
            if e.mnemonic == mnemonic:
                return e
        raise IsaError(f"unknown mnemonic {mnemonic}")

    def mnemonics(self) -> list[str]:
        return [e.mnemonic for e in self.entries]


def load_table(text: str) -> IsaTable:
    """Parse an instruction table file.

    One line per opcode: index, mnemonic, operand class, duration
    class, semantic tag.  '#' starts a comment.
    """
    rows = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 5:
            raise IsaError(f"line {lineno}: expected 5 fields, got {len(fields)}")
        try:
            index = int(fields[0], 8)
        except ValueError:
            raise IsaError(f"line {lineno}: bad opcode index {fields[0]!r}") from None
        if index in rows:
            raise IsaError(f"line {lineno}: duplicate opcode {index:02o}")
        try:
            duration = int(fields[3])
        except ValueError:
            raise IsaError(f"line {lineno}: bad duration {fields[3]!r}") from None
        rows[index] = OpEntry(index, fields[1], fields[2], duration, fields[4])
    missing = [i for i in range(OPCODE_COUNT) if i not in rows]
    if missing:
        raise IsaError(
            "missing opcodes: " + " ".join(f"{i:02o}" for i in missing)
        )
    return IsaTable(tuple(rows[i] for i in range(OPCODE_COUNT)))


def default_table() -> IsaTable:
    """The reconstruction shipped with the package."""
    text = resources.files("mr1957").joinpath("data/isa_default.tab").read_text()
    return load_table(text)


def disassemble(word: int, table: IsaTable) -> str:
    """One-line rendering of a word as an instruction.

    Total on all 2^18 words; the emitted line reassembles to the same
    word.  Memory-class operands are octal addresses, device-class
    operands are the channel number; fields the class does not use are
    appended after a comma only when nonzero.
    """
    instr = decode(word)
    entry = table[instr.opcode]
    if entry.operand_class == "memory":
        text = f"{entry.mnemonic} {octal_addr(instr.address)}"
        if instr.modifier:
            text += f",{instr.modifier}"
        return text
    if entry.operand_class == "device":
        text = f"{entry.mnemonic} {instr.modifier}"
        if instr.address:
            text += f",{octal_addr(instr.address)}"
        return text
    if instr.address or instr.modifier:
        return f"{entry.mnemonic} {octal_addr(instr.address)},{instr.modifier}"
    return entry.mnemonic
