"""The two-row control matrix and its structural invariants."""

import pytest

from mr1957 import isa, microcode
from mr1957.microcode import (
    ControlLine,
    MicroWord,
    RomError,
    default_rom,
    format_rom,
    load_rom,
    microstep_cost,
    validate_rom,
)


@pytest.fixture(scope="module")
def rom():
    return default_rom()


@pytest.fixture(scope="module")
def table():
    return isa.default_table()


def test_default_rom_zero_diagnostics(rom):
    assert validate_rom(rom) == []


def test_costs(rom, table):
    assert microstep_cost(rom, table.by_mnemonic("ADD").opcode) == 16  # 62500/s
    assert microstep_cost(rom, table.by_mnemonic("JMP").opcode) == 12
    assert microstep_cost(rom, table.by_mnemonic("HLT").opcode) == 12


def test_every_cost_is_12_or_16(rom):
    costs = {microstep_cost(rom, op) for op in range(32)}
    assert costs == {12, 16}
    # sustained throughput therefore sits in [62500, 83333] per second
    assert 1_000_000 // 16 == 62_500
    assert 1_000_000 // 12 == 83_333


def test_fetch_row(rom):
    required = (
        ControlLine.MEM_READ
        | ControlLine.IR_LOAD
        | ControlLine.MAR_FROM_PC
        | ControlLine.PC_INCREMENT
    )
    assert rom.fetch.asserted & required == required
    assert rom.fetch.duration_us == 8


def test_duration_classes_agree_with_isa_table(rom, table):
    for entry in table.entries:
        assert rom.execute[entry.opcode].duration_us == entry.duration_us, entry.mnemonic


def test_rom_round_trip(rom):
    again = load_rom(format_rom(rom))
    assert again == rom


def test_missing_execute_row():
    lines = format_rom(default_rom()).splitlines()
    dropped = [l for l in lines if not l.startswith("07")]
    with pytest.raises(RomError, match="missing execute row for opcode 07"):
        load_rom("\n".join(dropped))


def test_duplicate_row():
    text = format_rom(default_rom()) + "\n05 dur=8  MAR_FROM_ADDR MEM_READ ALU_AND ACC_LOAD\n"
    with pytest.raises(RomError, match="duplicate row"):
        load_rom(text)


def _edit_row(text, label, edit):
    lines = []
    for line in text.splitlines():
        if line.startswith(label):
            line = edit(line)
        lines.append(line)
    return "\n".join(lines)


def test_memory_read_with_wrong_duration():
    text = _edit_row(
        format_rom(default_rom()), "01 ", lambda l: l.replace("dur=8", "dur=4")
    )
    with pytest.raises(RomError, match="8 us core cycle"):
        load_rom(text)


def test_fetch_without_pc_increment():
    text = _edit_row(
        format_rom(default_rom()), "FETCH",
        lambda l: l.replace(" PC_INCREMENT", ""),
    )
    with pytest.raises(RomError, match="PC_INCREMENT"):
        load_rom(text)


def test_halt_also_jumps_is_linted():
    word = MicroWord(ControlLine.HALT | ControlLine.PC_FROM_ADDR, 4)
    rom = microcode.MicroRom(default_rom().fetch,
                             (word,) + default_rom().execute[1:])
    diagnostics = validate_rom(rom)
    assert any("halt also jumps" in str(d) for d in diagnostics)


def test_microword_violations():
    both = MicroWord(ControlLine.MEM_READ | ControlLine.MEM_WRITE, 8)
    assert any("both" in v for v in both.violations())
    two_alu = MicroWord(ControlLine.ALU_ADD | ControlLine.ALU_SUB, 4)
    assert any("ALU" in v for v in two_alu.violations())
    slow = MicroWord(ControlLine(0), 8)
    assert any("4 us" in v for v in slow.violations())
    bad = MicroWord(ControlLine(0), 6)
    assert any("4 or 8" in v for v in bad.violations())


def test_unknown_control_line():
    with pytest.raises(RomError, match="unknown control line"):
        load_rom("FETCH dur=8  MEM_READ IR_LOAD MAR_FROM_PC PC_INCREMENT FROB\n")


def test_load_reports_every_problem_row():
    # two problems in one file: both reported in one error
    text = _edit_row(
        format_rom(default_rom()), "26", lambda l: l.replace("dur=4", "dur=zz")
    )
    dropped = [l for l in text.splitlines() if not l.startswith("31")]
    with pytest.raises(RomError) as err:
        load_rom("\n".join(dropped))
    message = str(err.value)
    assert "missing execute row for opcode 31" in message
    assert "bad duration" in message


def test_rom_is_pure_lookup(rom):
    # the ROM carries no state: same opcode, same row object
    assert rom.execute[5] is rom.execute[5]
    assert len(rom.execute) == 32
