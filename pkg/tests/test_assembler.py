"""Two-pass assembly, listings, and region disassembly."""

import pytest

from mr1957 import devices, isa
from mr1957.assembler import (
    AsmError,
    assemble,
    assemble_library,
    disassemble_region,
    library_source,
)
from mr1957.machine import Machine

from conftest import GOLDEN


def test_single_halt():
    out = assemble("        ORG 0\n        HLT\n        END\n")
    assert out.words == ((0, 0),)
    assert out.origin == 0


def test_forward_reference():
    out = assemble(
        "        ORG 0\n"
        "        JMP L\n"
        "L:      HLT\n"
        "        END\n"
    )
    table = isa.default_table()
    jmp = table.by_mnemonic("JMP").opcode
    assert out.words[0] == (0, isa.encode(isa.Instruction(jmp, 0, 1)))
    assert out.symbols["L"] == 1


def test_undefined_label_named_with_line():
    with pytest.raises(AsmError, match=r"line 2.*'NOWHERE'"):
        assemble("        ORG 0\n        JMP NOWHERE\n        END\n")


def test_duplicate_label():
    with pytest.raises(AsmError, match="duplicate label"):
        assemble("A:      HLT\nA:      HLT\n        END\n")


def test_unknown_mnemonic():
    with pytest.raises(AsmError, match="FROB"):
        assemble("        FROB 1\n        END\n")


def test_operand_out_of_range():
    with pytest.raises(AsmError, match="address out of range"):
        assemble("        JMP 2000\n        END\n")
    with pytest.raises(AsmError, match="channel out of range"):
        assemble("        RDC 10\n        END\n")


def test_missing_end():
    with pytest.raises(AsmError, match="END"):
        assemble("        HLT\n")


def test_statement_after_end():
    with pytest.raises(AsmError, match="after END"):
        assemble("        HLT\n        END\n        HLT\n")


def test_org_overlap_rejected():
    src = (
        "        ORG 0\n        HLT\n        HLT\n"
        "        ORG 1\n        HLT\n        END\n"
    )
    with pytest.raises(AsmError, match="overlap"):
        assemble(src)


def test_equ_and_expressions():
    out = assemble(
        "BASE:   EQU 100\n"
        "        ORG 0\n"
        "        LDA BASE+2\n"
        "        STA BASE-1\n"
        "        DATA -1\n"
        "        DATA BASE\n"
        "        END\n"
    )
    table = isa.default_table()
    lda = table.by_mnemonic("LDA").opcode
    sta = table.by_mnemonic("STA").opcode
    words = dict(out.words)
    assert words[0] == isa.encode(isa.Instruction(lda, 0, 0o102))
    assert words[1] == isa.encode(isa.Instruction(sta, 0, 0o077))
    assert words[2] == 0o777777
    assert words[3] == 0o100


def test_device_and_modifier_syntax():
    out = assemble(
        "        ORG 0\n"
        "        RDC 4\n"
        "        WRC 0\n"
        "        ADD 144,3\n"
        "        END\n"
    )
    table = isa.default_table()
    words = dict(out.words)
    assert isa.decode(words[0]).modifier == 4
    assert isa.decode(words[1]).modifier == 0
    instr = isa.decode(words[2])
    assert (instr.modifier, instr.address) == (3, 0o144)


def test_comments_and_blank_lines():
    out = assemble("; nothing\n\n        ORG 0\n        HLT ; stop\n        END\n")
    assert out.words == ((0, 0),)


def test_deterministic_output():
    source = library_source()
    a = assemble(source)
    b = assemble(source)
    assert a.words == b.words
    assert a.listing == b.listing
    assert devices.tape_to_bytes(a.tape) == devices.tape_to_bytes(b.tape)


def test_listing_columns():
    out = assemble("        ORG 0\nGO:     HLT\n        END\n")
    lines = out.listing.splitlines()
    assert lines[1].startswith("0000 000000  ")
    assert "GO:" in lines[1]


def test_library_assembles_to_golden_tape():
    out = assemble_library()
    golden = (GOLDEN / "arith.tape").read_bytes()
    assert devices.tape_to_bytes(out.tape) == golden


def test_assemble_boot_dump_loader_correctness():
    out = assemble_library()
    m = Machine()
    m.boot_load(out.tape)
    for addr, word in out.words:
        assert m.memory[addr] == word


def test_tape_covers_exactly_the_image():
    out = assemble("        ORG 2\n        HLT\n        DATA 7\n        END\n")
    assert devices.decode_tape(out.tape) == [0, 0, 0, 7]
    assert out.origin == 2


# -- region disassembly ----------------------------------------------------------


def test_disassemble_region_round_trip():
    out = assemble_library()
    m = Machine()
    m.boot_load(out.tape)
    top = max(addr for addr, _ in out.words) + 1
    text = disassemble_region(m.memory, 0, top)
    again = assemble(text)
    assert dict(again.words) == {a: w for a, w in enumerate(m.memory[:top])}


def test_disassemble_all_zero_region():
    text = disassemble_region([0] * 4, 0, 4)
    body = [l.strip() for l in text.splitlines()[1:-1]]
    assert body == ["HLT"] * 4


def test_disassemble_data_words():
    # a spare opcode and stray modifier bits render as DATA
    table = isa.default_table()
    spare = isa.encode(isa.Instruction(table.by_mnemonic("SP0").opcode, 0, 5))
    odd = isa.encode(isa.Instruction(table.by_mnemonic("LDA").opcode, 3, 5))
    text = disassemble_region([spare, odd, 0o777777], 0, 3)
    body = [l.strip() for l in text.splitlines()[1:-1]]
    assert body == [f"DATA {spare:06o}", f"DATA {odd:06o}", "DATA 777777"]


def test_disassemble_region_bounds():
    with pytest.raises(isa.IsaError):
        disassemble_region([0] * 4, 2, 9)
