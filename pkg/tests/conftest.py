import pathlib

import pytest

from mr1957 import isa, machine

GOLDEN = pathlib.Path(__file__).parent / "golden"


@pytest.fixture
def m():
    return machine.Machine()


def encode_op(table, mnemonic, address=0, modifier=0):
    entry = table.by_mnemonic(mnemonic)
    return isa.encode(isa.Instruction(entry.opcode, modifier, address))
