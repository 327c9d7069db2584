"""Emulator and toolchain for the Macchina Ridotta, the 1957 Pisa computer.

The package models the machine as built in its 1957 revision: an 18-bit
word, 1024 words of core memory in 18 single-sided 32x32 planes, 32
instructions sequenced by a two-row (fetch/execute) diode-matrix
control with 4 or 8 microsecond microinstructions, and the four
paper-tape/teletype devices of the original installation.  The ISA,
character code, and assembler syntax are documented reconstructions,
not recovered historical fact; see docs/isa-reconstruction.md.
"""

__version__ = "0.1.0"
