"""Command-line interface: assemble, run, trace, bench, dump, serve."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import assembler, devices, isa, machine as machine_mod, microcode, panel


def _load_isa(path):
    return isa.load_table(Path(path).read_text()) if path else isa.default_table()


def _load_rom(path):
    return microcode.load_rom(Path(path).read_text()) if path else microcode.default_rom()


def _build_machine(args):
    return machine_mod.Machine(
        rom=_load_rom(getattr(args, "rom", None)),
        table=_load_isa(getattr(args, "isa", None)),
    )


def _read_tape(path) -> devices.TapeImage:
    return devices.tape_from_bytes(Path(path).read_bytes())


def cmd_asm(args):
    source = Path(args.source).read_text()
    out = assembler.assemble(source, _load_isa(args.isa))
    tape_path = Path(args.output or Path(args.source).with_suffix(".tape"))
    tape_path.write_bytes(devices.tape_to_bytes(out.tape))
    if args.listing:
        Path(args.listing).write_text(out.listing)
    words = len(out.tape.frames) // devices.FRAMES_PER_WORD
    print(f"{tape_path}: {words} words, origin {out.origin:04o}", file=sys.stderr)
    return 0


def _boot_and_start(args, tape):
    m = _build_machine(args)
    m.boot_load(tape)
    m.start()
    return m


def cmd_run(args):
    m = _boot_and_start(args, _read_tape(args.tape))
    report = m.run(max_instructions=args.max_instr, max_sim_us=args.max_us)
    for channel in sorted(m.roster.channels):
        dev = m.roster.channels[channel]
        if dev.duty == "print" and dev.output:
            sys.stdout.write(dev.text())
    print(
        f"{report.reason}: {report.instructions} instructions, "
        f"{report.sim_time_us} us simulated, pc {isa.octal_addr(report.pc)} "
        f"acc {isa.octal_word(m.acc)}",
        file=sys.stderr,
    )
    if args.dump_state:
        Path(args.dump_state).write_text(m.dump_state())
    return 0


def cmd_trace(args):
    m = _boot_and_start(args, _read_tape(args.tape))
    limit = args.max_instr or 1_000_000
    for _ in range(limit):
        report = m.step_instruction()
        line = (
            f"{isa.octal_addr(report.pc_before)}  {report.disassembly:<16} "
            f"acc={isa.octal_word(m.acc)}  {report.elapsed_us:2d} us"
        )
        for warning in report.warnings:
            line += f"  ; {warning}"
        print(line)
        if m.status != machine_mod.STATUS_RUNNING:
            print(f"; {m.status} at pc {isa.octal_addr(m.pc)}", file=sys.stderr)
            break
    return 0


BENCH_FIXTURES = ("add-loop",)


def cmd_bench(args):
    if args.fixture != "add-loop":
        print(f"unknown fixture {args.fixture!r}; have: {BENCH_FIXTURES}", file=sys.stderr)
        return 2
    m = _build_machine(args)
    # every memory word is ADD 0: the program counter wraps through all
    # of core executing one memory-operand add per instruction
    add = isa.encode(isa.Instruction(m.table.by_mnemonic("ADD").opcode, 0, 0))
    for addr in range(m.config.memory_words):
        m.memory[addr] = add
    m.start()
    n = args.max_instr or 1_000_000
    report = m.run(max_instructions=n)
    rate = report.instructions * 1_000_000 / report.elapsed_us
    print(f"{rate:g} instructions/sec (simulated)")
    print(
        f"{report.instructions} instructions in {report.elapsed_us} us simulated",
        file=sys.stderr,
    )
    return 0


def cmd_dump(args):
    data = Path(args.file).read_bytes()
    if data.startswith(devices.TAPE_MAGIC):
        tape = devices.tape_from_bytes(data)
        words = devices.decode_tape(tape)
        table = _load_isa(args.isa)
        print(f"; tape {args.file}: {len(tape.frames)} frames, {len(words)} words")
        for addr, word in enumerate(words):
            print(f"{addr:04o} {word:06o}  {isa.disassemble(word, table)}")
    else:
        sys.stdout.write(data.decode("utf-8"))
    return 0


def cmd_serve(args):
    host, _, port = args.listen.rpartition(":")
    m = _build_machine(args)
    if args.tape:
        m.mount_tape(machine_mod.BOOT_CHANNEL, _read_tape(args.tape))
    server = panel.serve(
        m,
        host=host or "127.0.0.1",
        port=int(port),
        refresh_hz=args.refresh_hz,
        assets_dir=args.assets,
    )
    shost, sport = server.address
    print(f"panel protocol on {shost}:{sport} (raw TCP, WebSocket, HTTP)",
          file=sys.stderr)
    try:
        import threading

        threading.Event().wait()
    except KeyboardInterrupt:
        server.close()
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mr1957",
        description="Emulator and toolchain for the 1957 Macchina Ridotta",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("asm", help="assemble a source file to a boot tape")
    p.add_argument("source")
    p.add_argument("-o", "--output", help="tape file (default: source with .tape)")
    p.add_argument("--listing", help="write the assembly listing here")
    p.add_argument("--isa", help="alternative instruction table file")
    p.set_defaults(func=cmd_asm)

    p = sub.add_parser("run", help="boot a tape and run it")
    p.add_argument("tape")
    p.add_argument("--max-instr", type=int, default=1_000_000)
    p.add_argument("--max-us", type=int, default=None)
    p.add_argument("--rom", help="alternative control ROM file")
    p.add_argument("--isa", help="alternative instruction table file")
    p.add_argument("--dump-state", help="write the final state dump here")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("trace", help="run with a per-instruction trace")
    p.add_argument("tape")
    p.add_argument("--max-instr", type=int, default=None)
    p.add_argument("--rom")
    p.add_argument("--isa")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("bench", help="report simulated instruction rate")
    p.add_argument("fixture", choices=BENCH_FIXTURES)
    p.add_argument("--max-instr", type=int, default=None)
    p.add_argument("--rom")
    p.add_argument("--isa")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("dump", help="print a tape or state file readably")
    p.add_argument("file")
    p.add_argument("--isa")
    p.set_defaults(func=cmd_dump)

    p = sub.add_parser("serve", help="start the panel protocol service")
    p.add_argument("--listen", default="127.0.0.1:1957", help="host:port")
    p.add_argument("--refresh-hz", type=int, default=30)
    p.add_argument("--tape", help="mount this tape on the fast reader")
    p.add_argument("--assets", help="front panel static asset directory")
    p.add_argument("--rom")
    p.add_argument("--isa")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (
        assembler.AsmError,
        devices.TapeError,
        devices.DeviceError,
        isa.IsaError,
        microcode.RomError,
        machine_mod.MachineError,
        FileNotFoundError,
    ) as exc:
        print(f"mr1957 {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
