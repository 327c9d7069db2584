"""Gate-level combinational logic networks for the arithmetic element.

The machine's adder is modeled at the level of the surviving blueprints:
pure AND/OR/NOT gates (NOT stands in for the triode inverter of the
diode-resistor implementation).  Two generators are provided, a ripple
adder as the depth baseline and the carry-lookahead adder the machine
actually uses.  Networks are immutable after construction and evaluation
is a pure function, so they are safe to share between threads.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

GATE_KINDS = ("AND", "OR", "NOT")

# Logic depth of the one-bit full adder emitted by both generators, as
# hand-counted on the network: a/b -> g,o (1) -> not g (2) -> p (3) ->
# p&cin (4) -> not (5) -> sum AND (6).
FULL_ADDER_DEPTH = 6


class NetworkError(ValueError):
    """Structural violation in a logic network or netlist file."""


@dataclass(frozen=True)
class Gate:
    """One AND/OR/NOT gate; inputs refer to previously defined nodes."""

    node: str
    kind: str
    inputs: tuple[str, ...]

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise NetworkError(f"gate {self.node}: unknown kind {self.kind!r}")
        if self.kind == "NOT":
            if len(self.inputs) != 1:
                raise NetworkError(f"gate {self.node}: NOT takes exactly 1 input")
        elif len(self.inputs) < 2:
            raise NetworkError(f"gate {self.node}: {self.kind} needs fan-in >= 2")


@dataclass(frozen=True)
class AdderStage:
    """Metadata for one carry stage of a generated adder network.

    Names the input bit positions the stage consumes, the node carrying
    the stage's carry-in, and the sum/carry-out nodes it produces.  Used
    by CompiledAdder to tabulate each stage's cone of logic.
    """

    bits: tuple[int, ...]
    carry_in: str
    sums: tuple[str, ...]
    carry_out: str


@dataclass(frozen=True)
class LogicNetwork:
    """A DAG of gates: named primary inputs, gates in topological order,
    and named primary outputs referencing nodes."""

    inputs: tuple[str, ...]
    gates: tuple[Gate, ...]
    outputs: dict[str, str]
    stages: tuple[AdderStage, ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        defined = set()
        for name in self.inputs:
            if name in defined:
                raise NetworkError(f"input {name} defined twice")
            defined.add(name)
        for gate in self.gates:
            if gate.node in defined:
                raise NetworkError(f"node {gate.node} defined twice")
            for src in gate.inputs:
                if src not in defined:
                    raise NetworkError(
                        f"gate {gate.node} reads undefined node {src}"
                    )
            defined.add(gate.node)
        for name, node in self.outputs.items():
            if node not in defined:
                raise NetworkError(f"output {name} references undefined node {node}")

    def node_names(self) -> set[str]:
        return set(self.inputs) | {g.node for g in self.gates}

    def diagnostics(self) -> list[str]:
        """Non-fatal structural findings (e.g. inputs nothing reads)."""
        read = set()
        for gate in self.gates:
            read.update(gate.inputs)
        read.update(self.outputs.values())
        return [f"unused input {name}" for name in self.inputs if name not in read]


def evaluate(net: LogicNetwork, assignment: dict[str, int]) -> dict[str, int]:
    """Evaluate the network on a complete input assignment.

    The assignment must cover every primary input and nothing else;
    values must be 0 or 1.  Returns a bit per primary output.
    """
    missing = [n for n in net.inputs if n not in assignment]
    if missing:
        raise NetworkError(f"assignment missing inputs: {' '.join(missing)}")
    extra = [n for n in assignment if n not in net.inputs]
    if extra:
        raise NetworkError(f"assignment has unknown inputs: {' '.join(extra)}")
    values = {}
    for name, bit in assignment.items():
        if bit not in (0, 1):
            raise NetworkError(f"input {name} must be 0 or 1, got {bit!r}")
        values[name] = bit
    for gate in net.gates:
        ins = gate.inputs
        if gate.kind == "AND":
            v = 1
            for src in ins:
                v &= values[src]
        elif gate.kind == "OR":
            v = 0
            for src in ins:
                v |= values[src]
        else:
            v = 1 - values[ins[0]]
        values[gate.node] = v
    return {name: values[node] for name, node in net.outputs.items()}


def gate_depth(net: LogicNetwork) -> int:
    """Length of the longest input-to-output gate path; inputs are depth 0."""
    depth = {name: 0 for name in net.inputs}
    for gate in net.gates:
        depth[gate.node] = 1 + max(depth[src] for src in gate.inputs)
    if not net.outputs:
        return 0
    return max(depth[node] for node in net.outputs.values())


# ---------------------------------------------------------------------------
# Adder generators
# ---------------------------------------------------------------------------


class _Emitter:
    """Accumulates gates, guaranteeing construction order is topological."""

    def __init__(self, inputs):
        self.inputs = tuple(inputs)
        self.gates = []

    def emit(self, node, kind, *ins):
        self.gates.append(Gate(node, kind, tuple(ins)))
        return node

    def xor(self, node, x, y):
        """x XOR y as (x OR y) AND NOT(x AND y); returns the output node."""
        both = self.emit(f"{node}_and", "AND", x, y)
        nboth = self.emit(f"{node}_nand", "NOT", both)
        either = self.emit(f"{node}_or", "OR", x, y)
        return self.emit(node, "AND", either, nboth)


def _adder_inputs(width):
    names = [f"a{i}" for i in range(width)]
    names += [f"b{i}" for i in range(width)]
    names.append("cin")
    return names


def _adder_outputs(width):
    return [f"s{i}" for i in range(width)] + ["cout"]


def _check_width(width):
    if not isinstance(width, int) or width < 1:
        raise NetworkError(f"width must be a positive integer, got {width!r}")


def _emit_gp(em, i):
    """Per-bit generate g_i = a&b and propagate p_i = a XOR b."""
    g = em.emit(f"g{i}", "AND", f"a{i}", f"b{i}")
    o = em.emit(f"o{i}", "OR", f"a{i}", f"b{i}")
    ng = em.emit(f"ng{i}", "NOT", g)
    p = em.emit(f"p{i}", "AND", o, ng)
    return g, p


def build_ripple_adder(width: int) -> LogicNetwork:
    """Classic carry-ripple adder: sum = (a + b + cin) mod 2^width."""
    _check_width(width)
    em = _Emitter(_adder_inputs(width))
    stages = []
    carry = "cin"
    for i in range(width):
        g, p = _emit_gp(em, i)
        pc = em.emit(f"pc{i}", "AND", p, carry)
        npc = em.emit(f"npc{i}", "NOT", pc)
        opc = em.emit(f"opc{i}", "OR", p, carry)
        em.emit(f"s{i}", "AND", opc, npc)
        nxt = em.emit(f"c{i + 1}", "OR", g, pc)
        stages.append(AdderStage((i,), carry, (f"s{i}",), nxt))
        carry = nxt
    outputs = {f"s{i}": f"s{i}" for i in range(width)}
    outputs["cout"] = carry
    return LogicNetwork(em.inputs, tuple(em.gates), outputs, tuple(stages))


def build_lookahead_adder(width: int, group_size: int = 6) -> LogicNetwork:
    """Carry-lookahead adder with group generate/propagate signals.

    Within a group every carry is a flat sum of products of the bit
    g/p signals, so depth does not grow with group size; group-to-group
    carries use G + P*C, adding two levels per group instead of two
    levels per bit as in the ripple network.
    """
    _check_width(width)
    if not isinstance(group_size, int) or not 1 <= group_size <= width:
        raise NetworkError(
            f"group_size must be in 1..{width}, got {group_size!r}"
        )
    em = _Emitter(_adder_inputs(width))

    gbit = {}
    pbit = {}
    for i in range(width):
        gbit[i], pbit[i] = _emit_gp(em, i)

    groups = [
        list(range(base, min(base + group_size, width)))
        for base in range(0, width, group_size)
    ]

    stages = []
    carry_in = "cin"
    for k, bits in enumerate(groups):
        # carries internal to the group, flattened back to the group carry-in
        local = {bits[0]: carry_in}
        for j in range(1, len(bits)):
            i = bits[j]
            terms = []
            for m in range(j - 1, -1, -1):
                covers = [pbit[bits[x]] for x in range(j - 1, m, -1)]
                if covers:
                    terms.append(
                        em.emit(f"ct{i}_{m}", "AND", *covers, gbit[bits[m]])
                    )
                else:
                    terms.append(gbit[bits[m]])
            covers = [pbit[bits[x]] for x in range(j - 1, -1, -1)]
            terms.append(em.emit(f"ct{i}_in", "AND", *covers, carry_in))
            local[i] = em.emit(f"c{i}", "OR", *terms)
        for i in bits:
            em.xor(f"s{i}", pbit[i], local[i])
        # group generate/propagate, then carry out = G + P*Cin
        if len(bits) == 1:
            grp_g, grp_p = gbit[bits[0]], pbit[bits[0]]
        else:
            terms = []
            for m, low in enumerate(bits):
                covers = [pbit[j] for j in bits[m + 1:]]
                if covers:
                    terms.append(em.emit(f"Gt{k}_{m}", "AND", *covers, gbit[low]))
                else:
                    terms.append(gbit[low])
            grp_g = em.emit(f"G{k}", "OR", *terms)
            grp_p = em.emit(f"P{k}", "AND", *(pbit[j] for j in bits))
        ripple = em.emit(f"PC{k}", "AND", grp_p, carry_in)
        nxt = em.emit(f"C{k + 1}", "OR", grp_g, ripple)
        stages.append(
            AdderStage(tuple(bits), carry_in, tuple(f"s{i}" for i in bits), nxt)
        )
        carry_in = nxt

    outputs = {f"s{i}": f"s{i}" for i in range(width)}
    outputs["cout"] = carry_in
    return LogicNetwork(em.inputs, tuple(em.gates), outputs, tuple(stages))


# ---------------------------------------------------------------------------
# Equivalence checking against the arithmetic oracle
# ---------------------------------------------------------------------------


@dataclass
class EquivalenceReport:
    width: int
    exhaustive: bool
    cases: int
    counterexamples: list[dict]

    @property
    def ok(self) -> bool:
        return not self.counterexamples


def adder_assignment(width, a, b, cin):
    asn = {f"a{i}": (a >> i) & 1 for i in range(width)}
    asn.update({f"b{i}": (b >> i) & 1 for i in range(width)})
    asn["cin"] = cin
    return asn


def _check_ports(net, width):
    want_in = set(_adder_inputs(width))
    want_out = set(_adder_outputs(width))
    if set(net.inputs) != want_in or set(net.outputs) != want_out:
        raise NetworkError(
            f"network does not have width-{width} adder ports"
        )


def _read_sum(outputs, width):
    s = 0
    for i in range(width):
        s |= outputs[f"s{i}"] << i
    return s, outputs["cout"]


def check_equivalence(
    net: LogicNetwork, width: int, samples: int = 4000, seed: int = 1957
) -> EquivalenceReport:
    """Compare an adder-shaped network against (a + b + cin) mod 2^width.

    Exhaustive for width <= 8; for wider networks, structured corner
    cases plus seeded random sampling.  Every mismatching assignment is
    reported, which is exactly the tool that would have caught the flaw
    in the original electronic blueprints.
    """
    _check_ports(net, width)
    exhaustive = width <= 8
    if exhaustive:
        cases = [
            (a, b, cin)
            for a in range(1 << width)
            for b in range(1 << width)
            for cin in (0, 1)
        ]
    else:
        top = (1 << width) - 1
        alt0 = sum(1 << i for i in range(0, width, 2))
        alt1 = top ^ alt0
        corners = {0, 1, top, alt0, alt1, 1 << (width - 1)}
        cases = [
            (a, b, cin) for a in corners for b in corners for cin in (0, 1)
        ]
        rng = random.Random(seed)
        for _ in range(samples):
            cases.append(
                (rng.randrange(1 << width), rng.randrange(1 << width), rng.randrange(2))
            )
    bad = []
    for a, b, cin in cases:
        got_sum, got_cout = _read_sum(
            evaluate(net, adder_assignment(width, a, b, cin)), width
        )
        total = a + b + cin
        want_sum = total & ((1 << width) - 1)
        want_cout = total >> width
        if got_sum != want_sum or got_cout != want_cout:
            bad.append(
                {
                    "a": a,
                    "b": b,
                    "cin": cin,
                    "got_sum": got_sum,
                    "got_cout": got_cout,
                    "want_sum": want_sum,
                    "want_cout": want_cout,
                }
            )
    return EquivalenceReport(width, exhaustive, len(cases), bad)


# ---------------------------------------------------------------------------
# Netlist text format
# ---------------------------------------------------------------------------
#
#   INPUT a0 a1 b0 b1 cin
#   OUTPUT s0 s0
#   OUTPUT cout c2
#   g0 AND a0 b0
#
# One gate per line (node id, kind, input nodes); INPUT lines declare
# primary inputs, OUTPUT lines map an output name to a node.


def format_netlist(net: LogicNetwork) -> str:
    lines = ["INPUT " + " ".join(net.inputs)]
    for name, node in net.outputs.items():
        lines.append(f"OUTPUT {name} {node}")
    for gate in net.gates:
        lines.append(f"{gate.node} {gate.kind} " + " ".join(gate.inputs))
    return "\n".join(lines) + "\n"


def parse_netlist(text: str) -> LogicNetwork:
    inputs = []
    outputs = {}
    gates = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if fields[0] == "INPUT":
            inputs.extend(fields[1:])
        elif fields[0] == "OUTPUT":
            if len(fields) != 3:
                raise NetworkError(f"line {lineno}: OUTPUT takes name and node")
            if fields[1] in outputs:
                raise NetworkError(f"line {lineno}: output {fields[1]} redeclared")
            outputs[fields[1]] = fields[2]
        else:
            if len(fields) < 3:
                raise NetworkError(f"line {lineno}: expected 'node KIND inputs...'")
            try:
                gates.append(Gate(fields[0], fields[1], tuple(fields[2:])))
            except NetworkError as exc:
                raise NetworkError(f"line {lineno}: {exc}") from None
    try:
        return LogicNetwork(tuple(inputs), tuple(gates), outputs)
    except NetworkError as exc:
        raise NetworkError(f"netlist invalid: {exc}") from None


def mutate_gate_kind(net: LogicNetwork, node: str, kind: str) -> LogicNetwork:
    """Copy of the network with one gate's kind swapped (fault injection)."""
    gates = []
    hit = False
    for gate in net.gates:
        if gate.node == node:
            gates.append(Gate(gate.node, kind, gate.inputs))
            hit = True
        else:
            gates.append(gate)
    if not hit:
        raise NetworkError(f"no gate named {node}")
    return LogicNetwork(net.inputs, tuple(gates), dict(net.outputs), net.stages)


# ---------------------------------------------------------------------------
# Cone tabulation
# ---------------------------------------------------------------------------


def _stage_cone(net: LogicNetwork, stage: AdderStage) -> list[Gate]:
    """Gates feeding the stage's outputs, cut at the stage boundary.

    The boundary is the stage's own a/b input bits plus its carry-in
    node; reaching any other primary input or an earlier stage's node
    means the stage metadata does not match the network.
    """
    cut = {f"a{i}" for i in stage.bits} | {f"b{i}" for i in stage.bits}
    cut.add(stage.carry_in)
    by_node = {g.node: g for g in net.gates}
    order = {g.node: i for i, g in enumerate(net.gates)}
    needed = set()
    work = [stage.carry_out, *stage.sums]
    while work:
        node = work.pop()
        if node in cut or node in needed:
            continue
        gate = by_node.get(node)
        if gate is None:
            raise NetworkError(
                f"stage cone escapes its boundary at primary input {node}"
            )
        needed.add(node)
        work.extend(gate.inputs)
    return sorted((by_node[n] for n in needed), key=lambda g: order[g.node])


class CompiledAdder:
    """Fast adder evaluation via per-stage lookup tables.

    Each stage's cone of gates is evaluated exhaustively over its own
    inputs (stage a/b bits plus carry-in) and the results are frozen
    into a table, so a full-width add is a handful of indexed lookups
    that remain bit-for-bit the network's own function.  No host
    arithmetic enters the tables.
    """

    def __init__(self, net: LogicNetwork):
        if not net.stages:
            raise NetworkError("network carries no stage metadata to tabulate")
        self.width = sum(len(st.bits) for st in net.stages)
        _check_ports(net, self.width)
        self._stages = []
        cache = {}
        for stage in net.stages:
            bits = stage.bits
            if bits != tuple(range(bits[0], bits[0] + len(bits))):
                raise NetworkError("stage bits must be contiguous")
            cone = _stage_cone(net, stage)
            key = _cone_signature(stage, cone)
            table = cache.get(key)
            if table is None:
                table = _tabulate(stage, cone)
                cache[key] = table
            self._stages.append((bits[0], len(bits), (1 << len(bits)) - 1, table))

    @property
    def stages(self):
        """(base, nbits, mask, table) per stage, for callers that inline
        the lookups in their own hot loops."""
        return tuple(self._stages)

    def __call__(self, a: int, b: int, cin: int):
        """Return (sum, carry_out) of a + b + cin per the network."""
        total = 0
        carry = cin
        for base, nbits, mask, table in self._stages:
            packed = table[
                (carry << (nbits + nbits))
                | (((a >> base) & mask) << nbits)
                | ((b >> base) & mask)
            ]
            total |= (packed & mask) << base
            carry = packed >> nbits
        return total, carry


def _cone_signature(stage, cone):
    """Shape of a stage cone with boundary-relative, order-normalized names,
    so structurally identical stages share one table."""
    base = stage.bits[0]
    local = {}

    def rel(name):
        if name == stage.carry_in:
            return "CIN"
        if name[0] in "ab" and name[1:].isdigit():
            return f"{name[0]}@{int(name[1:]) - base}"
        if name not in local:
            local[name] = f"n{len(local)}"
        return local[name]

    return (
        len(stage.bits),
        tuple((rel(g.node), g.kind, tuple(rel(i) for i in g.inputs)) for g in cone),
        tuple(rel(s) for s in stage.sums),
        rel(stage.carry_out),
    )


def _tabulate(stage, cone):
    nbits = len(stage.bits)
    base = stage.bits[0]
    table = [0] * (2 << (2 * nbits))
    for carry in (0, 1):
        for av in range(1 << nbits):
            for bv in range(1 << nbits):
                values = {stage.carry_in: carry}
                for j in range(nbits):
                    values[f"a{base + j}"] = (av >> j) & 1
                    values[f"b{base + j}"] = (bv >> j) & 1
                for gate in cone:
                    ins = gate.inputs
                    if gate.kind == "AND":
                        v = 1
                        for src in ins:
                            v &= values[src]
                    elif gate.kind == "OR":
                        v = 0
                        for src in ins:
                            v |= values[src]
                    else:
                        v = 1 - values[ins[0]]
                    values[gate.node] = v
                packed = values[stage.carry_out] << nbits
                for j, s in enumerate(stage.sums):
                    packed |= values[s] << j
                table[(carry << (2 * nbits)) | (av << nbits) | bv] = packed
    return table
