"""
Switch-level logic: Boolean references for the full adder and an ideal-switch
evaluator for transistor networks.

A transistor is an ideal switch: N closes on ONE, P closes on ZERO. An output
is ONE when a closed path reaches the supply rail and no path (closed or of
unknown state) can reach ground; ZERO is the dual; Z when isolated; X for
anything else.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

from .device_model import Polarity
from .netlist import GROUND, Capacitor, Circuit, Cntfet, Dc


class LogicLevel(Enum):
    ZERO = "0"
    ONE = "1"
    Z = "Z"
    X = "X"

    @classmethod
    def of(cls, bit) -> "LogicLevel":
        return cls.ONE if bit else cls.ZERO

    def __str__(self):
        return self.value


class NetworkError(ValueError):
    pass


def majority(a: int, b: int, c: int) -> int:
    return int(a and b or b and c or a and c)


def full_adder_reference(a: int, b: int, c: int):
    """``(sum, cout)`` built the way the carry-reuse decomposition reads:
    ``sum = abc + (a + b + c) * not(cout)``."""
    cout = majority(a, b, c)
    s = int((a and b and c) or ((a or b or c) and not cout))
    return s, cout


@dataclass(frozen=True)
class Switch:
    name: str
    polarity: Polarity
    gate: str
    a: str
    b: str


@dataclass(frozen=True)
class Stage:
    """Channel-connected group driving one output."""

    output: str
    switches: tuple
    internal: frozenset


@dataclass(frozen=True)
class SwitchNetwork:
    inputs: tuple
    outputs: tuple  # as requested
    order: tuple  # topological evaluation order, intermediate stages included
    stages: dict
    vdd: str
    gnd: str = GROUND


def _find_vdd(c: Circuit) -> Optional[str]:
    best = None
    for s in c.sources:
        if isinstance(s.shape, Dc) and s.node_minus == GROUND and s.shape.volts > 0:
            if best is None or s.shape.volts > best[1]:
                best = (s.node_plus, s.shape.volts)
    return best[0] if best else None


def build_switch_network(c: Circuit, inputs, outputs, vdd: Optional[str] = None) -> SwitchNetwork:
    """Extract a switch network from a circuit of CNTFETs.

    Capacitors are ignored; resistors are rejected. The supply rail defaults to
    the node held above ground by the largest DC source.
    """
    inputs, outputs = tuple(inputs), tuple(outputs)
    for d in c.devices:
        if not isinstance(d, (Cntfet, Capacitor)):
            raise NetworkError(f"{d.name}: {d.kind} is not a switch element")
    vdd = vdd or _find_vdd(c)
    if vdd is None:
        raise NetworkError("no supply rail found (need a positive DC source to ground)")
    rails = {vdd, GROUND}
    fets = [d for d in c.devices if isinstance(d, Cntfet)]
    known = c.nodes
    for n in inputs + outputs:
        if n not in known:
            raise NetworkError(f"node {n!r} is not in the circuit")
    by_node = {}
    for f in fets:
        for n in (f.drain, f.source):
            by_node.setdefault(n, []).append(f)
    # intermediate stage outputs: channel-driven nodes that gate other devices
    gates = {f.gate for f in fets} - rails - set(inputs) - set(outputs)
    hidden = sorted(gates & set(by_node))
    stage_outputs = outputs + tuple(hidden)
    boundary = rails | set(inputs) | set(stage_outputs)

    stages = {}
    claimed = {}
    for out in stage_outputs:
        seen_nodes, seen_fets = {out}, []
        frontier = [out]
        while frontier:
            node = frontier.pop()
            for f in by_node.get(node, []):
                if f.name in claimed and claimed[f.name] != out:
                    raise NetworkError(f"{f.name} connects outputs {claimed[f.name]!r} and {out!r}")
                if f in seen_fets:
                    continue
                seen_fets.append(f)
                claimed[f.name] = out
                for n in (f.drain, f.source):
                    if n in inputs:
                        raise NetworkError(f"{f.name}: channel touches primary input {n!r}")
                    if n not in boundary and n not in seen_nodes:
                        seen_nodes.add(n)
                        frontier.append(n)
        switches = tuple(Switch(f.name, f.polarity, f.gate, f.drain, f.source) for f in seen_fets)
        for s in switches:
            if s.gate not in boundary:
                raise NetworkError(f"{s.name}: gate on non-logic node {s.gate!r}")
        stages[out] = Stage(out, switches, frozenset(seen_nodes - {out}))

    # topological order over output-to-output gate dependencies
    deps = {o: {s.gate for s in stages[o].switches if s.gate in stages and s.gate != o}
            for o in stage_outputs}
    for o in stage_outputs:
        if any(s.gate == o for s in stages[o].switches):
            raise NetworkError(f"output {o!r} gates its own stage (combinational cycle)")
    order, done, active = [], set(), set()

    def visit(o):
        if o in done:
            return
        if o in active:
            raise NetworkError(f"combinational cycle through {o!r}")
        active.add(o)
        for dep in sorted(deps[o]):
            visit(dep)
        active.discard(o)
        done.add(o)
        order.append(o)

    for o in stage_outputs:
        visit(o)
    return SwitchNetwork(inputs, outputs, tuple(order), stages, vdd)


def _switch_state(sw: Switch, gate: LogicLevel) -> Optional[bool]:
    """True closed, False open, None unknown."""
    if gate in (LogicLevel.X, LogicLevel.Z):
        return None
    on = LogicLevel.ONE if sw.polarity is Polarity.N else LogicLevel.ZERO
    return gate is on


def _reach(stage: Stage, states, start, target, allow_unknown):
    adj = {}
    for sw, st in zip(stage.switches, states):
        if st or (st is None and allow_unknown):
            adj.setdefault(sw.a, []).append(sw.b)
            adj.setdefault(sw.b, []).append(sw.a)
    stack, seen = [start], {start}
    while stack:
        node = stack.pop()
        if node == target:
            return True
        if node != start and node not in stage.internal:
            continue  # paths may only run through this stage's internal nodes
        for nxt in adj.get(node, []):
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return False


def _resolve(stage: Stage, states, vdd, gnd) -> LogicLevel:
    up = _reach(stage, states, stage.output, vdd, False)
    down = _reach(stage, states, stage.output, gnd, False)
    maybe_up = _reach(stage, states, stage.output, vdd, True)
    maybe_down = _reach(stage, states, stage.output, gnd, True)
    if up and not maybe_down:
        return LogicLevel.ONE
    if down and not maybe_up:
        return LogicLevel.ZERO
    if not maybe_up and not maybe_down:
        return LogicLevel.Z
    return LogicLevel.X


def eval_network(net: SwitchNetwork, assignment) -> dict:
    """Evaluate every output; ``assignment`` maps input name to a bit or level."""
    values = {net.vdd: LogicLevel.ONE, net.gnd: LogicLevel.ZERO}
    for name in net.inputs:
        val = assignment[name]
        values[name] = val if isinstance(val, LogicLevel) else LogicLevel.of(val)
    for out in net.order:
        stage = net.stages[out]
        states = [_switch_state(sw, values[sw.gate]) for sw in stage.switches]
        values[out] = _resolve(stage, states, net.vdd, net.gnd)
    return {o: values[o] for o in net.outputs}


def stage_is_complementary(net: SwitchNetwork, output: str) -> bool:
    """True when, for every Boolean assignment of the stage's gate nodes, exactly
    one of the pull-up (P) and pull-down (N) networks conducts, i.e. the P
    network computes the complement of the N network."""
    stage = net.stages[output]
    gates = sorted({sw.gate for sw in stage.switches} - {net.vdd, net.gnd})
    for bits in itertools.product((0, 1), repeat=len(gates)):
        level = dict(zip(gates, map(LogicLevel.of, bits)))
        level[net.vdd], level[net.gnd] = LogicLevel.ONE, LogicLevel.ZERO
        states = [_switch_state(sw, level[sw.gate]) for sw in stage.switches]
        up = _reach(stage, states, output, net.vdd, False)
        down = _reach(stage, states, output, net.gnd, False)
        if up == down:
            return False
    return True


@dataclass
class EquivalenceReport:
    inputs: tuple
    outputs: tuple
    rows: list  # (input bits, expected levels, actual levels)
    failure: Optional[tuple] = None

    @property
    def passed(self) -> bool:
        return self.failure is None

    def render(self) -> str:
        header = list(self.inputs) + list(self.outputs)
        width = max([len(h) for h in header] + [1])
        lines = [" ".join(h.rjust(width) for h in header)]
        for bits, _, actual in self.rows:
            cells = [str(b) for b in bits] + [str(actual[o]) for o in self.outputs]
            lines.append(" ".join(c.rjust(width) for c in cells))
        if self.passed:
            lines.append(f"PASS ({len(self.rows)} vectors)")
        else:
            bits, expected, actual = self.failure
            vec = ", ".join(f"{n}={b}" for n, b in zip(self.inputs, bits))
            exp = ", ".join(f"{o}={expected[o]}" for o in self.outputs)
            act = ", ".join(f"{o}={actual[o]}" for o in self.outputs)
            lines.append(f"FAIL at {vec}: expected {exp}, got {act}")
        return "\n".join(lines)


def check_equivalence(net: SwitchNetwork, oracle: Callable) -> EquivalenceReport:
    """Exhaustively compare ``net`` with ``oracle``.

    ``oracle`` takes the input bits positionally and returns one bit per
    output (a bare int is accepted for single-output networks). Stops at the
    first mismatching vector.
    """
    if len(net.inputs) > 20:
        raise NetworkError("exhaustive check limited to 20 inputs")
    report = EquivalenceReport(net.inputs, net.outputs, [])
    for bits in itertools.product((0, 1), repeat=len(net.inputs)):
        want = oracle(*bits)
        if isinstance(want, int):
            want = (want,)
        expected = {o: LogicLevel.of(b) for o, b in zip(net.outputs, want)}
        actual = eval_network(net, dict(zip(net.inputs, bits)))
        report.rows.append((bits, expected, actual))
        if actual != expected:
            report.failure = (bits, expected, actual)
            break
    return report


def complemented(oracle: Callable, mask) -> Callable:
    """Wrap ``oracle`` so outputs flagged in ``mask`` are inverted."""
    def wrapped(*bits):
        out = oracle(*bits)
        if isinstance(out, int):
            out = (out,)
        return tuple(1 - b if inv else b for b, inv in zip(out, mask))
    return wrapped
