"""
Full-adder cell generators and their transient test bench.

The proposed cell is a two-stage mirror circuit (24 CNTFETs):

* carry stage, 10 devices: N pull-down ``AB + (A+B)C`` with an identically
  wired P pull-up, output ``COUT_B = not Cout``;
* sum stage, 14 devices: N pull-down ``ABC + (A+B+C) COUT_B`` with an
  identically wired P pull-up, output ``SUM_B = not SUM``.

Both stage functions are self-dual, which is what lets the mirrored P network
act as the exact complement of the N network. The topology is derived from
the carry-reuse sum expression above. The ``buffered`` variant adds two
inverters for true-polarity ``SUM``/``COUT`` (28 devices).

The majority reference computes the same outputs from textbook complementary
gates: a 3-input majority for the carry and a 5-input majority
``MAJ(A, B, C, COUT_B, COUT_B)`` for the sum, each with a P network that is the
series/parallel dual of its N network.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .device_model import Chirality, Polarity, is_semiconducting
from .netlist import (GROUND, AvgPower, Capacitor, Circuit, Cntfet, Delay, Dc, Op, Pdp,
                      Pulse, Source, Tran, errors)

INPUTS = ("A", "B", "C")
VDD_NODE = "vdd"
VDD_SOURCE = "VDD"


class CellConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CellConfig:
    vdd: float = 0.9
    temp_C: float = 27.0
    n_chirality: Chirality = Chirality(19, 0)
    p_chirality: Chirality = Chirality(19, 0)
    tubes_n: int = 3
    tubes_p: int = 3
    load_cap: float = 2e-15
    variant: str = "buffered"

    def __post_init__(self):
        if not self.vdd > 0:
            raise CellConfigError(f"vdd must be > 0, got {self.vdd}")
        if self.variant not in ("core24", "buffered"):
            raise CellConfigError(f"variant must be 'core24' or 'buffered', got {self.variant!r}")
        for c in (self.n_chirality, self.p_chirality):
            if not is_semiconducting(c):
                raise CellConfigError(f"chirality ({c.n},{c.m}) is metallic")
        if self.tubes_n < 1 or self.tubes_p < 1:
            raise CellConfigError("tube counts must be >= 1")
        if not self.load_cap > 0:
            raise CellConfigError("load_cap must be > 0")


@dataclass(frozen=True)
class Stimulus:
    """Binary-counter inputs: C toggles every T/2, B every T, A every 2T, so
    every 4T window visits all eight input vectors."""

    period_T: float = 800e-12
    transition: float = 10e-12

    def __post_init__(self):
        if not (self.period_T > 0 and self.transition > 0):
            raise CellConfigError("period and transition must be > 0")
        if self.transition > self.period_T / 10:
            raise CellConfigError("transition must be <= T/10")

    @property
    def slot(self) -> float:
        return self.period_T / 2

    @property
    def window(self) -> float:
        return 4 * self.period_T

    def vector(self, k: int):
        """Input bits (A, B, C) during slot ``k``."""
        k %= 8
        return (k >> 2) & 1, (k >> 1) & 1, k & 1


@dataclass
class Cell:
    """A generated cell plus the metadata needed to test it."""

    circuit: Circuit
    outputs: tuple
    inverted: tuple  # per output: True if it carries the complement
    stage_outputs: tuple
    device_count: int = field(init=False)

    def __post_init__(self):
        self.device_count = sum(isinstance(d, Cntfet) for d in self.circuit.devices)


class _Builder:
    def __init__(self, cfg: CellConfig):
        self.cfg = cfg
        self.devices = []
        self.counter = 0
        self.internal = 0

    def node(self, stem):
        self.internal += 1
        return f"{stem}{self.internal}"

    def fet(self, pol, drain, gate, source):
        self.counter += 1
        if pol is Polarity.N:
            chir, tubes, kind = self.cfg.n_chirality, self.cfg.tubes_n, "N"
        else:
            chir, tubes, kind = self.cfg.p_chirality, self.cfg.tubes_p, "P"
        self.devices.append(Cntfet(f"M{kind}{self.counter}", drain, gate, source, pol, chir, tubes))

    # series/parallel networks: ("s", ...) series, ("p", ...) parallel, str = gate
    def network(self, pol, expr, top, bottom, stem):
        if isinstance(expr, str):
            self.fet(pol, top, expr, bottom)
            return
        op, *parts = expr
        if op == "p":
            for part in parts:
                self.network(pol, part, top, bottom, stem)
        else:
            nodes = [top] + [self.node(stem) for _ in parts[:-1]] + [bottom]
            for part, a, b in zip(parts, nodes, nodes[1:]):
                self.network(pol, part, a, b, stem)

    def stage(self, out, n_expr, p_expr, stem):
        """Static gate: N network from ``out`` to ground, P network from the
        rail to ``out``."""
        self.network(Polarity.N, n_expr, out, GROUND, stem + "n")
        self.network(Polarity.P, p_expr, VDD_NODE, out, stem + "p")

    def inverter(self, out, inp):
        self.fet(Polarity.N, out, inp, GROUND)
        self.fet(Polarity.P, out, inp, VDD_NODE)


def dual(expr):
    """Series/parallel dual of a network expression."""
    if isinstance(expr, str):
        return expr
    op, *parts = expr
    return ("p" if op == "s" else "s", *map(dual, parts))


CARRY_N = ("p", ("s", "A", "B"), ("s", ("p", "A", "B"), "C"))
SUM_N = ("p", ("s", "A", "B", "C"), ("s", ("p", "A", "B", "C"), "COUT_B"))


def _finish(b: _Builder, title, outputs, inverted, stage_outputs) -> Cell:
    supply = Source(VDD_SOURCE, VDD_NODE, GROUND, Dc(b.cfg.vdd))
    circuit = Circuit(title, tuple(b.devices), (supply,), (Op(),), (), b.cfg.temp_C)
    return Cell(circuit, outputs, inverted, stage_outputs)


def generate_proposed_fa(cfg: CellConfig = CellConfig()) -> Cell:
    """Mirror-style 24-device full adder (``core24``), optionally buffered."""
    b = _Builder(cfg)
    # mirror: the P network is wired exactly like the N network
    b.stage("COUT_B", CARRY_N, CARRY_N, "xc")
    b.stage("SUM_B", SUM_N, SUM_N, "xs")
    stages = ("COUT_B", "SUM_B")
    if cfg.variant == "core24":
        return _finish(b, "proposed CNTFET full adder (core24)", ("SUM_B", "COUT_B"),
                       (True, True), stages)
    b.inverter("SUM", "SUM_B")
    b.inverter("COUT", "COUT_B")
    return _finish(b, "proposed CNTFET full adder (buffered)", ("SUM", "COUT"),
                   (False, False), stages + ("SUM", "COUT"))


def generate_majority_fa(cfg: CellConfig = CellConfig()) -> Cell:
    """Majority-gate reference: complementary MAJ3 carry, MAJ5 sum, inverters."""
    b = _Builder(cfg)
    b.stage("COUT_B", CARRY_N, dual(CARRY_N), "xc")
    b.stage("SUM_B", SUM_N, dual(SUM_N), "xs")
    b.inverter("SUM", "SUM_B")
    b.inverter("COUT", "COUT_B")
    return _finish(b, "majority reference full adder", ("SUM", "COUT"), (False, False),
                   ("COUT_B", "SUM_B", "SUM", "COUT"))


def generate_testbench(cell: Cell, cfg: CellConfig, stim: Stimulus = Stimulus(),
                       amplitude: float = None) -> Circuit:
    """Wrap ``cell`` with supply, counter stimulus, loads, ``.tran`` and measures.

    The run covers two 4T windows; measurements use the second one.
    ``amplitude`` overrides the input swing (default ``cfg.vdd``; 0 gives a
    static-leakage bench).
    """
    c = cell.circuit
    missing = [n for n in INPUTS if n not in c.nodes]
    if missing:
        raise CellConfigError(f"cell has no input node(s) {missing}")
    swing = cfg.vdd if amplitude is None else amplitude
    T, tr, slot = stim.period_T, stim.transition, stim.slot

    def pulse(name, node, delay, half):
        return Source(name, node, GROUND, Pulse(0.0, swing, delay, tr, tr, half - tr, 2 * half))

    sources = (
        Source(VDD_SOURCE, VDD_NODE, GROUND, Dc(cfg.vdd)),
        pulse("VA", "A", 4 * slot, 4 * slot),
        pulse("VB", "B", 2 * slot, 2 * slot),
        pulse("VC", "C", slot, slot),
    )
    loads = tuple(Capacitor(f"CL{o}", o, GROUND, cfg.load_cap) for o in cell.outputs)
    devices = tuple(d for d in c.devices) + loads
    t0, t1 = stim.window, 2 * stim.window
    step = tr / 10
    measures = (
        AvgPower("power", VDD_SOURCE, t0, t1),
        Delay("delay", INPUTS, cell.outputs, 0.5, t0, t1),
        Pdp("pdp"),
    )
    bench = Circuit(f"{c.title} bench vdd={cfg.vdd} T={cfg.temp_C}", devices, sources,
                    (Tran(step, t1),), measures, cfg.temp_C)
    errs = errors(bench)
    if errs:
        raise CellConfigError("; ".join(map(str, errs)))
    return bench


def _proposed24(cfg: CellConfig) -> Cell:
    return generate_proposed_fa(replace(cfg, variant="core24"))


def _proposed_buffered(cfg: CellConfig) -> Cell:
    return generate_proposed_fa(replace(cfg, variant="buffered"))


# module-level functions so sweep workers can pickle them
STYLES = {
    "proposed24": _proposed24,
    "proposed-buffered": _proposed_buffered,
    "majority-ref": generate_majority_fa,
}


def generate(style: str, cfg: CellConfig = CellConfig()) -> Cell:
    try:
        return STYLES[style](cfg)
    except KeyError:
        raise CellConfigError(f"unknown style {style!r}; choose from {sorted(STYLES)}") from None
