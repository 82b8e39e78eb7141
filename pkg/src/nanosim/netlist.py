"""
Netlist format: parse, validate, serialize.

Grammar (line oriented, keywords case-insensitive, node names case-sensitive)::

    .title <text>
    M<name> <drain> <gate> <source> nfet|pfet n=<int> m=<int> tubes=<int>
    R<name> <n+> <n-> <ohms>
    C<name> <n+> <n-> <farads> [ic=<volts>]
    V<name> <n+> <n-> DC <volts>
    V<name> <n+> <n-> PULSE(<v1> <v2> <td> <tr> <tf> <pw> <per>)
    .temp <celsius>
    .tran <step> <stop>
    .op
    .measure tran <name> AVG power src=<vsrc> [from=<t> to=<t>]
    .measure tran <name> DELAY in=<node[,node..]> out=<node[,node..]> [frac=<f>] [from=<t> to=<t>]
    .measure tran <name> PDP
    .end

``*`` starts a comment line, ``+`` continues the previous line. Ground is
node ``0``. Numbers accept the suffixes f p n u m k meg g (``m`` is milli).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from decimal import Decimal, DecimalException
from typing import Optional, Union

from .device_model import Chirality, DomainError, Polarity, is_semiconducting

GROUND = "0"

_SUFFIXES = {
    "f": Decimal("1e-15"),
    "p": Decimal("1e-12"),
    "n": Decimal("1e-9"),
    "u": Decimal("1e-6"),
    "m": Decimal("1e-3"),
    "k": Decimal("1e3"),
    "meg": Decimal("1e6"),
    "g": Decimal("1e9"),
}
_NUMBER_RE = re.compile(r"^([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)(meg|[fpnumkg])?$", re.IGNORECASE)


class NetlistError(ValueError):
    """Parse failure with a 1-based source position."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.message = message
        self.line = line
        self.column = column
        where = f"line {line}, col {column}: " if line else ""
        super().__init__(where + message)


def parse_number(token: str) -> float:
    """Parse a SPICE number. Suffix scaling is done in decimal, so ``"2f"``
    is exactly ``2e-15``."""
    m = _NUMBER_RE.match(token)
    if not m:
        raise ValueError(f"bad number {token!r}")
    try:
        value = Decimal(m.group(1))
        if m.group(2):
            value *= _SUFFIXES[m.group(2).lower()]
        out = float(value)
    except DecimalException:
        raise ValueError(f"bad number {token!r}") from None
    if not math.isfinite(out):
        raise ValueError(f"number out of range {token!r}")
    return out


def format_number(x: float) -> str:
    """Shortest text that reparses to the identical float."""
    if float(x).is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


# -- circuit data ------------------------------------------------------------

@dataclass(frozen=True)
class Cntfet:
    name: str
    drain: str
    gate: str
    source: str
    polarity: Polarity
    chirality: Chirality
    tubes: int = 1

    kind = "cntfet"

    @property
    def nodes(self):
        return (self.drain, self.gate, self.source)


@dataclass(frozen=True)
class Resistor:
    name: str
    node_plus: str
    node_minus: str
    ohms: float

    kind = "resistor"

    @property
    def nodes(self):
        return (self.node_plus, self.node_minus)


@dataclass(frozen=True)
class Capacitor:
    name: str
    node_plus: str
    node_minus: str
    farads: float
    ic: Optional[float] = None

    kind = "capacitor"

    @property
    def nodes(self):
        return (self.node_plus, self.node_minus)


Device = Union[Cntfet, Resistor, Capacitor]


@dataclass(frozen=True)
class Dc:
    volts: float

    def value(self, t: float) -> float:
        return self.volts


@dataclass(frozen=True)
class Pulse:
    v_low: float
    v_high: float
    delay_s: float
    rise_s: float
    fall_s: float
    width_s: float
    period_s: float

    def value(self, t: float) -> float:
        if t < self.delay_s:
            return self.v_low
        tt = math.fmod(t - self.delay_s, self.period_s)
        span = self.v_high - self.v_low
        if tt < self.rise_s:
            return self.v_low + span * tt / self.rise_s
        tt -= self.rise_s
        if tt < self.width_s:
            return self.v_high
        tt -= self.width_s
        if tt < self.fall_s:
            return self.v_high - span * tt / self.fall_s
        return self.v_low


@dataclass(frozen=True)
class Source:
    name: str
    node_plus: str
    node_minus: str
    shape: Union[Dc, Pulse]

    @property
    def nodes(self):
        return (self.node_plus, self.node_minus)

    def value(self, t: float = 0.0) -> float:
        return self.shape.value(t)


@dataclass(frozen=True)
class Tran:
    step_s: float
    stop_s: float


@dataclass(frozen=True)
class Op:
    pass


@dataclass(frozen=True)
class AvgPower:
    name: str
    source: str
    t_from: Optional[float] = None
    t_to: Optional[float] = None


@dataclass(frozen=True)
class Delay:
    name: str
    in_nodes: tuple
    out_nodes: tuple
    fraction: float = 0.5
    t_from: Optional[float] = None
    t_to: Optional[float] = None


@dataclass(frozen=True)
class Pdp:
    name: str


@dataclass(frozen=True)
class Circuit:
    title: str = ""
    devices: tuple = ()
    sources: tuple = ()
    analyses: tuple = ()
    measures: tuple = ()
    temp_C: float = 27.0

    @property
    def elements(self):
        return self.devices + self.sources

    @property
    def nodes(self) -> set:
        return {n for e in self.elements for n in e.nodes}

    def device(self, name: str):
        for e in self.elements:
            if e.name.lower() == name.lower():
                return e
        raise KeyError(name)

    @property
    def tran(self) -> Optional[Tran]:
        trans = [a for a in self.analyses if isinstance(a, Tran)]
        return trans[0] if trans else None


# -- parser -------------------------------------------------------------------

def _logical_lines(text: str):
    """Yield (line_no, text) with comments dropped and continuations joined."""
    out = []
    for no, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("*"):
            continue
        if stripped.startswith("+"):
            if not out:
                raise NetlistError("continuation line with nothing to continue", no, 1)
            prev_no, prev = out[-1]
            out[-1] = (prev_no, prev + " " + stripped[1:].strip())
            continue
        out.append((no, stripped))
    return out


def _kv(tokens, line, col_of, allowed):
    """Split ``key=value`` tokens into a dict, rejecting unknown keys."""
    result = {}
    for tok in tokens:
        if "=" not in tok:
            raise NetlistError(f"expected key=value, got {tok!r}", line, col_of(tok))
        key, _, val = tok.partition("=")
        key = key.lower()
        if key not in allowed:
            raise NetlistError(f"unknown parameter {key!r}", line, col_of(tok))
        if key in result:
            raise NetlistError(f"duplicate parameter {key!r}", line, col_of(tok))
        if not val:
            raise NetlistError(f"empty value for {key!r}", line, col_of(tok))
        result[key] = val
    return result


class _LineParser:
    def __init__(self, no: int, text: str):
        self.no = no
        self.text = text

    def col(self, token: str) -> int:
        idx = self.text.find(token)
        return idx + 1 if idx >= 0 else 1

    def error(self, msg, token=None):
        return NetlistError(msg, self.no, self.col(token) if token else 1)

    def number(self, token, what):
        try:
            return parse_number(token)
        except ValueError:
            raise self.error(f"bad {what} value {token!r}", token) from None

    def integer(self, token, what):
        try:
            value = int(token)
        except ValueError:
            raise self.error(f"{what} must be an integer, got {token!r}", token) from None
        return value


def _parse_device(lp: _LineParser, tokens):
    name = tokens[0]
    letter = name[0].upper()
    if len(name) < 2:
        raise lp.error(f"element name {name!r} needs a suffix after the type letter", name)
    if letter == "M":
        if len(tokens) < 5:
            raise lp.error("CNTFET line needs: M<name> <drain> <gate> <source> nfet|pfet n= m= tubes=")
        model = tokens[4].lower()
        if model not in ("nfet", "pfet"):
            raise lp.error(f"unknown CNTFET type {tokens[4]!r}", tokens[4])
        kv = _kv(tokens[5:], lp.no, lp.col, {"n", "m", "tubes"})
        for key in ("n", "m"):
            if key not in kv:
                raise lp.error(f"CNTFET {name} is missing {key}=", name)
        n = lp.integer(kv["n"], "n")
        m = lp.integer(kv["m"], "m")
        tubes = lp.integer(kv.get("tubes", "1"), "tubes")
        if tubes < 1:
            raise lp.error(f"tubes must be >= 1, got {tubes}", name)
        try:
            chir = Chirality(n, m)
        except DomainError as exc:
            raise lp.error(str(exc), name) from None
        if not is_semiconducting(chir):
            raise lp.error(f"metallic chirality ({n},{m}) for {name}: (n-m) mod 3 == 0", name)
        pol = Polarity.N if model == "nfet" else Polarity.P
        return Cntfet(name, tokens[1], tokens[2], tokens[3], pol, chir, tubes)
    if letter == "R":
        if len(tokens) != 4:
            raise lp.error("resistor line needs: R<name> <n+> <n-> <ohms>")
        ohms = lp.number(tokens[3], "resistance")
        if not ohms > 0:
            raise lp.error(f"resistance must be > 0, got {tokens[3]}", tokens[3])
        return Resistor(name, tokens[1], tokens[2], ohms)
    if letter == "C":
        if len(tokens) not in (4, 5):
            raise lp.error("capacitor line needs: C<name> <n+> <n-> <farads> [ic=<v>]")
        farads = lp.number(tokens[3], "capacitance")
        if not farads > 0:
            raise lp.error(f"capacitance must be > 0, got {tokens[3]}", tokens[3])
        ic = None
        if len(tokens) == 5:
            kv = _kv(tokens[4:], lp.no, lp.col, {"ic"})
            ic = lp.number(kv["ic"], "ic")
        return Capacitor(name, tokens[1], tokens[2], farads, ic)
    raise lp.error(f"unknown element type {letter!r} in {name!r}", name)


def _parse_source(lp: _LineParser, line: str):
    # open up PULSE(...) so it tokenizes uniformly
    body = re.sub(r"[()]", " ", line)
    tokens = body.split()
    name = tokens[0]
    if len(name) < 2:
        raise lp.error(f"element name {name!r} needs a suffix after the type letter", name)
    if len(tokens) < 4:
        raise lp.error("source line needs: V<name> <n+> <n-> DC <v> | PULSE(...)")
    kind = tokens[3].upper()
    if kind == "DC":
        if len(tokens) != 5:
            raise lp.error("DC source needs exactly one value")
        return Source(name, tokens[1], tokens[2], Dc(lp.number(tokens[4], "DC")))
    if kind == "PULSE":
        if "(" not in line or ")" not in line:
            raise lp.error("PULSE arguments must be parenthesized", tokens[3])
        if len(tokens) != 11:
            raise lp.error(f"PULSE needs 7 values, got {len(tokens) - 4}", tokens[3])
        vals = [lp.number(t, "PULSE") for t in tokens[4:]]
        v1, v2, td, tr, tf, pw, per = vals
        if not (tr > 0 and tf > 0):
            raise lp.error("PULSE rise and fall times must be > 0", tokens[3])
        if td < 0 or pw < 0:
            raise lp.error("PULSE delay and width must be >= 0", tokens[3])
        if per < pw + tr + tf:
            raise lp.error("PULSE period shorter than rise + width + fall", tokens[3])
        return Source(name, tokens[1], tokens[2], Pulse(v1, v2, td, tr, tf, pw, per))
    raise lp.error(f"unknown source shape {tokens[3]!r}", tokens[3])


def _parse_measure(lp: _LineParser, tokens):
    if len(tokens) < 4 or tokens[1].lower() != "tran":
        raise lp.error(".measure needs: .measure tran <name> AVG|DELAY|PDP ...")
    name = tokens[2]
    kind = tokens[3].upper()

    def window(kv):
        t0 = lp.number(kv["from"], "from") if "from" in kv else None
        t1 = lp.number(kv["to"], "to") if "to" in kv else None
        if t0 is not None and t1 is not None and not t1 > t0:
            raise lp.error("measure window needs to > from")
        return t0, t1

    if kind == "AVG":
        if len(tokens) < 6 or tokens[4].lower() != "power":
            raise lp.error("AVG measure needs: AVG power src=<vsrc>")
        kv = _kv(tokens[5:], lp.no, lp.col, {"src", "from", "to"})
        if "src" not in kv:
            raise lp.error("AVG power measure needs src=")
        return AvgPower(name, kv["src"], *window(kv))
    if kind == "DELAY":
        kv = _kv(tokens[4:], lp.no, lp.col, {"in", "out", "frac", "from", "to"})
        if "in" not in kv or "out" not in kv:
            raise lp.error("DELAY measure needs in= and out=")
        frac = lp.number(kv["frac"], "frac") if "frac" in kv else 0.5
        if not 0 < frac < 1:
            raise lp.error(f"frac must be in (0, 1), got {frac}")
        ins = tuple(x for x in kv["in"].split(",") if x)
        outs = tuple(x for x in kv["out"].split(",") if x)
        if not ins or not outs:
            raise lp.error("DELAY measure needs at least one in and one out node")
        return Delay(name, ins, outs, frac, *window(kv))
    if kind == "PDP":
        if len(tokens) != 4:
            raise lp.error("PDP measure takes no arguments")
        return Pdp(name)
    raise lp.error(f"unknown measure kind {tokens[3]!r}", tokens[3])


def parse(text) -> Circuit:
    """Parse netlist text (``str`` or UTF-8 ``bytes``) into a :class:`Circuit`.

    Raises :class:`NetlistError` on any defect; the parser never lets another
    exception type escape.
    """
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise NetlistError(f"input is not valid UTF-8 (byte {exc.start})") from None
    if "\x00" in text:
        raise NetlistError("NUL character in input")

    title = ""
    devices, sources, analyses, measures = [], [], [], []
    temp_C = 27.0
    ended = False
    names = {}

    lines = _logical_lines(text)
    for idx, (no, line) in enumerate(lines):
        lp = _LineParser(no, line)
        if ended:
            raise lp.error("content after .end")
        tokens = line.split()
        head = tokens[0]
        if head.startswith("."):
            directive = head.lower()
            if directive == ".title":
                if idx != 0:
                    raise lp.error(".title must be the first line", head)
                title = line[len(head):].strip()
            elif directive == ".end":
                if len(tokens) != 1:
                    raise lp.error(".end takes no arguments")
                ended = True
            elif directive == ".temp":
                if len(tokens) != 2:
                    raise lp.error(".temp needs one value")
                temp_C = lp.number(tokens[1], "temperature")
                if temp_C <= -273.15:
                    raise lp.error("temperature below absolute zero", tokens[1])
            elif directive == ".op":
                if len(tokens) != 1:
                    raise lp.error(".op takes no arguments")
                analyses.append(Op())
            elif directive == ".tran":
                if len(tokens) != 3:
                    raise lp.error(".tran needs <step> <stop>")
                step = lp.number(tokens[1], "step")
                stop = lp.number(tokens[2], "stop")
                if not step > 0:
                    raise lp.error("tran step must be > 0", tokens[1])
                if not stop > step:
                    raise lp.error("tran stop must exceed step", tokens[2])
                analyses.append(Tran(step, stop))
            elif directive in (".measure", ".meas"):
                measures.append(_parse_measure(lp, tokens))
            else:
                raise lp.error(f"unknown directive {head!r}", head)
            continue

        if head[0].upper() == "V":
            elem = _parse_source(lp, line)
            bucket = sources
        else:
            elem = _parse_device(lp, tokens)
            bucket = devices
        key = elem.name.lower()
        if key in names:
            raise lp.error(f"duplicate element name {elem.name!r} (first on line {names[key]})", head)
        names[key] = no
        bucket.append(elem)

    if not ended:
        raise NetlistError("missing .end")
    circuit = Circuit(title, tuple(devices), tuple(sources), tuple(analyses), tuple(measures), temp_C)
    if GROUND not in circuit.nodes:
        raise NetlistError("no element connects to ground node 0")
    return circuit


def parse_file(path) -> Circuit:
    with open(path, "rb") as fh:
        return parse(fh.read())


# -- validation ----------------------------------------------------------------

@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    message: str

    def __str__(self):
        return f"{self.severity}: {self.message}"


def validate(c: Circuit) -> list:
    """Return diagnostics; an empty list means the circuit is simulatable."""
    diags = []

    def error(msg):
        diags.append(Diagnostic("error", msg))

    nodes = c.nodes
    if GROUND not in nodes:
        error("ground node 0 is not connected to any element")
    if not c.analyses:
        error("no analysis (.op or .tran)")
    if sum(isinstance(a, Tran) for a in c.analyses) > 1:
        error("more than one .tran analysis")

    seen = set()
    for e in c.elements:
        if e.name.lower() in seen:
            error(f"duplicate element name {e.name!r}")
        seen.add(e.name.lower())
        if isinstance(e, Cntfet) and not is_semiconducting(e.chirality):
            error(f"{e.name}: metallic chirality ({e.chirality.n},{e.chirality.m})")

    # connectivity: every terminal of an element is linked to the others
    parent = {n: n for n in nodes}

    def find(n):
        while parent[n] != n:
            parent[n] = parent[parent[n]]
            n = parent[n]
        return n

    for e in c.elements:
        first = find(e.nodes[0])
        for other in e.nodes[1:]:
            parent[find(other)] = first
    if GROUND in nodes:
        root = find(GROUND)
        floating = sorted(n for n in nodes if find(n) != root)
        for n in floating:
            error(f"node {n!r} has no path to ground")

    # nodes seen only by capacitor plates without an initial condition
    touch = {n: [] for n in nodes}
    for e in c.elements:
        for n in e.nodes:
            touch[n].append(e)
    for n in sorted(nodes - {GROUND}):
        elems = touch[n]
        if all(isinstance(e, Capacitor) for e in elems) and not any(e.ic is not None for e in elems):
            diags.append(Diagnostic("warning", f"node {n!r} is driven only by capacitors (floating at DC)"))

    measured_sources = {s.name.lower() for s in c.sources}
    for m in c.measures:
        if isinstance(m, AvgPower) and m.source.lower() not in measured_sources:
            error(f"measure {m.name}: unknown source {m.source!r}")
        if isinstance(m, Delay):
            for n in m.in_nodes + m.out_nodes:
                if n not in nodes:
                    error(f"measure {m.name}: unknown node {n!r}")
    return diags


def errors(c: Circuit) -> list:
    return [d for d in validate(c) if d.severity == "error"]


# -- serializer ------------------------------------------------------------------

def _measure_line(m) -> str:
    def window(t0, t1):
        out = ""
        if t0 is not None:
            out += f" from={format_number(t0)}"
        if t1 is not None:
            out += f" to={format_number(t1)}"
        return out

    if isinstance(m, AvgPower):
        return f".measure tran {m.name} AVG power src={m.source}" + window(m.t_from, m.t_to)
    if isinstance(m, Delay):
        return (f".measure tran {m.name} DELAY in={','.join(m.in_nodes)} out={','.join(m.out_nodes)}"
                f" frac={format_number(m.fraction)}" + window(m.t_from, m.t_to))
    return f".measure tran {m.name} PDP"


def serialize(c: Circuit) -> str:
    f = format_number
    lines = []
    if c.title:
        lines.append(f".title {c.title}")
    for d in c.devices:
        if isinstance(d, Cntfet):
            model = "nfet" if d.polarity is Polarity.N else "pfet"
            lines.append(f"{d.name} {d.drain} {d.gate} {d.source} {model} "
                         f"n={d.chirality.n} m={d.chirality.m} tubes={d.tubes}")
        elif isinstance(d, Resistor):
            lines.append(f"{d.name} {d.node_plus} {d.node_minus} {f(d.ohms)}")
        else:
            ic = f" ic={f(d.ic)}" if d.ic is not None else ""
            lines.append(f"{d.name} {d.node_plus} {d.node_minus} {f(d.farads)}{ic}")
    for s in c.sources:
        if isinstance(s.shape, Dc):
            lines.append(f"{s.name} {s.node_plus} {s.node_minus} DC {f(s.shape.volts)}")
        else:
            p = s.shape
            args = " ".join(f(x) for x in (p.v_low, p.v_high, p.delay_s, p.rise_s,
                                            p.fall_s, p.width_s, p.period_s))
            lines.append(f"{s.name} {s.node_plus} {s.node_minus} PULSE({args})")
    lines.append(f".temp {f(c.temp_C)}")
    for a in c.analyses:
        if isinstance(a, Tran):
            lines.append(f".tran {f(a.step_s)} {f(a.stop_s)}")
        else:
            lines.append(".op")
    lines.extend(_measure_line(m) for m in c.measures)
    lines.append(".end")
    return "\n".join(lines) + "\n"
