"""
Modified nodal analysis engine.

Unknowns are the non-ground node voltages followed by one branch current per
voltage source (current entering the ``+`` terminal and flowing through the
source). The residual of a node row is the sum of currents leaving that node;
the residual of a source row is ``v+ - v- - V(t)``. The matrix returned by
:func:`stamp_system` is the exact Jacobian of that residual.

CNTFET gate capacitance is lumped as two fixed capacitors (gate-source and
gate-drain, half the gate capacitance each) so the companion network stays
linear. ``gmin`` is tied from every CNTFET terminal to ground.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .device_model import CntfetParams, ModelConfig, ids_vectorized
from .netlist import GROUND, Capacitor, Circuit, Cntfet, Resistor, Source, Dc, errors

log = logging.getLogger(__name__)

MAX_VSTEP = 0.3  # V, Newton update clamp per node per iteration
KELVIN = 273.15


class SimulationError(RuntimeError):
    pass


class SingularSystemError(SimulationError):
    pass


class ConvergenceError(SimulationError):
    def __init__(self, message, time=None, residual=None):
        self.time = time
        self.residual = residual
        super().__init__(message)


@dataclass(frozen=True)
class SolverOptions:
    abstol: float = 1e-12
    reltol: float = 1e-6
    vntol: float = 1e-9
    max_newton_iters: int = 100
    gmin: float = 1e-12
    integration: str = "trapezoidal"
    source_steps: int = 10

    def __post_init__(self):
        for name in ("abstol", "reltol", "vntol", "gmin"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.max_newton_iters < 1:
            raise ValueError("max_newton_iters must be >= 1")
        if self.source_steps < 1:
            raise ValueError("source_steps must be >= 1")
        if self.integration not in ("trapezoidal", "backward_euler"):
            raise ValueError(f"unknown integration rule {self.integration!r}")


@dataclass
class Companion:
    """Integration state of every capacitor for one timestep.

    ``v_prev``/``i_prev`` are the capacitor voltages and currents at the last
    accepted point, ordered like :attr:`System.cap_a`.
    """

    h: float
    method: str  # "trapezoidal" | "backward_euler"
    v_prev: np.ndarray
    i_prev: np.ndarray

    def geq(self, cap):
        return (2.0 if self.method == "trapezoidal" else 1.0) * cap / self.h


@dataclass
class OperatingPoint:
    voltages: dict
    source_currents: dict
    iterations: int
    strategy: str
    x: np.ndarray = field(repr=False, default=None)


class System:
    """Index maps and element arrays for one circuit, ready for stamping."""

    def __init__(self, circuit: Circuit, model: ModelConfig = ModelConfig()):
        self.circuit = circuit
        self.model = model
        self.node_names = sorted(circuit.nodes - {GROUND}, key=_natural_key)
        self.n = len(self.node_names)
        idx = {name: i for i, name in enumerate(self.node_names)}
        idx[GROUND] = self.n  # scratch slot, dropped after assembly
        self.index = idx
        self.sources = list(circuit.sources)
        self.m = len(self.sources)
        self.size = self.n + self.m

        res = [d for d in circuit.devices if isinstance(d, Resistor)]
        self.res_a = np.array([idx[r.node_plus] for r in res], dtype=int)
        self.res_b = np.array([idx[r.node_minus] for r in res], dtype=int)
        self.res_g = np.array([1.0 / r.ohms for r in res])

        fets = [d for d in circuit.devices if isinstance(d, Cntfet)]
        self.fets = fets
        params = [CntfetParams.from_chirality(f.polarity, f.chirality, f.tubes, model) for f in fets]
        self.fet_params = params
        self.fet_d = np.array([idx[f.drain] for f in fets], dtype=int)
        self.fet_g = np.array([idx[f.gate] for f in fets], dtype=int)
        self.fet_s = np.array([idx[f.source] for f in fets], dtype=int)
        self.fet_sign = np.array([p.polarity.sign for p in params], dtype=float)
        self.fet_vth = np.array([abs(p.vth) for p in params])
        self.fet_k = np.array([p.k_eff for p in params])
        self.fet_tubes = np.array([p.tubes for p in params], dtype=float)

        caps = [d for d in circuit.devices if isinstance(d, Capacitor)]
        cap_a = [idx[c.node_plus] for c in caps]
        cap_b = [idx[c.node_minus] for c in caps]
        cap_c = [c.farads for c in caps]
        for f, p in zip(fets, params):
            half = 0.5 * p.gate_cap
            cap_a += [idx[f.gate], idx[f.gate]]
            cap_b += [idx[f.source], idx[f.drain]]
            cap_c += [half, half]
        self.explicit_caps = caps
        self.cap_a = np.array(cap_a, dtype=int)
        self.cap_b = np.array(cap_b, dtype=int)
        self.cap_c = np.array(cap_c, dtype=float)

        gmin_nodes = sorted({idx[n] for f in fets for n in f.nodes} - {self.n})
        self.gmin_nodes = np.array(gmin_nodes, dtype=int)

        self.src_p = np.array([idx[s.node_plus] for s in self.sources], dtype=int)
        self.src_m = np.array([idx[s.node_minus] for s in self.sources], dtype=int)

    # -- helpers ---------------------------------------------------------------

    def source_values(self, t: float, scale: float = 1.0) -> np.ndarray:
        return np.array([s.value(t) * scale for s in self.sources])

    def node_voltages(self, x) -> np.ndarray:
        """Node voltages with ground appended at index ``n``."""
        return np.append(x[: self.n], 0.0)

    def cap_voltages(self, x) -> np.ndarray:
        v = self.node_voltages(x)
        return v[self.cap_a] - v[self.cap_b]

    def fet_currents(self, v, temp_K):
        vgs = v[self.fet_g] - v[self.fet_s]
        vds = v[self.fet_d] - v[self.fet_s]
        return ids_vectorized(self.fet_sign, self.fet_vth, self.fet_k, self.fet_tubes,
                              self.model, vgs, vds, temp_K)

    # -- assembly ----------------------------------------------------------------

    def stamp(self, x, temp_K, src_values, companion: Optional[Companion] = None,
              gmin: float = 1e-12, gmin_all: float = 0.0, pins=()):
        """Return ``(J, f, scale)``: Jacobian, residual, and per-row current scale.

        ``pins`` are extra ideal constraints ``(a, b, volts)`` appended after
        the source rows (used for capacitor initial conditions).
        """
        n, m = self.n, self.m
        npin = len(pins)
        size = n + m + npin
        full = n + 1
        J = np.zeros((full + m + npin, full + m + npin))
        f = np.zeros(full + m + npin)
        scale = np.zeros(full + m + npin)
        v = self.node_voltages(x)

        # resistors
        if self.res_g.size:
            a, b, g = self.res_a, self.res_b, self.res_g
            i = g * (v[a] - v[b])
            np.add.at(f, a, i)
            np.add.at(f, b, -i)
            np.add.at(J, (a, a), g)
            np.add.at(J, (b, b), g)
            np.add.at(J, (a, b), -g)
            np.add.at(J, (b, a), -g)
            _scale(scale, a, b, i)

        # capacitors: open at DC, companion conductance in transient
        if companion is not None and self.cap_c.size:
            a, b = self.cap_a, self.cap_b
            geq = companion.geq(self.cap_c)
            vc = v[a] - v[b]
            i = geq * (vc - companion.v_prev)
            if companion.method == "trapezoidal":
                i = i - companion.i_prev
            np.add.at(f, a, i)
            np.add.at(f, b, -i)
            np.add.at(J, (a, a), geq)
            np.add.at(J, (b, b), geq)
            np.add.at(J, (a, b), -geq)
            np.add.at(J, (b, a), -geq)
            _scale(scale, a, b, i)

        # CNTFETs
        if self.fets:
            d, g, s = self.fet_d, self.fet_g, self.fet_s
            ids, gm, gds = self.fet_currents(v, temp_K)
            np.add.at(f, d, ids)
            np.add.at(f, s, -ids)
            gss = -gm - gds
            for row, sgn in ((d, 1.0), (s, -1.0)):
                np.add.at(J, (row, d), sgn * gds)
                np.add.at(J, (row, g), sgn * gm)
                np.add.at(J, (row, s), sgn * gss)
            _scale(scale, d, s, ids)

        if self.gmin_nodes.size:
            k = self.gmin_nodes
            i = gmin * v[k]
            f[k] += i
            J[k, k] += gmin
            np.maximum.at(scale, k, np.abs(i))
        if gmin_all:
            k = np.arange(n)
            f[k] += gmin_all * v[k]
            J[k, k] += gmin_all

        # voltage sources and pins: branch current enters the + node
        rows_p = list(self.src_p) + [p[0] for p in pins]
        rows_m = list(self.src_m) + [p[1] for p in pins]
        values = list(src_values) + [p[2] for p in pins]
        for k, (p, q, val) in enumerate(zip(rows_p, rows_m, values)):
            r = full + k
            ib = x[n + k]
            f[p] += ib
            f[q] -= ib
            J[p, r] += 1.0
            J[q, r] -= 1.0
            J[r, p] += 1.0
            J[r, q] -= 1.0
            f[r] = v[p] - v[q] - val
            scale[p] = max(scale[p], abs(ib))
            scale[q] = max(scale[q], abs(ib))
            scale[r] = abs(val)

        keep = np.r_[0:n, full:full + m + npin]
        assert keep.size == size
        return J[np.ix_(keep, keep)], f[keep], scale[keep]


def _natural_key(name):
    import re
    return [int(t) if t.isdigit() else t for t in re.split(r"(\d+)", name)]


def _scale(scale, a, b, i):
    mag = np.abs(i)
    np.maximum.at(scale, a, mag)
    np.maximum.at(scale, b, mag)


def stamp_system(c: Circuit, x, companion: Optional[Companion] = None, temp_K: Optional[float] = None,
                 t: float = 0.0, model: ModelConfig = ModelConfig(), gmin: float = 1e-12):
    """Jacobian and residual of the MNA system at state ``x``.

    ``x`` holds node voltages in :attr:`System.node_names` order followed by
    source branch currents.
    """
    system = System(c, model)
    if temp_K is None:
        temp_K = c.temp_C + KELVIN
    x = np.asarray(x, dtype=float)
    if x.shape != (system.size,):
        raise ValueError(f"state has shape {x.shape}, expected ({system.size},)")
    J, f, _ = system.stamp(x, temp_K, system.source_values(t), companion, gmin)
    return J, f


# -- Newton --------------------------------------------------------------------

def _converged(f, scale, n, opts: SolverOptions):
    node_ok = np.abs(f[:n]) <= opts.abstol + opts.reltol * scale[:n]
    branch_ok = np.abs(f[n:]) <= opts.vntol + opts.reltol * scale[n:]
    return bool(node_ok.all() and branch_ok.all())


def _solve_linear(J, rhs):
    try:
        dx = np.linalg.solve(J, rhs)
    except np.linalg.LinAlgError:
        raise SingularSystemError("singular MNA matrix (floating node or source loop)") from None
    if not np.all(np.isfinite(dx)):
        raise SingularSystemError("singular MNA matrix (non-finite solution)")
    return dx


def newton(system: System, x0, temp_K, src_values, opts: SolverOptions,
           companion=None, gmin_all=0.0, pins=()):
    """Damped Newton. Returns ``(x, iterations)``; iterations counts linear
    solves, so a linear circuit converges in exactly one."""
    x = np.array(x0, dtype=float)
    n = system.n
    f = None
    for it in range(opts.max_newton_iters + 1):
        J, f, scale = system.stamp(x, temp_K, src_values, companion, opts.gmin, gmin_all, pins)
        if not np.all(np.isfinite(f)):
            break
        if it > 0 and _converged(f, scale, n, opts) and not clamped:
            return x, it
        if it == opts.max_newton_iters:
            break
        dx = _solve_linear(J, -f)
        step = dx[:n]
        # linear systems take the full step so they finish in one solve
        clamped = bool(system.fets) and bool((np.abs(step) > MAX_VSTEP).any())
        if clamped:
            dx[:n] = np.clip(step, -MAX_VSTEP, MAX_VSTEP)
        x = x + dx
    resid = float(np.max(np.abs(f[:n]))) if f is not None and n else float("nan")
    raise ConvergenceError(f"Newton did not converge (max node residual {resid:.3e} A)", residual=resid)


def _solve_dc(system: System, temp_K, opts, x0=None, pins=(), t=0.0):
    size = system.size + len(pins)
    x0 = np.zeros(size) if x0 is None else x0
    src = system.source_values(t)
    try:
        x, it = newton(system, x0, temp_K, src, opts, pins=pins)
        return x, it, "newton"
    except ConvergenceError as exc:
        log.info("plain Newton failed (%s); trying gmin stepping", exc)
        last = exc

    total = 0
    try:
        x = x0.copy()
        g = 1e-3
        while g > opts.gmin * 1.0001:
            x, it = newton(system, x, temp_K, src, opts, gmin_all=g, pins=pins)
            total += it
            g /= 10.0
        x, it = newton(system, x, temp_K, src, opts, pins=pins)
        return x, total + it, "gmin-stepping"
    except ConvergenceError as exc:
        log.info("gmin stepping failed (%s); trying source stepping", exc)
        last = exc

    total = 0
    try:
        x = np.zeros(size)
        for k in range(1, opts.source_steps + 1):
            frac = k / opts.source_steps
            scaled_pins = tuple((a, b, v * frac) for a, b, v in pins)
            x, it = newton(system, x, temp_K, src * frac, opts, pins=scaled_pins)
            total += it
        return x, total, "source-stepping"
    except ConvergenceError as exc:
        last = exc
    raise ConvergenceError(f"DC operating point failed after all strategies: {last}",
                           residual=last.residual)


def _check(c: Circuit):
    errs = errors(c)
    if errs:
        raise SimulationError("; ".join(str(e) for e in errs))


def dc_operating_point(c: Circuit, opts: SolverOptions = SolverOptions(), temp_C: Optional[float] = None,
                       model: ModelConfig = ModelConfig()) -> OperatingPoint:
    """DC solution with capacitors open."""
    _check(c)
    system = System(c, model)
    temp_K = (c.temp_C if temp_C is None else temp_C) + KELVIN
    x, iters, strategy = _solve_dc(system, temp_K, opts)
    return _op_result(system, x, iters, strategy)


def _op_result(system, x, iters, strategy):
    volts = {name: float(x[i]) for i, name in enumerate(system.node_names)}
    volts[GROUND] = 0.0
    currents = {s.name: float(x[system.n + k]) for k, s in enumerate(system.sources)}
    return OperatingPoint(volts, currents, iters, strategy, x[: system.size].copy())


# -- transient -------------------------------------------------------------------

@dataclass
class Waveform:
    """Sampled transient result.

    ``source_currents`` follow the MNA convention: positive current enters the
    ``+`` terminal and flows through the source, so a supply delivering power
    reports a negative current.
    """

    times: np.ndarray
    node_volts: dict
    source_currents: dict
    source_nodes: dict = field(default_factory=dict)  # name -> (plus, minus)

    def v(self, node: str) -> np.ndarray:
        if node == GROUND:
            return np.zeros_like(self.times)
        return self.node_volts[node]

    def i(self, source: str) -> np.ndarray:
        for name, series in self.source_currents.items():
            if name.lower() == source.lower():
                return series
        raise KeyError(source)

    def to_csv(self, path_or_file):
        header = ["time"] + list(self.node_volts) + [f"I({s})" for s in self.source_currents]
        cols = [self.times] + list(self.node_volts.values()) + list(self.source_currents.values())
        data = np.column_stack(cols)

        def write(fh):
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in data:
                w.writerow([f"{val:.17g}" for val in row])

        if hasattr(path_or_file, "write"):
            write(path_or_file)
        else:
            with open(path_or_file, "w", newline="") as fh:
                write(fh)

    @classmethod
    def from_csv(cls, path) -> "Waveform":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], np.array(rows[1:], dtype=float)
        nodes, sources = {}, {}
        for k, name in enumerate(header[1:], start=1):
            if name.startswith("I(") and name.endswith(")"):
                sources[name[2:-1]] = body[:, k]
            else:
                nodes[name] = body[:, k]
        return cls(body[:, 0], nodes, sources)


def transient(c: Circuit, opts: SolverOptions = SolverOptions(), model: ModelConfig = ModelConfig(),
              temp_C: Optional[float] = None) -> Waveform:
    """Fixed-step transient from 0 to the ``.tran`` stop time."""
    _check(c)
    tran = c.tran
    if tran is None:
        raise SimulationError("circuit has no .tran analysis")
    n_steps = int(round(tran.stop_s / tran.step_s))
    if n_steps < 1 or abs(n_steps * tran.step_s - tran.stop_s) > 1e-6 * tran.step_s:
        raise SimulationError(f".tran stop {tran.stop_s} is not a whole number of steps {tran.step_s}")
    h = tran.step_s
    system = System(c, model)
    temp_K = (c.temp_C if temp_C is None else temp_C) + KELVIN

    idx = system.index
    pins = tuple((idx[cap.node_plus], idx[cap.node_minus], cap.ic)
                 for cap in system.explicit_caps if cap.ic is not None)
    x_pinned, _, _ = _solve_dc(system, temp_K, opts, pins=pins)
    x = x_pinned[: system.size].copy()

    times = np.arange(n_steps + 1) * h
    out = np.empty((n_steps + 1, system.size))
    out[0] = x
    comp = Companion(h, "backward_euler", system.cap_voltages(x), np.zeros(system.cap_c.size))
    for k in range(1, n_steps + 1):
        t = times[k]
        comp.method = "backward_euler" if (k == 1 or opts.integration == "backward_euler") else "trapezoidal"
        try:
            x, _ = newton(system, x, temp_K, system.source_values(t), opts, companion=comp)
        except ConvergenceError as exc:
            raise ConvergenceError(f"transient step at t={t:.6g} s: {exc}", time=t,
                                   residual=exc.residual) from None
        vc = system.cap_voltages(x)
        geq = comp.geq(system.cap_c)
        i_new = geq * (vc - comp.v_prev)
        if comp.method == "trapezoidal":
            i_new -= comp.i_prev
        comp.v_prev, comp.i_prev = vc, i_new
        out[k] = x

    node_volts = {name: out[:, i].copy() for i, name in enumerate(system.node_names)}
    src = {s.name: out[:, system.n + k].copy() for k, s in enumerate(system.sources)}
    terminals = {s.name: s.nodes for s in system.sources}
    return Waveform(times, node_volts, src, terminals)


# -- energy accounting -------------------------------------------------------------

def energy_balance(c: Circuit, w: Waveform, model: ModelConfig = ModelConfig(),
                   opts: SolverOptions = SolverOptions(), temp_C: Optional[float] = None) -> dict:
    """Energy delivered by all sources vs. dissipated plus stored, over ``w``.

    Integrals use trapezoidal quadrature on the waveform samples.
    """
    system = System(c, model)
    temp_K = (c.temp_C if temp_C is None else temp_C) + KELVIN
    nt = w.times.size
    V = np.zeros((nt, system.n + 1))
    for i, name in enumerate(system.node_names):
        V[:, i] = w.v(name)

    delivered = np.zeros(nt)
    for k, s in enumerate(system.sources):
        vs = V[:, system.src_p[k]] - V[:, system.src_m[k]]
        delivered += -vs * w.i(s.name)

    dissipated = np.zeros(nt)
    if system.res_g.size:
        vr = V[:, system.res_a] - V[:, system.res_b]
        dissipated += (system.res_g * vr * vr).sum(axis=1)
    if system.fets:
        vgs = V[:, system.fet_g] - V[:, system.fet_s]
        vds = V[:, system.fet_d] - V[:, system.fet_s]
        ids, _, _ = ids_vectorized(system.fet_sign, system.fet_vth, system.fet_k, system.fet_tubes,
                                   model, vgs, vds, temp_K)
        dissipated += (ids * vds).sum(axis=1)
    if system.gmin_nodes.size:
        dissipated += opts.gmin * (V[:, system.gmin_nodes] ** 2).sum(axis=1)

    vc = V[:, system.cap_a] - V[:, system.cap_b]
    stored = 0.5 * (system.cap_c * vc * vc).sum(axis=1)

    e_in = float(np.trapezoid(delivered, w.times))
    e_diss = float(np.trapezoid(dissipated, w.times))
    d_stored = float(stored[-1] - stored[0])
    return {"delivered": e_in, "dissipated": e_diss, "stored_delta": d_stored,
            "relative_error": abs(e_in - e_diss - d_stored) / max(abs(e_in), 1e-300)}
