"""
Figures of merit from waveforms (average power, propagation delay, PDP) and
the VDD x temperature sweep runner.
"""

from __future__ import annotations

import csv
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from importlib import resources
from typing import Callable, Optional, Sequence

import numpy as np

from .adder_cells import CellConfig, Stimulus, generate, generate_testbench
from .device_model import ModelConfig
from .mna_engine import SimulationError, SolverOptions, Waveform, transient
from .netlist import AvgPower, Circuit, Dc, Delay, Pdp

log = logging.getLogger(__name__)

DEFAULT_VDD_AXIS = (0.7, 0.8, 0.9, 1.0, 1.1, 1.2)
DEFAULT_TEMP_AXIS = (0.0, 9.0, 18.0, 27.0, 36.0, 45.0, 54.0)


class MeasurementError(ValueError):
    pass


@dataclass(frozen=True)
class Measurements:
    power_W: float
    delay_s: float
    pdp_J: float

    @classmethod
    def of(cls, power_W: float, delay_s: float) -> "Measurements":
        return cls(power_W, delay_s, pdp(power_W, delay_s))


def _window(w: Waveform, window):
    t0, t1 = (w.times[0], w.times[-1]) if window is None else window
    t0 = w.times[0] if t0 is None else t0
    t1 = w.times[-1] if t1 is None else t1
    if not t1 > t0:
        raise MeasurementError(f"degenerate window [{t0}, {t1}]")
    tol = 1e-9 * (w.times[-1] - w.times[0])
    if t0 < w.times[0] - tol or t1 > w.times[-1] + tol:
        raise MeasurementError(f"window [{t0}, {t1}] outside waveform span")
    return t0, t1


def _integrate(t, y, t0, t1):
    """Trapezoidal integral of sampled ``y`` over [t0, t1], interpolating the
    end points."""
    inside = (t > t0) & (t < t1)
    tt = np.concatenate(([t0], t[inside], [t1]))
    yy = np.concatenate(([np.interp(t0, t, y)], y[inside], [np.interp(t1, t, y)]))
    return float(np.trapezoid(yy, tt))


def average_power(w: Waveform, vdd_source: str, window=None, circuit: Optional[Circuit] = None) -> float:
    """Mean power delivered by a source over ``window`` (default: whole run).

    The source voltage comes from ``circuit`` if given, else from the node
    names recorded in ``w.source_nodes``.
    """
    try:
        i_branch = w.i(vdd_source)
    except KeyError:
        raise MeasurementError(f"unknown source {vdd_source!r}") from None
    v_src = _source_voltage(w, vdd_source, circuit)
    t0, t1 = _window(w, window)
    # MNA branch current flows into the + terminal; delivered current is its negative
    p = v_src * (-i_branch)
    return _integrate(w.times, p, t0, t1) / (t1 - t0)


def _source_voltage(w: Waveform, name: str, circuit: Optional[Circuit]):
    if circuit is not None:
        src = circuit.device(name)
        return w.v(src.node_plus) - w.v(src.node_minus)
    key = w.source_nodes.get(name)
    if key is not None:
        return w.v(key[0]) - w.v(key[1])
    raise MeasurementError(f"voltage of source {name!r} unknown; pass the circuit")


def crossings(t, y, level):
    """Times where ``y`` crosses ``level``, linearly interpolated, with
    direction (+1 rising, -1 falling)."""
    above = y >= level
    idx = np.nonzero(above[1:] != above[:-1])[0]
    y0, y1 = y[idx], y[idx + 1]
    frac = (level - y0) / (y1 - y0)
    times = t[idx] + frac * (t[idx + 1] - t[idx])
    return times, np.where(y1 > y0, 1, -1)


def propagation_delay(w: Waveform, in_node, out_node, vdd: float, fraction: float = 0.5,
                      window=None) -> float:
    """Worst-case input-to-output delay at ``fraction * vdd``.

    Input events are the crossings of any input node (simultaneous crossings
    merge). An output responds to an event if it crosses an odd number of times
    before the next event; the last of those crossings is the settled
    transition. Events whose output does not switch are skipped. The result is
    the maximum over events in ``window`` and over all output nodes.
    """
    if not 0 < fraction < 1:
        raise MeasurementError(f"fraction must be in (0, 1), got {fraction}")
    ins = [in_node] if isinstance(in_node, str) else list(in_node)
    outs = [out_node] if isinstance(out_node, str) else list(out_node)
    t = w.times
    level = fraction * vdd
    t0, t1 = _window(w, window)

    events = np.sort(np.concatenate([crossings(t, w.v(n), level)[0] for n in ins]))
    if events.size:
        merge_tol = 1e-3 * float(np.min(np.diff(t)))
        keep = np.concatenate(([True], np.diff(events) > merge_tol))
        events = events[keep]
    in_window = np.nonzero((events >= t0) & (events < t1))[0]
    if in_window.size == 0:
        raise MeasurementError(f"no crossing of {ins} inside [{t0:.4g}, {t1:.4g}]")

    worst = None
    for node in outs:
        out_t, _ = crossings(t, w.v(node), level)
        responded = False
        for k in in_window:
            start = events[k]
            stop = events[k + 1] if k + 1 < events.size else t[-1]
            hits = out_t[(out_t >= start) & (out_t < stop)]
            if hits.size % 2 == 1:
                d = float(hits[-1] - start)
                worst = d if worst is None else max(worst, d)
                responded = True
        if not responded:
            raise MeasurementError(
                f"output {node!r} never settles to a new level after input event at t={events[in_window[0]]:.6g} s")
    return worst


def pdp(power_W: float, delay_s: float) -> float:
    if not (np.isfinite(power_W) and np.isfinite(delay_s)) or power_W < 0 or delay_s < 0:
        raise MeasurementError(f"pdp needs finite non-negative inputs, got {power_W}, {delay_s}")
    return power_W * delay_s


def evaluate_measures(c: Circuit, w: Waveform) -> dict:
    """Evaluate every ``.measure`` of ``c`` on ``w``; returns ``{name: value}``."""
    results = {}
    power = delay = None
    for m in c.measures:
        if isinstance(m, AvgPower):
            results[m.name] = power = average_power(w, m.source, (m.t_from, m.t_to), c)
        elif isinstance(m, Delay):
            results[m.name] = delay = propagation_delay(w, m.in_nodes, m.out_nodes, _supply_voltage(c), m.fraction,
                                                        (m.t_from, m.t_to))
    for m in c.measures:
        if isinstance(m, Pdp):
            if power is None or delay is None:
                raise MeasurementError(f"measure {m.name}: PDP needs an AVG power and a DELAY measure")
            results[m.name] = pdp(power, delay)
    return results


def _supply_voltage(c: Circuit) -> float:
    dc = [s.shape.volts for s in c.sources if isinstance(s.shape, Dc)]
    for s in c.sources:
        if s.name.upper() == "VDD" and isinstance(s.shape, Dc):
            return s.shape.volts
    if dc:
        return max(dc)
    raise MeasurementError("no DC supply to reference delay thresholds against")


def measure_bench(bench: Circuit, opts: SolverOptions = SolverOptions(),
                  model: ModelConfig = ModelConfig()) -> Measurements:
    """Simulate a generated test bench and extract its figures of merit."""
    w = transient(bench, opts, model)
    r = evaluate_measures(bench, w)
    return Measurements(r["power"], r["delay"], r["pdp"])


# -- sweep ---------------------------------------------------------------------

@dataclass
class SweepTable:
    vdd_axis: tuple
    temp_axis: tuple
    cells: list  # [vdd index][temp index] -> Measurements

    def column(self, attr: str, temp: float) -> np.ndarray:
        j = self.temp_axis.index(temp)
        return np.array([getattr(row[j], attr) for row in self.cells])

    def row(self, attr: str, vdd: float) -> np.ndarray:
        i = self.vdd_axis.index(vdd)
        return np.array([getattr(m, attr) for m in self.cells[i]])

    def grid(self, attr: str) -> np.ndarray:
        return np.array([[getattr(m, attr) for m in row] for row in self.cells])

    def to_csv(self, path_or_file):
        def write(fh):
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["vdd_V", "temp_C", "power_W", "delay_s", "pdp_J"])
            for vdd, row in zip(self.vdd_axis, self.cells):
                for temp, m in zip(self.temp_axis, row):
                    w.writerow([repr(float(x)) for x in (vdd, temp, m.power_W, m.delay_s, m.pdp_J)])

        if hasattr(path_or_file, "write"):
            write(path_or_file)
        else:
            with open(path_or_file, "w", newline="") as fh:
                write(fh)


class SweepError(SimulationError):
    def __init__(self, message, vdd, temp):
        self.vdd = vdd
        self.temp = temp
        super().__init__(message)


def _strictly_increasing(axis):
    return len(axis) > 0 and all(b > a for a, b in zip(axis, axis[1:]))


def _sweep_point(args):
    factory, cfg, stim, opts, model = args
    cell = generate(factory, cfg) if isinstance(factory, str) else factory(cfg)
    bench = generate_testbench(cell, cfg, stim)
    return measure_bench(bench, opts, model)


def run_sweep(cell_factory="proposed-buffered", vdd_axis: Sequence[float] = DEFAULT_VDD_AXIS,
              temp_axis: Sequence[float] = DEFAULT_TEMP_AXIS, opts: SolverOptions = SolverOptions(),
              base: CellConfig = CellConfig(), stim: Stimulus = Stimulus(),
              model: ModelConfig = ModelConfig(), workers: Optional[int] = None) -> SweepTable:
    """Simulate the cell on every (VDD, temperature) point.

    ``cell_factory`` is a style name understood by :func:`adder_cells.generate`
    or a callable ``CellConfig -> Cell``. ``workers`` defaults to
    ``NANOSIM_THREADS`` (or 1); results are placed by grid index, so the table
    does not depend on scheduling.
    """
    vdd_axis, temp_axis = tuple(float(v) for v in vdd_axis), tuple(float(t) for t in temp_axis)
    if not (_strictly_increasing(vdd_axis) and _strictly_increasing(temp_axis)):
        raise ValueError("sweep axes must be non-empty and strictly increasing")
    if workers is None:
        workers = int(os.environ.get("NANOSIM_THREADS", "1") or 1)
    points = [(i, j, replace(base, vdd=v, temp_C=t))
              for i, v in enumerate(vdd_axis) for j, t in enumerate(temp_axis)]
    jobs = [(cell_factory, cfg, stim, opts, model) for _, _, cfg in points]

    cells = [[None] * len(temp_axis) for _ in vdd_axis]

    def place(k, result):
        i, j, cfg = points[k]
        cells[i][j] = result
        log.info("vdd=%.3g temp=%.3g: P=%.4g W D=%.4g s", cfg.vdd, cfg.temp_C, result.power_W, result.delay_s)

    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_sweep_point, job) for job in jobs]
            for k, fut in enumerate(futures):
                try:
                    place(k, fut.result())
                except Exception as exc:
                    _, _, cfg = points[k]
                    raise SweepError(f"sweep point vdd={cfg.vdd} temp={cfg.temp_C} failed: {exc}",
                                     cfg.vdd, cfg.temp_C) from exc
    else:
        for k, job in enumerate(jobs):
            try:
                place(k, _sweep_point(job))
            except Exception as exc:
                _, _, cfg = points[k]
                raise SweepError(f"sweep point vdd={cfg.vdd} temp={cfg.temp_C} failed: {exc}",
                                 cfg.vdd, cfg.temp_C) from exc
    return SweepTable(vdd_axis, temp_axis, cells)


def relative_spread(values) -> float:
    values = np.asarray(values, dtype=float)
    return float((values.max() - values.min()) / values.mean())


def trend_report(table: SweepTable, ref_temp: float = 27.0, ref_vdd: float = 0.9) -> dict:
    """Monotonicity and temperature-flatness verdicts for a sweep."""
    out = {}
    if ref_temp in table.temp_axis and len(table.vdd_axis) > 1:
        p = table.column("power_W", ref_temp)
        d = table.column("delay_s", ref_temp)
        out["power_increasing_with_vdd"] = bool(np.all(np.diff(p) > 0))
        out["delay_decreasing_with_vdd"] = bool(np.all(np.diff(d) < 0))
        if ref_vdd in table.vdd_axis and len(table.temp_axis) > 1:
            across_t = relative_spread(table.row("power_W", ref_vdd))
            across_v = relative_spread(p)
            out["power_spread_over_temp"] = across_t
            out["power_spread_over_vdd"] = across_v
            out["power_flat_in_temperature"] = across_t < across_v
    return out


# -- fixture tables --------------------------------------------------------------

@dataclass(frozen=True)
class Grid:
    vdd_axis: tuple
    temp_axis: tuple
    values: np.ndarray

    def __getitem__(self, key):
        vdd, temp = key
        return float(self.values[_axis_index(self.vdd_axis, vdd), _axis_index(self.temp_axis, temp)])


def _axis_index(axis, value):
    for i, a in enumerate(axis):
        if abs(a - value) <= 1e-9 * max(1.0, abs(a)):
            return i
    raise KeyError(value)


@dataclass(frozen=True)
class FixtureTables:
    power: Grid
    delay: Grid
    pdp: Grid


def fixture_path():
    return resources.files("nanosim") / "data" / "reference_tables.csv"


def load_fixture_tables(path=None) -> FixtureTables:
    """Read the published power/delay/PDP tables (SI units) into 6x7 grids."""
    path = fixture_path() if path is None else path
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise MeasurementError(f"cannot read fixture {path}: {exc}") from None
    data = {}
    try:
        for r in rows:
            table = r["table"].strip()
            if table not in ("power", "delay", "pdp"):
                raise MeasurementError(f"unknown table {table!r}")
            data.setdefault(table, {})[(float(r["vdd_V"]), float(r["temp_C"]))] = float(r["value"])
    except (KeyError, TypeError, ValueError) as exc:
        raise MeasurementError(f"malformed fixture {path}: {exc}") from None
    grids = {}
    for name in ("power", "delay", "pdp"):
        if name not in data:
            raise MeasurementError(f"fixture lacks table {name!r}")
        cells = data[name]
        vdds = tuple(sorted({k[0] for k in cells}))
        temps = tuple(sorted({k[1] for k in cells}))
        if len(cells) != len(vdds) * len(temps):
            raise MeasurementError(f"table {name!r} is not a full grid")
        values = np.array([[cells[(v, t)] for t in temps] for v in vdds])
        grids[name] = Grid(vdds, temps, values)
    return FixtureTables(**grids)


def pdp_consistency(tables: FixtureTables) -> np.ndarray:
    """Per-cell ``|pdp - power*delay| / pdp``."""
    prod = np.vectorize(pdp)(tables.power.values, tables.delay.values)
    return np.abs(tables.pdp.values - prod) / tables.pdp.values
