"""
Command line front end.

    nanosim gen proposed24|proposed-buffered|majority-ref (-o FILE | --stdout) [--bench]
    nanosim verify DECK [--inputs A,B,C] [--outputs ...] [--oracle full-adder|majority]
    nanosim run DECK [--csv FILE]
    nanosim sweep [--style S] [--vdd 0.7:1.2:0.1] [--temp 0:54:9] [--csv FILE]
                  [--check-fixture PATH] [--check-trends]

Exit codes: 0 success, 1 check or solver failure, 2 usage or parse error.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys

from . import adder_cells, measure, netlist, switch_logic
from .adder_cells import CellConfig, Stimulus
from .device_model import Chirality, DomainError, ModelConfig
from .mna_engine import SimulationError, SolverOptions, dc_operating_point, transient
from .netlist import Op, Tran

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

log = logging.getLogger("nanosim")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def parse_range(text: str):
    """``start:stop:step`` inclusive of stop when it lands within half a step;
    a bare number is a one-point axis."""
    parts = text.split(":")
    try:
        nums = [float(p) for p in parts]
    except ValueError:
        raise UsageError(f"bad range {text!r}") from None
    if len(nums) == 1:
        return (nums[0],)
    if len(nums) != 3 or not nums[2] > 0 or nums[1] < nums[0]:
        raise UsageError(f"range must be start:stop:step with step > 0 and stop >= start, got {text!r}")
    start, stop, step = nums
    count = int(math.floor((stop - start) / step + 0.5)) + 1
    # round away float noise such as 0.7 + 3*0.1 = 0.9999999999999999
    return tuple(round(start + k * step, 12) for k in range(count))


def _chirality(text):
    try:
        n, m = (int(x) for x in text.split(","))
        return Chirality(n, m)
    except (ValueError, DomainError):
        raise argparse.ArgumentTypeError(f"chirality must be n,m with n >= m >= 0, got {text!r}")


def load_model_config(path) -> ModelConfig:
    values = {}
    with open(path) as fh:
        for no, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{no}: expected key=value")
            key, _, val = line.partition("=")
            values[key.strip()] = val
    try:
        return ModelConfig.from_mapping(values)
    except (DomainError, ValueError) as exc:
        raise UsageError(f"{path}: {exc}") from None


def _cell_config(args, **over) -> CellConfig:
    try:
        return CellConfig(vdd=args.vdd_value, temp_C=args.temp_value, n_chirality=args.n_chirality,
                          p_chirality=args.p_chirality, tubes_n=args.tubes_n, tubes_p=args.tubes_p,
                          load_cap=args.load_cap, **over)
    except adder_cells.CellConfigError as exc:
        raise UsageError(str(exc)) from None


def _read_deck(path):
    try:
        c = netlist.parse_file(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None
    except netlist.NetlistError as exc:
        raise UsageError(f"{path}: {exc}") from None
    errs = netlist.errors(c)
    if errs:
        raise UsageError(f"{path}: " + "; ".join(map(str, errs)))
    return c


def _emit(text, out_path):
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# -- subcommands ---------------------------------------------------------------

def cmd_gen(args, model):
    if not args.output and not args.stdout:
        raise UsageError("gen needs -o FILE or --stdout")
    cfg = _cell_config(args)
    cell = adder_cells.generate(args.style, cfg)
    circuit = cell.circuit
    if args.bench:
        circuit = adder_cells.generate_testbench(cell, cfg, Stimulus(args.period, args.transition))
    text = netlist.serialize(circuit)
    _emit(text, None if args.stdout else args.output)
    log.info("%s: %d CNTFETs, outputs %s", args.style, cell.device_count, ",".join(cell.outputs))
    return EXIT_OK


def _default_outputs(c, oracle):
    nodes = c.nodes
    if oracle == "majority":
        for cand in ("COUT", "COUT_B"):
            if cand in nodes:
                return (cand,)
    else:
        if {"SUM", "COUT"} <= nodes:
            return ("SUM", "COUT")
        if {"SUM_B", "COUT_B"} <= nodes:
            return ("SUM_B", "COUT_B")
    raise UsageError("cannot infer output nodes; pass --outputs")


def cmd_verify(args, model):
    c = _read_deck(args.deck)
    inputs = tuple(x for x in args.inputs.split(",") if x)
    outputs = tuple(x for x in args.outputs.split(",") if x) if args.outputs else _default_outputs(c, args.oracle)
    try:
        net = switch_logic.build_switch_network(c, inputs, outputs)
    except switch_logic.NetworkError as exc:
        raise UsageError(str(exc)) from None
    if args.oracle == "majority":
        oracle = switch_logic.majority
        if len(inputs) != 3 or len(outputs) != 1:
            raise UsageError("majority oracle needs 3 inputs and 1 output")
    else:
        oracle = switch_logic.full_adder_reference
        if len(inputs) != 3 or len(outputs) != 2:
            raise UsageError("full-adder oracle needs 3 inputs and 2 outputs (sum, cout)")
    # outputs named *_B carry the complement
    mask = tuple(o.upper().endswith("_B") for o in outputs)
    report = switch_logic.check_equivalence(net, switch_logic.complemented(oracle, mask))
    print(report.render())
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_run(args, model):
    c = _read_deck(args.deck)
    opts = SolverOptions()
    try:
        if any(isinstance(a, Op) for a in c.analyses):
            op = dc_operating_point(c, opts, model=model)
            for node in sorted(op.voltages, key=str):
                if node != netlist.GROUND:
                    print(f"v({node})={op.voltages[node]:.6g}")
            for name, cur in op.source_currents.items():
                print(f"i({name})={cur:.6g}")
        if any(isinstance(a, Tran) for a in c.analyses):
            w = transient(c, opts, model)
            if args.csv:
                w.to_csv(args.csv)
            for name, value in measure.evaluate_measures(c, w).items():
                print(f"{name}={value:.6g}")
    except (SimulationError, measure.MeasurementError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_sweep(args, model):
    vdds = parse_range(args.vdd)
    temps = parse_range(args.temp)
    cfg = _cell_config(args)
    status = EXIT_OK
    try:
        table = measure.run_sweep(args.style, vdds, temps, SolverOptions(), base=cfg,
                                  stim=Stimulus(args.period, args.transition), model=model)
    except SimulationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    _emit_table(table, args.csv)

    trends = measure.trend_report(table)
    for key, val in trends.items():
        print(f"# {key}: {val}", file=sys.stderr)
    if args.check_trends:
        verdicts = [v for k, v in trends.items() if isinstance(v, bool)]
        if not verdicts:
            print("# trend check needs the 27 C column and at least two VDD points", file=sys.stderr)
            status = EXIT_FAIL
        elif not all(verdicts):
            status = EXIT_FAIL

    if args.check_fixture:
        try:
            tables = measure.load_fixture_tables(args.check_fixture)
        except measure.MeasurementError as exc:
            raise UsageError(str(exc)) from None
        err = float(measure.pdp_consistency(tables).max())
        ok = err <= 1e-3
        print(f"# fixture PDP = power x delay: max relative error {err:.3e} ({'PASS' if ok else 'FAIL'})",
              file=sys.stderr)
        if not ok:
            status = EXIT_FAIL
    return status


def _emit_table(table, path):
    if path:
        table.to_csv(path)
    else:
        table.to_csv(sys.stdout)


# -- argument parsing ------------------------------------------------------------

def _common(top: bool):
    # subcommand copies must not overwrite values given before the subcommand
    default = {} if top else {"default": argparse.SUPPRESS}
    p = _Parser(add_help=False)
    p.add_argument("--config", help="model config file of key=value lines", **default)
    p.add_argument("-q", "--quiet", action="store_true", **default)
    p.add_argument("-v", "--verbose", action="store_true", **default)
    return p


def build_parser():
    common = _common(top=False)

    cell = _Parser(add_help=False)
    cell.add_argument("--vdd", dest="vdd_value", type=float, default=0.9)
    cell.add_argument("--temp", dest="temp_value", type=float, default=27.0)
    cell.add_argument("--n-chirality", type=_chirality, default=Chirality(19, 0))
    cell.add_argument("--p-chirality", type=_chirality, default=Chirality(19, 0))
    cell.add_argument("--tubes-n", type=int, default=3)
    cell.add_argument("--tubes-p", type=int, default=3)
    cell.add_argument("--load-cap", type=float, default=2e-15)
    cell.add_argument("--period", type=float, default=800e-12, help="stimulus base period T (s)")
    cell.add_argument("--transition", type=float, default=10e-12, help="input edge time (s)")

    p = _Parser(prog="nanosim", description="CNTFET full-adder simulator", parents=[_common(top=True)])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", parents=[common, cell], help="write a generated cell deck")
    g.add_argument("style", choices=sorted(adder_cells.STYLES))
    g.add_argument("-o", "--output")
    g.add_argument("--stdout", action="store_true")
    g.add_argument("--bench", action="store_true", help="wrap the cell in its transient test bench")
    g.set_defaults(func=cmd_gen)

    v = sub.add_parser("verify", parents=[common], help="switch-level truth-table check")
    v.add_argument("deck")
    v.add_argument("--inputs", default="A,B,C")
    v.add_argument("--outputs")
    v.add_argument("--oracle", choices=("full-adder", "majority"), default="full-adder")
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("run", parents=[common], help="run the deck's analyses")
    r.add_argument("deck")
    r.add_argument("-o", "--csv", dest="csv")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", parents=[common], help="VDD x temperature sweep")
    s.add_argument("--style", choices=sorted(adder_cells.STYLES), default="proposed-buffered")
    s.add_argument("--vdd", default="0.7:1.2:0.1")
    s.add_argument("--temp", default="0:54:9")
    s.add_argument("-o", "--csv", dest="csv")
    s.add_argument("--check-fixture", metavar="PATH")
    s.add_argument("--check-trends", action="store_true")
    for action in cell._actions:
        if action.dest not in ("vdd_value", "temp_value", "help"):
            s._add_action(action)
    s.set_defaults(func=cmd_sweep, vdd_value=0.9, temp_value=27.0)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        level = logging.WARNING if args.quiet else logging.DEBUG if args.verbose else logging.INFO
        logging.basicConfig(level=level, format="%(message)s", stream=sys.stderr)
        model = load_model_config(args.config) if args.config else ModelConfig()
        return args.func(args, model)
    except UsageError as exc:
        print(f"nanosim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
