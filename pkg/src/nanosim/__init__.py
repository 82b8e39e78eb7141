"""CNTFET circuit simulation, full-adder cell generation and power/delay measurement."""

from .adder_cells import (CellConfig, Stimulus, generate, generate_majority_fa, generate_proposed_fa,
                          generate_testbench)
from .device_model import (Chirality, CntfetParams, ModelConfig, Polarity, conductances, diameter,
                           drain_current, is_semiconducting, threshold_voltage)
from .measure import (Measurements, average_power, load_fixture_tables, measure_bench, pdp,
                      propagation_delay, run_sweep)
from .mna_engine import SolverOptions, Waveform, dc_operating_point, transient
from .netlist import Circuit, parse, parse_file, serialize, validate
from .switch_logic import (LogicLevel, build_switch_network, check_equivalence, eval_network,
                           full_adder_reference, majority)

__version__ = "0.1.0"

__all__ = [
    "CellConfig", "Stimulus", "generate", "generate_majority_fa", "generate_proposed_fa",
    "generate_testbench", "Chirality", "CntfetParams", "ModelConfig", "Polarity", "conductances",
    "diameter", "drain_current", "is_semiconducting", "threshold_voltage", "Measurements",
    "average_power", "load_fixture_tables", "measure_bench", "pdp", "propagation_delay", "run_sweep",
    "SolverOptions", "Waveform", "dc_operating_point", "transient", "Circuit", "parse", "parse_file",
    "serialize", "validate", "LogicLevel", "build_switch_network", "check_equivalence",
    "eval_network", "full_adder_reference", "majority",
]
