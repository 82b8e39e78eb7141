import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nanosim.device_model import Chirality, Polarity
from nanosim.netlist import Capacitor, Circuit, Cntfet, Dc, Op, Source, parse
from nanosim.switch_logic import (LogicLevel, NetworkError, build_switch_network, check_equivalence,
                                  complemented, eval_network, full_adder_reference, majority,
                                  stage_is_complementary)

ONE, ZERO, Z, X = LogicLevel.ONE, LogicLevel.ZERO, LogicLevel.Z, LogicLevel.X
SUPPLY = "VDD vdd 0 DC 0.9\n"


def deck(body):
    return parse(SUPPLY + body + ".op\n.end\n")


# -- references --------------------------------------------------------------------

@pytest.mark.parametrize("bits", list(itertools.product((0, 1), repeat=3)))
def test_full_adder_reference_matches_arithmetic(bits):
    total = sum(bits)
    assert full_adder_reference(*bits) == (total % 2, total // 2)


@pytest.mark.parametrize("bits", list(itertools.product((0, 1), repeat=3)))
def test_majority_is_carry(bits):
    assert majority(*bits) == int(sum(bits) >= 2)


def test_complemented_flips_selected_outputs():
    f = complemented(full_adder_reference, (True, False))
    assert f(1, 1, 0) == (1, 1)
    assert complemented(majority, (True,))(0, 0, 1) == (1,)


# -- small networks -------------------------------------------------------------------

INV = "MP1 y a vdd pfet n=19 m=0\nMN1 y a 0 nfet n=19 m=0\n"
NAND2 = ("MP1 y a vdd pfet n=19 m=0\nMP2 y b vdd pfet n=19 m=0\n"
         "MN1 y a x1 nfet n=19 m=0\nMN2 x1 b 0 nfet n=19 m=0\n")


def test_inverter_truth_table():
    net = build_switch_network(deck(INV), ["a"], ["y"])
    assert eval_network(net, {"a": 0}) == {"y": ONE}
    assert eval_network(net, {"a": 1}) == {"y": ZERO}
    assert eval_network(net, {"a": X}) == {"y": X}


def test_nand_equivalence_and_render():
    net = build_switch_network(deck(NAND2), ["a", "b"], ["y"])
    report = check_equivalence(net, lambda a, b: 1 - (a & b))
    assert report.passed and len(report.rows) == 4
    assert report.render().splitlines()[-1] == "PASS (4 vectors)"
    assert stage_is_complementary(net, "y")


def test_wrong_oracle_reports_first_counterexample():
    net = build_switch_network(deck(NAND2), ["a", "b"], ["y"])
    report = check_equivalence(net, lambda a, b: a | b)
    assert not report.passed
    assert report.failure[0] == (0, 0)
    assert report.render().splitlines()[-1] == "FAIL at a=0, b=0: expected y=0, got y=1"


def test_pull_down_only_stage_floats():
    net = build_switch_network(deck("MN1 y a 0 nfet n=19 m=0\nCL y 0 1f\n"), ["a"], ["y"])
    assert eval_network(net, {"a": 1}) == {"y": ZERO}
    assert eval_network(net, {"a": 0}) == {"y": Z}
    assert not stage_is_complementary(net, "y")


def test_fight_resolves_to_x():
    # both networks conduct for a = 0
    net = build_switch_network(deck("MP1 y a vdd pfet n=19 m=0\nMN1 y b 0 nfet n=19 m=0\n"), ["a", "b"], ["y"])
    assert eval_network(net, {"a": 0, "b": 1}) == {"y": X}
    assert eval_network(net, {"a": 0, "b": 0}) == {"y": ONE}
    assert eval_network(net, {"a": 1, "b": 0}) == {"y": Z}


def test_unknown_switch_blocks_definite_value():
    net = build_switch_network(deck(NAND2), ["a", "b"], ["y"])
    assert eval_network(net, {"a": 1, "b": X}) == {"y": X}
    # a = 0 closes a pull-up and opens the pull-down path whatever b is
    assert eval_network(net, {"a": 0, "b": X}) == {"y": ONE}


def test_hidden_stage_is_discovered():
    buf = INV + "MP2 z y vdd pfet n=19 m=0\nMN2 z y 0 nfet n=19 m=0\n"
    net = build_switch_network(deck(buf), ["a"], ["z"])
    assert net.order == ("y", "z")
    assert eval_network(net, {"a": 1}) == {"z": ONE}


def test_rejects_resistor():
    with pytest.raises(NetworkError, match="not a switch"):
        build_switch_network(deck(INV + "R1 y 0 1k\n"), ["a"], ["y"])


def test_rejects_channel_on_primary_input():
    with pytest.raises(NetworkError, match="primary input"):
        build_switch_network(deck("MN1 y a b nfet n=19 m=0\nMP1 y a vdd pfet n=19 m=0\n"), ["a", "b"], ["y"])


def test_rejects_missing_supply():
    c = parse("VIN a 0 DC -1\nMN1 y a 0 nfet n=19 m=0\n.op\n.end\n")
    with pytest.raises(NetworkError, match="supply"):
        build_switch_network(c, ["a"], ["y"])


def test_rejects_unknown_node():
    with pytest.raises(NetworkError, match="not in the circuit"):
        build_switch_network(deck(INV), ["a"], ["q"])


def test_rejects_ring_oscillator():
    ring = "".join(f"MP{k} n{(k + 1) % 3} n{k} vdd pfet n=19 m=0\nMN{k} n{(k + 1) % 3} n{k} 0 nfet n=19 m=0\n"
                   for k in range(3))
    with pytest.raises(NetworkError, match="cycle"):
        build_switch_network(deck(ring), [], ["n0"])


def test_explicit_vdd_overrides_detection():
    net = build_switch_network(deck(INV), ["a"], ["y"], vdd="vdd")
    assert net.vdd == "vdd"


# -- random series/parallel gates --------------------------------------------------

def exprs(names=("A", "B", "C")):
    leaf = st.sampled_from(names)
    return st.recursive(leaf, lambda kids: st.tuples(st.sampled_from("sp"), kids, kids), max_leaves=6)


def conducts(expr, env):
    if isinstance(expr, str):
        return env[expr]
    op, a, b = expr
    return (conducts(a, env) and conducts(b, env)) if op == "s" else (conducts(a, env) or conducts(b, env))


def flip(expr):
    if isinstance(expr, str):
        return expr
    op, a, b = expr
    return ("p" if op == "s" else "s", flip(a), flip(b))


def gate_devices(n_expr, p_expr):
    devs, counter = [], itertools.count()

    def place(pol, expr, top, bottom):
        if isinstance(expr, str):
            k = next(counter)
            devs.append(Cntfet(f"M{k}", top, expr, bottom, pol, Chirality(19, 0)))
            return
        op, a, b = expr
        if op == "p":
            place(pol, a, top, bottom)
            place(pol, b, top, bottom)
        else:
            mid = f"x{next(counter)}"
            place(pol, a, top, mid)
            place(pol, b, mid, bottom)

    place(Polarity.N, n_expr, "y", "0")
    place(Polarity.P, p_expr, "vdd", "y")
    # a capacitor per input keeps unused inputs in the circuit; the extractor ignores them
    devs += [Capacitor(f"C{name}", name, "0", 1e-15) for name in ("A", "B", "C")]
    return Circuit("", tuple(devs), (Source("VDD", "vdd", "0", Dc(0.9)),), (Op(),))


@settings(max_examples=150, deadline=None)
@given(exprs())
def test_dual_pull_up_gives_inverting_gate(expr):
    net = build_switch_network(gate_devices(expr, flip(expr)), ("A", "B", "C"), ("y",))
    assert stage_is_complementary(net, "y")
    report = check_equivalence(net, lambda a, b, c: int(not conducts(expr, {"A": a, "B": b, "C": c})))
    assert report.passed


@settings(max_examples=150, deadline=None)
@given(exprs(), exprs())
def test_complementarity_agrees_with_truth_tables(n_expr, p_expr):
    """A stage is complementary exactly when, for every input, the P network
    (closing on zeros) conducts iff the N network does not."""
    net = build_switch_network(gate_devices(n_expr, p_expr), ("A", "B", "C"), ("y",))
    names = sorted({s.gate for s in net.stages["y"].switches})
    expected = True
    for bits in itertools.product((0, 1), repeat=len(names)):
        env = dict(zip(names, bits))
        down = conducts(n_expr, env)
        up = conducts(p_expr, {k: not v for k, v in env.items()})
        expected &= up != down
    assert stage_is_complementary(net, "y") == expected
