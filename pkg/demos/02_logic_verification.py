"""Switch-level check of every generated cell, plus a deliberately broken one."""
from nanosim import build_switch_network, check_equivalence, full_adder_reference, generate, parse, serialize
from nanosim.adder_cells import INPUTS, STYLES
from nanosim.switch_logic import complemented

for style in sorted(STYLES):
    cell = generate(style)
    net = build_switch_network(cell.circuit, INPUTS, cell.outputs)
    report = check_equivalence(net, complemented(full_adder_reference, cell.inverted))
    print(f"== {style} ({cell.device_count} CNTFETs)")
    print(report.render())

# rewire the gate of one pull-down device and let the checker find a counterexample
cell = generate("proposed24")
lines = serialize(cell.circuit).splitlines()
k = next(i for i, line in enumerate(lines) if line.startswith("MN2 "))
fields = lines[k].split()
fields[2] = "A" if fields[2] == "C" else "C"
lines[k] = " ".join(fields)
net = build_switch_network(parse("\n".join(lines)), INPUTS, cell.outputs)
print("\n== core24 with", lines[k].split()[0], "gated by", fields[2])
print(check_equivalence(net, complemented(full_adder_reference, cell.inverted)).render().splitlines()[-1])
