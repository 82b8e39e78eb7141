"""Check that the bundled reference tables are internally consistent (PDP = power x delay)."""
from nanosim import load_fixture_tables
from nanosim.measure import pdp_consistency

tables = load_fixture_tables()
err = pdp_consistency(tables)
print(f"{err.size} cells, max relative error {err.max():.2e}")
p, d, e = tables.power[0.7, 0.0], tables.delay[0.7, 0.0], tables.pdp[0.7, 0.0]
print(f"0.7 V, 0 C: {p:.4e} W x {d:.4e} s = {p * d:.4e} J (table: {e:.4e} J)")
for v in tables.power.vdd_axis:
    print(f"{v:.1f} V, 27 C: power {tables.power[v, 27.0]:.4e} W, delay {tables.delay[v, 27.0]:.4e} s")
