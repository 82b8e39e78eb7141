"""Tour of the CNTFET compact model: geometry, threshold and I-V curves."""
import numpy as np

from nanosim import Chirality, CntfetParams, ModelConfig, Polarity, diameter, drain_current, threshold_voltage

for n in (13, 16, 19, 22):
    c = Chirality(n, 0)
    d = diameter(c)
    print(f"({n},0): d = {d:.4f} nm, Vth = {threshold_voltage(d):.4f} V")

std = ModelConfig(diameter_formula="standard")
print(f"(10,10) diameter: default {diameter(Chirality(10, 10)):.5f} nm, "
      f"standard {diameter(Chirality(10, 10), std):.5f} nm")

p = CntfetParams.from_chirality(Polarity.N, Chirality(19, 0), tubes=3)
print("\nN device, 3 tubes, 300 K: Ids (uA)")
print("vgs \\ vds " + " ".join(f"{v:7.2f}" for v in (0.1, 0.3, 0.6, 0.9)))
for vgs in np.arange(0.0, 0.91, 0.15):
    row = [drain_current(p, vgs, vds, 300.0) * 1e6 for vds in (0.1, 0.3, 0.6, 0.9)]
    print(f"{vgs:9.2f} " + " ".join(f"{i:7.3f}" for i in row))
