"""Simulate the buffered cell at 0.9 V and print its output levels per input vector."""
import time

import numpy as np

from nanosim import CellConfig, Stimulus, generate, generate_testbench, transient
from nanosim.measure import evaluate_measures

cfg, stim = CellConfig(vdd=0.9, temp_C=27.0), Stimulus()
cell = generate("proposed-buffered", cfg)
bench = generate_testbench(cell, cfg, stim)
start = time.perf_counter()
w = transient(bench)
print(f"{w.times.size} time points in {time.perf_counter() - start:.1f} s\n")

print(" A B C   SUM   COUT")
for k in range(8, 16):
    t = (k + 1) * stim.slot - 2e-12
    a, b, c = stim.vector(k)
    s, co = (float(np.interp(t, w.times, w.v(o))) for o in cell.outputs)
    print(f" {a} {b} {c}  {s:.3f}  {co:.3f}")

m = evaluate_measures(bench, w)
print(f"\npower {m['power']:.4e} W, delay {m['delay']:.4e} s, PDP {m['pdp']:.4e} J")
w.to_csv("fa_transient.csv")
print("waveforms written to fa_transient.csv")
