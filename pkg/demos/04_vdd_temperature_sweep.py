"""Small VDD x temperature sweep with trend verdicts.

Set NANOSIM_THREADS to spread the points over worker processes.
"""
import sys

from nanosim import run_sweep
from nanosim.measure import trend_report

table = run_sweep("proposed-buffered", vdd_axis=(0.7, 0.9, 1.1), temp_axis=(0.0, 27.0, 54.0))
table.to_csv(sys.stdout)
print()
for key, value in trend_report(table).items():
    print(f"{key}: {value}")
