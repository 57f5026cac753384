"""Show that the range-space solver's cost does not grow with the array size.

Fixes the user population (3 groups of 4) and sweeps the antenna count.  The
unrestricted solver factors an L x L system every inner iteration, so its time
grows superlinearly; the range-space reformulation works in K = 12 dimensions
regardless of L and its time stays flat, while both reach the same WSR.

Run:  python demos/04_antenna_scaling.py
"""

import numpy as np

from mgbeam.bench import ExperimentConfig, run_experiment

print(f"{'L':>4s}  {'full WSR':>9s} {'full time':>10s}  {'rs WSR':>9s} {'rs time':>9s}")
for L in (16, 32, 64, 128, 256):
    row = {}
    for structure in ("full", "rs"):
        cfg = ExperimentConfig(snr_db=(20.0,), antennas=(L,), structure=structure,
                               trials=3, base_seed=0)
        records = run_experiment(cfg)
        row[structure] = (float(np.mean([r.wsr for r in records])),
                          float(np.mean([r.wall_time_s for r in records])))
    print(f"{L:4d}  {row['full'][0]:9.4f} {row['full'][1]:9.3f}s "
          f" {row['rs'][0]:9.4f} {row['rs'][1]:8.3f}s")
