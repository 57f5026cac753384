"""Race the three inner solvers on matched channel draws.

The dual-descent solver certifies each subproblem through its duality gap and
dominates the primal baselines (worst-user subgradient ascent and log-sum-exp
smoothing), which trade accuracy for simplicity; the gap widens with SNR.

Run:  python demos/05_solver_comparison.py [seeds]
"""

import sys
import time

import numpy as np

from mgbeam import (LseSolver, PagdSolver, SaSolver, StructureKind, build_basis,
                    generate_rayleigh_scenario, run_cm)

n = int(sys.argv[1]) if len(sys.argv) > 1 else 5
solvers = {"cm-pagd": PagdSolver(), "cm-sa": SaSolver(), "cm-lse": LseSolver()}

print(f"{'snr':>4s} " + " ".join(f"{name:>18s}" for name in solvers))
for snr in (10.0, 20.0, 30.0):
    cells = []
    for name, solver in solvers.items():
        vals, t0 = [], time.perf_counter()
        for seed in range(n):
            sc = generate_rayleigh_scenario(16, 3, (4, 4, 4), snr, seed)
            vals.append(run_cm(sc, build_basis(sc, StructureKind.FULL), solver).wsr)
        cells.append(f"{np.mean(vals):8.4f} ({(time.perf_counter()-t0)/n:5.2f}s)")
    print(f"{snr:4.0f} " + " ".join(f"{c:>18s}" for c in cells))
