"""Compare the seven beamforming structures on one channel draw.

For each structure the reduced dimension, the achieved WSR relative to the
unrestricted solution, and the worst inter-group leakage of the final
beamformer are tabulated.  MZF nulls inter-group interference exactly; the
range-space structure matches the full solution while its dimension is
independent of the antenna count.

Run:  python demos/02_structure_gallery.py [snr_db]
"""

import sys

import numpy as np

from mgbeam import PagdSolver, StructureKind, build_basis, generate_rayleigh_scenario, run_cm

snr_db = float(sys.argv[1]) if len(sys.argv) > 1 else 20.0
scenario = generate_rayleigh_scenario(L=16, G=3, group_sizes=(4, 4, 4),
                                      snr_db=snr_db, seed=1)
solver = PagdSolver()


def worst_leakage(W):
    worst = 0.0
    for g in range(scenario.G):
        Hg = scenario.group_channels(g)
        for i in range(scenario.G):
            if i == g:
                continue
            rel = np.abs(Hg.conj().T @ W[:, i]) / (
                np.linalg.norm(Hg, axis=0) * np.linalg.norm(W[:, i]))
            worst = max(worst, float(np.max(rel)))
    return worst


print(f"SNR {snr_db:g} dB, L=16, G=3, K_g=4")
print(f"{'structure':10s} {'dims':12s} {'WSR':>8s} {'vs full':>8s} {'leakage':>9s}")
reference = None
for kind in StructureKind:
    basis = build_basis(scenario, kind)
    report = run_cm(scenario, basis, solver)
    if reference is None:
        reference = report.wsr
    print(f"{kind.value:10s} {str(basis.dims):12s} {report.wsr:8.4f} "
          f"{report.wsr / reference:8.4f} {worst_leakage(report.beamformer.W):9.1e}")
