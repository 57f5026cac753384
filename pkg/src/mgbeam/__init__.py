"""Multi-group multicast beamforming for weighted sum-rate maximization.

Library layout:

* :mod:`mgbeam.model` — problem instances and physical-layer metrics.
* :mod:`mgbeam.structures` — full/low-dimensional beamforming bases.
* :mod:`mgbeam.cm` — cyclic-maximization outer loop and its surrogate.
* :mod:`mgbeam.pagd` — dual-descent inner solver with KKT certificates.
* :mod:`mgbeam.baselines` — subgradient and log-sum-exp inner solvers.
* :mod:`mgbeam.bench` — seeded Monte-Carlo experiment harness.
"""

from .model import (Beamformer, Scenario, generate_rayleigh_scenario, group_rate,
                    range_space_residual, scale_to_power, sinr, sinr_all, sinr_hat,
                    transmit_power, wsr)
from .structures import (StructureBasis, StructureInfeasibleError, StructureKind,
                         build_basis, expand, reduced_power)
from .cm import CmOptions, CmReport, CmState, run_cm
from .pagd import (DualState, KktCertificate, PagdOptions, PagdReport, PagdSolver,
                   beamformer_from_dual, dual_objective, kkt_certificate, pagd_step,
                   solve_subproblem)
from .baselines import (BaselineOptions, BaselineReport, LseSolver, SaSolver,
                        solve_subproblem_lse, solve_subproblem_sa)
from .bench import ExperimentConfig, TrialRecord, emit_table, emit_trace, run_experiment

__version__ = "0.1.0"

__all__ = [
    "Beamformer", "Scenario", "generate_rayleigh_scenario", "group_rate",
    "range_space_residual", "scale_to_power", "sinr", "sinr_all", "sinr_hat",
    "transmit_power", "wsr",
    "StructureBasis", "StructureInfeasibleError", "StructureKind", "build_basis",
    "expand", "reduced_power",
    "CmOptions", "CmReport", "CmState", "run_cm",
    "DualState", "KktCertificate", "PagdOptions", "PagdReport", "PagdSolver",
    "beamformer_from_dual", "dual_objective", "kkt_certificate", "pagd_step",
    "solve_subproblem",
    "BaselineOptions", "BaselineReport", "LseSolver", "SaSolver",
    "solve_subproblem_lse", "solve_subproblem_sa",
    "ExperimentConfig", "TrialRecord", "emit_table", "emit_trace", "run_experiment",
]
