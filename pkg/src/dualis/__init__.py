"""Partition-function estimation for Ising/Potts models on dual factor graphs.

The package builds hypercubic lattice models (2D/3D Ising, 2D q-state
Potts, both ferromagnetic and in an external field), transforms them to
their dual factor-graph form, and estimates the partition function and the
free energy per site by importance sampling, uniform sampling, dual-domain
Gibbs sampling and annealed importance sampling.  Exact brute-force
oracles on small lattices back every estimator with ground truth.
"""

__version__ = "0.1.0"

from .dual import (
    DualConfig,
    DualFactors,
    dual_factors,
    dual_site_value,
    dual_site_values,
    log_bond_weight,
    log_duality_constant,
    log_proposal_normalizer,
    log_site_weight,
)
from .estimator import (
    EstimateAccumulator,
    EstimateSeries,
    free_energy_per_site,
    run_is,
    run_uniform,
    stream_update,
    variance_diagnostics,
)
from .lattice import LatticeTopology, bond_endpoints, build_lattice, incident_bonds
from .models import (
    ISING,
    POTTS,
    ModelSpec,
    SpinConfig,
    boltzmann_log_weight,
    hamiltonian,
    sample_params,
)
from .oracle import (
    ExactResult,
    SizeGuardError,
    chi_squared_divergence,
    exact_dual_distribution,
    exact_log_Z,
    exact_log_Zd,
    exact_summary,
)
from .runner import ConfigError, ExperimentConfig, run_experiment, run_histogram
from .samplers import (
    AISResult,
    AnnealSchedule,
    GibbsState,
    ais_run,
    draw_is_sample,
    draw_uniform_sample,
    gibbs_sweep,
    gibbs_sweeps,
)

__all__ = [
    "AISResult",
    "AnnealSchedule",
    "ConfigError",
    "DualConfig",
    "DualFactors",
    "EstimateAccumulator",
    "EstimateSeries",
    "ExactResult",
    "ExperimentConfig",
    "GibbsState",
    "ISING",
    "LatticeTopology",
    "ModelSpec",
    "POTTS",
    "SizeGuardError",
    "SpinConfig",
    "ais_run",
    "bond_endpoints",
    "boltzmann_log_weight",
    "build_lattice",
    "chi_squared_divergence",
    "draw_is_sample",
    "draw_uniform_sample",
    "dual_factors",
    "dual_site_value",
    "dual_site_values",
    "exact_dual_distribution",
    "exact_log_Z",
    "exact_log_Zd",
    "exact_summary",
    "free_energy_per_site",
    "gibbs_sweep",
    "gibbs_sweeps",
    "hamiltonian",
    "incident_bonds",
    "log_bond_weight",
    "log_duality_constant",
    "log_proposal_normalizer",
    "log_site_weight",
    "run_experiment",
    "run_histogram",
    "run_is",
    "run_uniform",
    "sample_params",
    "stream_update",
    "variance_diagnostics",
]
