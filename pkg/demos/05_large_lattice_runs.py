"""Production-scale estimates on lattices far beyond enumeration.

Reproduces the flavor of the full experiment suite at a reduced sample
budget (pass a sample count as the first argument for bigger runs; the
acceptance suite uses 10^6).  Equivalent runs are available through the
CLI, e.g.:

    dualis --config demos/config_ising30.json --samples 1000000

which also writes the running-estimate series and a resolved-config
summary for exact replay.
"""

import sys
import time

from dualis import build_lattice, free_energy_per_site, run_is, sample_params
from dualis.rng import stream

samples = int(sys.argv[1]) if len(sys.argv) > 1 else 50_000

RUNS = [
    ("30x30 ising, strong couplings", [30, 30], [True, True], "ising", 2, (1.3, 1.5), (-1.25, -1.0)),
    ("30x30 ising, wide couplings", [30, 30], [True, True], "ising", 2, (0.25, 1.5), (-1.5, -1.25)),
    ("10x10x10 ising", [10, 10, 10], [True, True, True], "ising", 2, (1.0, 2.0), -1.5),
    ("30x30 potts q=3", [30, 30], [True, True], "potts", 3, (0.25, 2.5), (2.25, 2.5)),
]

for i, (label, dims, periodic, family, q, j_spec, h_spec) in enumerate(RUNS):
    topo = build_lattice(dims, periodic)
    model = sample_params(topo, family, q, j_spec, h_spec, stream(23, "model", i))
    started = time.perf_counter()
    series = run_is(model, samples, stream(23, "run", i))
    per_site = free_energy_per_site(series.final_log_Z, topo.n_sites)
    _, ess = series.diagnostics()
    print(f"{label:<32} per-site lnZ = {per_site:.6f} "
          f"(SE {series.final_se_per_site:.1e}, ESS {ess:.0f}, {time.perf_counter() - started:.1f}s, L={samples})")
