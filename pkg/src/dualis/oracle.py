"""Exact brute-force computations on small instances.

Everything statistical in this package is ultimately checked against the
numbers produced here: the primal partition function by summation over all
q^n_sites spin configurations, the dual partition function by summation
over all q^n_bonds bond assignments, the exact dual distribution, and the
chi-squared divergence between it and the sampling proposal (which equals
the per-sample relative variance of the importance-sampling estimator).

Enumeration runs in log space with a mixed-radix configuration counter:
configuration index i assigns digit ``(i // q**k) % q`` to variable k, so
variable 0 is the least significant digit.  Size guards are hard limits.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .dual import DualFactors, dual_factors, dual_site_values
from .models import ModelSpec, boltzmann_log_weight

MAX_SPIN_CONFIGS = 2**24
MAX_DUAL_CONFIGS = 2**20
MAX_DIST_CONFIGS = 2**16

_CHUNK = 1 << 14


class SizeGuardError(Exception):
    """The requested enumeration exceeds the configured hard limit."""


def _guard(total: int, limit: int, what: str) -> None:
    if total > limit:
        raise SizeGuardError(f"{what} needs {total} configurations (limit {limit})")


def iter_configs(n_vars: int, q: int, chunk_size: int = _CHUNK):
    """Yield (m, n_vars) digit chunks of the full mixed-radix enumeration."""
    total = q**n_vars
    powers = [q**j for j in range(n_vars)]
    for start in range(0, total, chunk_size):
        idx = np.arange(start, min(start + chunk_size, total), dtype=np.int64)
        digits = np.empty((len(idx), n_vars), dtype=np.uint8)
        for j, p in enumerate(powers):
            digits[:, j] = (idx // p) % q
        yield digits


def exact_log_Z(model: ModelSpec) -> float:
    """Exact log partition function by full spin enumeration."""
    total = model.q**model.topo.n_sites
    _guard(total, MAX_SPIN_CONFIGS, "spin enumeration")
    pieces = [
        logsumexp(boltzmann_log_weight(model, digits))
        for digits in iter_configs(model.topo.n_sites, model.q)
    ]
    return float(logsumexp(pieces))


def _dual_config_log_weights(model: ModelSpec, factors: DualFactors):
    bond_range = np.arange(model.topo.n_bonds)
    site_range = np.arange(model.topo.n_sites)
    for digits in iter_configs(model.topo.n_bonds, model.q):
        x_b = dual_site_values(model.topo, digits, model.q)
        log_w = factors.log_gamma[bond_range, digits].sum(axis=1)
        log_w += factors.log_lambda[site_range, x_b].sum(axis=1)
        yield log_w


def exact_log_Zd(model: ModelSpec, factors: DualFactors | None = None) -> float:
    """Exact log dual partition function by full bond enumeration."""
    total = model.q**model.topo.n_bonds
    _guard(total, MAX_DUAL_CONFIGS, "dual enumeration")
    factors = factors if factors is not None else dual_factors(model)
    with np.errstate(invalid="ignore"):
        pieces = [logsumexp(log_w) for log_w in _dual_config_log_weights(model, factors)]
    return float(logsumexp(pieces))


def exact_dual_distribution(model: ModelSpec, factors: DualFactors | None = None) -> np.ndarray:
    """Exact dual distribution over all bond assignments.

    Entry i is the probability of the assignment with mixed-radix index i
    (see module docstring for the digit convention).
    """
    total = model.q**model.topo.n_bonds
    _guard(total, MAX_DIST_CONFIGS, "dual distribution")
    factors = factors if factors is not None else dual_factors(model)
    log_w = np.concatenate(list(_dual_config_log_weights(model, factors)))
    log_z = logsumexp(log_w)
    with np.errstate(invalid="ignore"):
        return np.exp(log_w - log_z)


def _proposal_log_probs(factors: DualFactors) -> np.ndarray:
    """(n_bonds, q) per-bond log probabilities of the sampling proposal."""
    log_norms = logsumexp(factors.log_gamma, axis=1, keepdims=True)
    return factors.log_gamma - log_norms


def chi_squared_divergence(model: ModelSpec, factors: DualFactors | None = None) -> float:
    """Chi-squared divergence between the dual distribution and the proposal.

    Computed as ``sum p^2 / prop - 1``; it equals ``L / Z_dual^2`` times the
    variance of the L-sample importance-sampling estimate of Z_dual, so it
    is the exact per-sample relative variance of that estimator.  The
    proposal has full support for finite positive couplings, so the sum is
    always well defined.
    """
    total = model.q**model.topo.n_bonds
    _guard(total, MAX_DIST_CONFIGS, "chi-squared divergence")
    factors = factors if factors is not None else dual_factors(model)

    prop = _proposal_log_probs(factors)
    bond_range = np.arange(model.topo.n_bonds)
    log_terms = []
    log_zd_pieces = []
    for digits, log_w in zip(
        iter_configs(model.topo.n_bonds, model.q),
        _dual_config_log_weights(model, factors),
    ):
        log_q = prop[bond_range, digits].sum(axis=1)
        log_zd_pieces.append(logsumexp(log_w))
        log_terms.append(logsumexp(2.0 * log_w - log_q))
    log_zd = logsumexp(log_zd_pieces)
    ratio = math.exp(float(logsumexp(log_terms)) - 2.0 * float(log_zd))
    return max(ratio - 1.0, 0.0)


@dataclass(frozen=True)
class ExactResult:
    """Bundle of exact reference values for one small model."""

    log_Z: float
    log_Z_dual: float
    dual_distribution: np.ndarray | None = None
    chi_squared: float | None = None

    @property
    def log_duality_ratio(self) -> float:
        return self.log_Z_dual - self.log_Z


def exact_summary(
    model: ModelSpec,
    want_distribution: bool = False,
    want_chi_squared: bool = False,
) -> ExactResult:
    """Compute the exact quantities the size guards allow."""
    factors = dual_factors(model)
    return ExactResult(
        log_Z=exact_log_Z(model),
        log_Z_dual=exact_log_Zd(model, factors),
        dual_distribution=exact_dual_distribution(model, factors) if want_distribution else None,
        chi_squared=chi_squared_divergence(model, factors) if want_chi_squared else None,
    )


def dump_dual_distribution(model: ModelSpec, path) -> None:
    """Write the exact dual distribution as CSV for debugging.

    Columns: configuration index, one digit per bond, probability.
    """
    p = exact_dual_distribution(model)
    n_bonds = model.topo.n_bonds
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["config_index", *[f"bond_{k}" for k in range(n_bonds)], "probability"])
        index = 0
        for digits in iter_configs(n_bonds, model.q):
            for row in digits:
                writer.writerow([index, *row.tolist(), f"{p[index]:.9g}"])
                index += 1
