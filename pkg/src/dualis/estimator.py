"""Streaming log-domain estimation of partition functions.

Importance weights from the samplers are folded into a running log-sum
(and log-sum of squares) without ever leaving log space: products of
hundreds of site factors underflow doubles long before the estimate itself
does.  The final point estimate is

    log Z = logsumexp(weights) - log L + log_proposal_norm - log_duality_const

and both estimators (importance and uniform sampling) stream weights whose
mean targets the same ratio, so the accumulator, the standard error and
the effective sample size mean the same thing in either mode.

Accumulators are mergeable: parallel chains each own one and the merge is
associative and commutative up to roundoff, so results do not depend on
execution order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .dual import DualFactors, dual_factors
from .models import ModelSpec
from .samplers import DEFAULT_CHUNK, importance_weight_chunks, uniform_weight_chunks

LOG_ZERO = float("-inf")


@dataclass
class EstimateAccumulator:
    """Running log-domain sums of weights and squared weights.

    ``log_proposal_norm`` and ``log_duality_const`` are constant offsets
    recorded at construction so the accumulator alone can produce the
    partition-function estimate.  A ``-inf`` weight (an exactly-zero
    factor) adds nothing to the sums but still counts toward ``count``.
    """

    log_proposal_norm: float
    log_duality_const: float
    count: int = 0
    log_sum_w: float = LOG_ZERO
    log_sum_w2: float = LOG_ZERO

    @classmethod
    def for_factors(cls, factors: DualFactors) -> "EstimateAccumulator":
        return cls(
            log_proposal_norm=factors.log_proposal_norm,
            log_duality_const=factors.log_duality_const,
        )

    def update(self, log_weight: float) -> "EstimateAccumulator":
        """Fold in one log weight (finite or ``-inf``)."""
        if math.isnan(log_weight) or log_weight == math.inf:
            raise ValueError(f"invalid log weight {log_weight}")
        self.count += 1
        self.log_sum_w = np.logaddexp(self.log_sum_w, log_weight)
        self.log_sum_w2 = np.logaddexp(self.log_sum_w2, 2.0 * log_weight)
        return self

    def update_chunk(self, log_weights: np.ndarray) -> "EstimateAccumulator":
        """Fold in a batch of log weights."""
        self.count += len(log_weights)
        self.log_sum_w = float(np.logaddexp(self.log_sum_w, logsumexp(log_weights)))
        self.log_sum_w2 = float(np.logaddexp(self.log_sum_w2, logsumexp(2.0 * log_weights)))
        return self

    def merge(self, other: "EstimateAccumulator") -> "EstimateAccumulator":
        """Combine two accumulators over disjoint weight streams."""
        if (self.log_proposal_norm, self.log_duality_const) != (
            other.log_proposal_norm,
            other.log_duality_const,
        ):
            raise ValueError("cannot merge accumulators with different offsets")
        return EstimateAccumulator(
            log_proposal_norm=self.log_proposal_norm,
            log_duality_const=self.log_duality_const,
            count=self.count + other.count,
            log_sum_w=float(np.logaddexp(self.log_sum_w, other.log_sum_w)),
            log_sum_w2=float(np.logaddexp(self.log_sum_w2, other.log_sum_w2)),
        )

    @property
    def log_mean_weight(self) -> float:
        if self.count == 0:
            raise ValueError("no samples accumulated")
        return self.log_sum_w - math.log(self.count)

    @property
    def log_partition(self) -> float:
        """Estimate of log Z from the samples seen so far."""
        return self.log_mean_weight + self.log_proposal_norm - self.log_duality_const


def stream_update(acc: EstimateAccumulator, log_weight: float) -> EstimateAccumulator:
    """Fold one log weight into the accumulator (returns it for chaining)."""
    return acc.update(log_weight)


def _moment_stats(count: int, log_sum_w: float, log_sum_w2: float):
    """(log m1, log population variance, ess) from log-domain sums."""
    log_l = math.log(count)
    log_m1 = log_sum_w - log_l
    log_m2 = log_sum_w2 - log_l
    if log_m1 == LOG_ZERO:
        return LOG_ZERO, LOG_ZERO, 0.0
    # Jensen guarantees m2 >= m1^2; clamp the fp residue.
    d = min(2.0 * log_m1 - log_m2, 0.0)
    ess = count * math.exp(d)
    if d > -1e-15:
        return log_m1, LOG_ZERO, ess
    log_var = log_m2 + math.log1p(-math.exp(d))
    return log_m1, log_var, ess


def _safe_exp(x: float) -> float:
    # Raw weights on large lattices are huge in linear domain; saturate
    # instead of raising so diagnostics stay usable (ratios remain finite).
    if x > 709.0:
        return float("inf")
    return math.exp(x)


def variance_diagnostics(acc: EstimateAccumulator) -> tuple[float, float]:
    """Standard error of the mean-weight estimate and effective sample size.

    SE is ``sqrt((m2 - m1^2) / L)`` over the streamed weights and ESS is
    ``L * m1^2 / m2``.  With an all-zero weight stream the SE is undefined
    and reported as NaN with ESS 0.  On large lattices the linear-domain SE
    can exceed the double range and saturates to ``inf``; the log-domain
    error of the estimate itself (``final_se_log``) is always finite.
    """
    if acc.count < 2:
        raise ValueError("variance diagnostics need at least two samples")
    log_m1, log_var, ess = _moment_stats(acc.count, acc.log_sum_w, acc.log_sum_w2)
    if log_m1 == LOG_ZERO:
        return float("nan"), 0.0
    se = _safe_exp(0.5 * (log_var - math.log(acc.count))) if log_var != LOG_ZERO else 0.0
    return se, ess


def _se_log_partition(count: int, log_sum_w: float, log_sum_w2: float) -> float:
    """Delta-method standard error of the log-partition estimate."""
    log_m1, log_var, _ = _moment_stats(count, log_sum_w, log_sum_w2)
    if log_m1 == LOG_ZERO:
        return float("nan")
    if log_var == LOG_ZERO:
        return 0.0
    return _safe_exp(0.5 * (log_var - math.log(count)) - log_m1)


@dataclass(frozen=True)
class EstimateSeries:
    """Checkpointed trajectory of a sampling run plus its final state.

    ``counts`` are the sample indices at which snapshots were taken (the
    last one is the full sample count); the log-domain snapshot sums allow
    merging series from parallel chains before deriving plot columns.
    """

    n_sites: int
    counts: np.ndarray
    snap_log_sum_w: np.ndarray
    snap_log_sum_w2: np.ndarray
    accumulator: EstimateAccumulator = field(repr=False)

    @property
    def final_log_Z(self) -> float:
        return self.accumulator.log_partition

    @property
    def final_per_site(self) -> float:
        return self.final_log_Z / self.n_sites

    @property
    def final_se_log(self) -> float:
        acc = self.accumulator
        return _se_log_partition(acc.count, acc.log_sum_w, acc.log_sum_w2)

    @property
    def final_se_per_site(self) -> float:
        return self.final_se_log / self.n_sites

    def diagnostics(self) -> tuple[float, float]:
        return variance_diagnostics(self.accumulator)

    def per_site_log_Z(self) -> np.ndarray:
        """Running per-site log Z at every checkpoint."""
        acc = self.accumulator
        offsets = acc.log_proposal_norm - acc.log_duality_const
        with np.errstate(invalid="ignore"):
            values = self.snap_log_sum_w - np.log(self.counts) + offsets
        return values / self.n_sites

    def per_site_se(self) -> np.ndarray:
        """Running per-site standard error (delta method) at checkpoints."""
        out = np.empty(len(self.counts))
        for i, (cnt, ls, ls2) in enumerate(
            zip(self.counts, self.snap_log_sum_w, self.snap_log_sum_w2)
        ):
            out[i] = _se_log_partition(int(cnt), float(ls), float(ls2)) / self.n_sites
        return out

    @staticmethod
    def merge(series: list["EstimateSeries"]) -> "EstimateSeries":
        """Merge per-chain series taken on a common checkpoint grid."""
        base = series[0]
        if any(len(s.counts) != len(base.counts) for s in series[1:]):
            raise ValueError("cannot merge series with different checkpoint grids")
        counts = np.sum([s.counts for s in series], axis=0)
        ls = np.array([s.snap_log_sum_w for s in series])
        ls2 = np.array([s.snap_log_sum_w2 for s in series])
        acc = base.accumulator
        for s in series[1:]:
            acc = acc.merge(s.accumulator)
        return EstimateSeries(
            n_sites=base.n_sites,
            counts=counts,
            snap_log_sum_w=logsumexp(ls, axis=0),
            snap_log_sum_w2=logsumexp(ls2, axis=0),
            accumulator=acc,
        )


def checkpoint_grid(num_samples: int, checkpoint_stride: int | None = None) -> np.ndarray:
    """Sample indices at which the running estimate is recorded.

    ``None`` gives 100 log-spaced checkpoints (deduplicated); an integer
    gives every ``stride``-th sample.  The final index is always included.
    """
    num_samples = int(num_samples)
    if checkpoint_stride is None:
        pts = np.round(np.logspace(0.0, math.log10(num_samples), 100)).astype(np.int64)
    else:
        if checkpoint_stride < 1:
            raise ValueError("checkpoint stride must be positive")
        pts = np.arange(checkpoint_stride, num_samples + 1, checkpoint_stride, dtype=np.int64)
    pts = np.unique(np.clip(pts, 1, num_samples))
    if len(pts) == 0 or pts[-1] != num_samples:
        pts = np.append(pts, num_samples)
    return pts


def _accumulate_series(chunks, acc: EstimateAccumulator, grid: np.ndarray, n_sites: int) -> EstimateSeries:
    snap_ls = np.empty(len(grid))
    snap_ls2 = np.empty(len(grid))
    next_snap = 0
    done = 0
    for log_w, _ in chunks:
        m = len(log_w)
        if next_snap < len(grid) and grid[next_snap] <= done + m:
            prefix = np.logaddexp.accumulate(log_w)
            prefix2 = np.logaddexp.accumulate(2.0 * log_w)
            while next_snap < len(grid) and grid[next_snap] <= done + m:
                local = int(grid[next_snap] - done - 1)
                snap_ls[next_snap] = np.logaddexp(acc.log_sum_w, prefix[local])
                snap_ls2[next_snap] = np.logaddexp(acc.log_sum_w2, prefix2[local])
                next_snap += 1
            acc.count += m
            acc.log_sum_w = float(np.logaddexp(acc.log_sum_w, prefix[-1]))
            acc.log_sum_w2 = float(np.logaddexp(acc.log_sum_w2, prefix2[-1]))
        else:
            acc.update_chunk(log_w)
        done += m
    return EstimateSeries(
        n_sites=n_sites,
        counts=grid.copy(),
        snap_log_sum_w=snap_ls,
        snap_log_sum_w2=snap_ls2,
        accumulator=acc,
    )


def run_is(
    model: ModelSpec,
    num_samples: int,
    rng: np.random.Generator,
    checkpoint_stride: int | None = None,
    factors: DualFactors | None = None,
    checkpoint_grid_override: np.ndarray | None = None,
    chunk_size: int = DEFAULT_CHUNK,
) -> EstimateSeries:
    """Estimate log Z by independent importance-sampling draws.

    Draws ``num_samples`` bond assignments from the per-bond proposal,
    derives the site values, and averages the site-table weights in log
    space.  Returns the checkpointed series; the final estimate is
    ``series.final_log_Z`` with delta-method error ``series.final_se_log``.
    """
    if num_samples < 1:
        raise ValueError("need at least one sample")
    factors = factors if factors is not None else dual_factors(model)
    acc = EstimateAccumulator.for_factors(factors)
    grid = (
        checkpoint_grid_override
        if checkpoint_grid_override is not None
        else checkpoint_grid(num_samples, checkpoint_stride)
    )
    chunks = importance_weight_chunks(factors, num_samples, rng, chunk_size)
    return _accumulate_series(chunks, acc, grid, model.topo.n_sites)


def run_uniform(
    model: ModelSpec,
    num_samples: int,
    rng: np.random.Generator,
    checkpoint_stride: int | None = None,
    factors: DualFactors | None = None,
    checkpoint_grid_override: np.ndarray | None = None,
    chunk_size: int = DEFAULT_CHUNK,
) -> EstimateSeries:
    """Estimate log Z by uniform sampling of the bond assignments.

    Converges comparably to importance sampling only at very strong
    couplings; kept as a baseline and cross-check.  Same series contract
    as :func:`run_is`.
    """
    if num_samples < 1:
        raise ValueError("need at least one sample")
    factors = factors if factors is not None else dual_factors(model)
    acc = EstimateAccumulator.for_factors(factors)
    grid = (
        checkpoint_grid_override
        if checkpoint_grid_override is not None
        else checkpoint_grid(num_samples, checkpoint_stride)
    )
    chunks = uniform_weight_chunks(factors, num_samples, rng, chunk_size)
    return _accumulate_series(chunks, acc, grid, model.topo.n_sites)


def free_energy_per_site(log_Z: float, n_sites: int) -> float:
    """Per-site log partition value, log Z / N.

    This is the quantity plotted by the experiment runner; it equals the
    negated Helmholtz free energy per site at unit inverse temperature.
    """
    if n_sites < 1:
        raise ValueError("need at least one site")
    return log_Z / n_sites
