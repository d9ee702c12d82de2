"""Sampling procedures on the dual factor graph.

Four schemes:

* independent per-bond draws from the product proposal distribution
  (probability of 0 at bond k is gamma_k(0) / sum of gamma_k, the rest of
  the mass split evenly over the nonzero values);
* uniform per-bond draws;
* single-bond Gibbs sweeps targeting the dual distribution (Ising only);
* annealed importance sampling over an exponent ladder applied to the
  field magnitudes: the last level is estimated by independent draws and
  each adjacent ratio by a Gibbs chain at the broader of the two levels
  (Ising only).

Every sampler takes an explicit ``numpy.random.Generator`` and owns its
state, so independently seeded chains can run concurrently.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .dual import DualFactors, dual_factors, dual_site_values
from .models import ISING, ModelSpec

DEFAULT_CHUNK = 8192


def draw_is_sample(factors: DualFactors, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw bond assignments from the product proposal distribution.

    One uniform variate is consumed per bond: bond k takes value 0 when the
    variate falls below gamma_k(0) / sum gamma_k (the threshold equals
    (1 + e^(-2 J_k)) / 2 for Ising and (1 + (q-1) e^(-J_k)) / q for Potts),
    and otherwise the remainder of the variate selects uniformly among the
    q - 1 nonzero values.

    Returns shape (n_bonds,) for ``size=None``, else (size, n_bonds).
    """
    n_bonds = factors.topo.n_bonds
    shape = (n_bonds,) if size is None else (int(size), n_bonds)
    u = rng.random(shape)
    p0 = factors.prob_zero
    if factors.q == 2:
        return (u >= p0).astype(np.uint8)
    tail = 1.0 - p0
    safe_tail = np.where(tail > 0, tail, 1.0)
    nonzero = 1 + np.minimum(
        ((u - p0) * (factors.q - 1) / safe_tail).astype(np.int64), factors.q - 2
    )
    return np.where(u < p0, 0, nonzero).astype(np.uint8)


def draw_uniform_sample(q: int, n_bonds: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw bond assignments uniformly: each value is floor(q * u) < q."""
    shape = (n_bonds,) if size is None else (int(size), n_bonds)
    u = rng.random(shape)
    return np.minimum((q * u).astype(np.int64), q - 1).astype(np.uint8)


def _site_log_weight_raw(factors: DualFactors, x_b: np.ndarray) -> np.ndarray:
    """Row-wise log product of raw site tables for a (m, n_sites) batch."""
    if factors.q == 2:
        # Column 0 of the scaled table is identically 0, so the scaled sum
        # is a dot product with the value-1 column.
        scaled = x_b.astype(np.float64) @ factors.log_lambda_scaled[:, 1]
    else:
        scaled = factors.log_lambda_scaled[np.arange(factors.topo.n_sites), x_b].sum(axis=-1)
    return scaled + factors.log_scale_sites


def _bond_log_weight_raw(factors: DualFactors, x_a: np.ndarray) -> np.ndarray:
    if factors.q == 2:
        scaled = x_a.astype(np.float64) @ factors.log_gamma_scaled[:, 1]
    else:
        scaled = factors.log_gamma_scaled[np.arange(factors.topo.n_bonds), x_a].sum(axis=-1)
    return scaled + factors.log_scale_bonds


def importance_weight_chunks(
    factors: DualFactors,
    num_samples: int,
    rng: np.random.Generator,
    chunk_size: int = DEFAULT_CHUNK,
):
    """Stream importance-sampling weights in chunks.

    Yields ``(log_weights, bond_values)`` pairs where ``log_weights[i]`` is
    the log of the raw site-table product for draw ``i`` (its mean over the
    proposal estimates Z_dual divided by the proposal normalizer).  The
    generator consumes exactly one uniform variate per bond per sample,
    independent of the chunk size.
    """
    remaining = int(num_samples)
    while remaining > 0:
        m = min(chunk_size, remaining)
        x_a = draw_is_sample(factors, rng, size=m)
        x_b = dual_site_values(factors.topo, x_a, factors.q)
        yield _site_log_weight_raw(factors, x_b), x_a
        remaining -= m


def uniform_weight_chunks(
    factors: DualFactors,
    num_samples: int,
    rng: np.random.Generator,
    chunk_size: int = DEFAULT_CHUNK,
):
    """Stream uniform-sampling weights in chunks.

    The weight of a draw is ``Gamma * Lambda * q^n_bonds`` (log domain), so
    its mean over uniform draws estimates Z_dual directly.  To keep one
    estimator contract for both schemes, the proposal-normalizer offset is
    folded in here: the yielded values are the log weights minus the log
    proposal normalizer, making their mean an estimate of the same ratio
    targeted by importance sampling.
    """
    shift = factors.topo.n_bonds * math.log(factors.q) - factors.log_proposal_norm
    remaining = int(num_samples)
    while remaining > 0:
        m = min(chunk_size, remaining)
        x_a = draw_uniform_sample(factors.q, factors.topo.n_bonds, rng, size=m)
        x_b = dual_site_values(factors.topo, x_a, factors.q)
        log_w = _bond_log_weight_raw(factors, x_a) + _site_log_weight_raw(factors, x_b)
        yield log_w + shift, x_a
        remaining -= m


@dataclass
class GibbsState:
    """Mutable state of the dual-domain Gibbs chain.

    ``x_b`` and the cached per-site log factors are maintained
    incrementally: flipping bond k toggles exactly the two endpoint sites.
    """

    x_a: np.ndarray
    x_b: np.ndarray
    log_site: np.ndarray

    @classmethod
    def from_bond_values(cls, factors: DualFactors, bond_values) -> "GibbsState":
        x_a = np.array(bond_values, dtype=np.uint8).copy()
        x_b = dual_site_values(factors.topo, x_a, factors.q).copy()
        log_site = factors.log_lambda[np.arange(factors.topo.n_sites), x_b].copy()
        return cls(x_a=x_a, x_b=x_b, log_site=log_site)

    def is_consistent(self, factors: DualFactors) -> bool:
        x_b = dual_site_values(factors.topo, self.x_a, factors.q)
        if not np.array_equal(x_b, self.x_b):
            return False
        log_site = factors.log_lambda[np.arange(factors.topo.n_sites), x_b]
        return bool(np.array_equal(log_site, self.log_site))


def flip_bond(state: GibbsState, factors: DualFactors, bond: int) -> None:
    """Toggle one Ising bond variable, updating the derived state in place.

    Applying the same flip twice restores the state exactly.
    """
    tail, head = factors.topo.bonds[bond]
    state.x_a[bond] ^= 1
    for site in (int(tail), int(head)):
        state.x_b[site] ^= 1
        state.log_site[site] = factors.log_lambda[site, state.x_b[site]]


def gibbs_sweep(
    state: GibbsState,
    factors: DualFactors,
    rng: np.random.Generator,
    check: bool = False,
) -> GibbsState:
    """One systematic sweep: resample every bond from its conditional.

    Bonds are visited in index order.  Bond k is redrawn from the exact
    conditional under the dual distribution given all other bonds, which
    involves only gamma_k and the site tables at its two endpoints.  Ising
    models only.

    With ``check=True`` the incremental state is validated against a fresh
    recomputation before and after the sweep.
    """
    gibbs_sweeps(state, factors, 1, rng, check=check)
    return state


def gibbs_sweeps(
    state: GibbsState,
    factors: DualFactors,
    num_sweeps: int,
    rng: np.random.Generator,
    check: bool = False,
    on_sweep=None,
) -> GibbsState:
    """Run ``num_sweeps`` systematic sweeps; see :func:`gibbs_sweep`.

    ``on_sweep(state)`` is invoked after each completed sweep (used to
    collect samples or annealing weight increments).
    """
    if factors.family != ISING:
        raise ValueError("dual-domain Gibbs sweeps are implemented for Ising models only")
    if check and not state.is_consistent(factors):
        raise AssertionError("inconsistent Gibbs state: x_b does not match x_a")

    bonds = [(k, int(t), int(h)) for k, (t, h) in enumerate(np.asarray(factors.topo.bonds))]
    lg = factors.log_gamma.tolist()
    ll = factors.log_lambda.tolist()
    x_a = state.x_a.tolist()
    x_b = state.x_b.tolist()
    log_site = state.log_site.tolist()
    neg_inf = float("-inf")

    for _ in range(num_sweeps):
        for k, m, n in bonds:
            a = x_a[k]
            bm, bn = x_b[m], x_b[n]
            cur = lg[k][a] + log_site[m] + log_site[n]
            alt = lg[k][1 - a] + ll[m][1 - bm] + ll[n][1 - bn]
            if alt == neg_inf:
                continue
            if cur == neg_inf:
                p_alt = 1.0
            else:
                d = alt - cur
                if d >= 0.0:
                    p_alt = 1.0 / (1.0 + math.exp(-d))
                else:
                    e = math.exp(d)
                    p_alt = e / (1.0 + e)
            if rng.random() < p_alt:
                x_a[k] = 1 - a
                x_b[m] = 1 - bm
                x_b[n] = 1 - bn
                log_site[m] = ll[m][1 - bm]
                log_site[n] = ll[n][1 - bn]
        if on_sweep is not None:
            state.x_a[:] = x_a
            state.x_b[:] = x_b
            state.log_site[:] = log_site
            on_sweep(state)

    state.x_a[:] = x_a
    state.x_b[:] = x_b
    state.log_site[:] = log_site
    if check and not state.is_consistent(factors):
        raise AssertionError("inconsistent Gibbs state after sweep")
    return state


@dataclass(frozen=True)
class AnnealSchedule:
    """Exponent ladder for annealed importance sampling.

    ``exponents`` must start at 1 and increase strictly; per-site field
    magnitudes are raised element-wise to each exponent (signs preserved).
    ``sweeps_per_level`` Gibbs sweeps estimate each adjacent-level ratio;
    ``samples_at_top`` independent draws estimate the last level.
    """

    exponents: tuple[float, ...]
    sweeps_per_level: int
    samples_at_top: int

    def __post_init__(self):
        exps = tuple(float(a) for a in self.exponents)
        if not exps or exps[0] != 1.0:
            raise ValueError("exponent schedule must start at 1")
        if any(b <= a for a, b in zip(exps, exps[1:])):
            raise ValueError("exponent schedule must be strictly increasing")
        if self.sweeps_per_level < 1 or self.samples_at_top < 1:
            raise ValueError("sweeps_per_level and samples_at_top must be positive")
        object.__setattr__(self, "exponents", exps)

    @property
    def num_levels(self) -> int:
        return len(self.exponents) - 1


@dataclass(frozen=True)
class AISLevel:
    """One adjacent-level ratio estimate.

    ``log_ratio`` is the estimated log of Z_dual(alpha_low-level) over
    Z_dual(alpha_high-level); ``sampled_high`` records whether the Gibbs
    chain ran at the high-exponent member of the pair.
    """

    alpha_low: float
    alpha_high: float
    log_ratio: float
    se_log: float
    sampled_high: bool


@dataclass(frozen=True)
class AISResult:
    """Annealed importance sampling estimate of the log partition function.

    ``se_log`` combines the top-level moment error with per-level
    batch-means errors in quadrature; cross-level dependence through the
    shared chain is ignored, so it is approximate.
    """

    log_Z_dual: float
    log_Z: float
    n_sites: int
    se_log: float
    top_se_log: float
    top_ess: float
    levels: tuple[AISLevel, ...]

    @property
    def per_site(self) -> float:
        return self.log_Z / self.n_sites


def _log_mean_and_se(log_values: np.ndarray) -> tuple[float, float, float]:
    """(log mean, se of log mean, effective sample size) for i.i.d. values."""
    n = len(log_values)
    shift = float(np.max(log_values))
    if shift == float("-inf"):
        return float("-inf"), float("nan"), 0.0
    w = np.exp(log_values - shift)
    m1 = float(w.mean())
    m2 = float((w * w).mean())
    var = max(m2 - m1 * m1, 0.0)
    se_log = math.sqrt(var / n) / m1 if m1 > 0 else float("nan")
    ess = n * m1 * m1 / m2 if m2 > 0 else 0.0
    return shift + math.log(m1), se_log, ess


def _log_mean_and_se_batched(log_values: np.ndarray, target_batches: int = 10) -> tuple[float, float]:
    """(log mean, se of log mean) for a correlated stream via batch means."""
    n = len(log_values)
    if n < 4:
        log_mean, se_log, _ = _log_mean_and_se(log_values)
        return log_mean, se_log
    num_batches = max(2, min(target_batches, n // 2))
    usable = (n // num_batches) * num_batches
    shift = float(np.max(log_values))
    w = np.exp(log_values - shift)
    mean = float(w.mean())
    batch_means = w[:usable].reshape(num_batches, -1).mean(axis=1)
    se = float(batch_means.std(ddof=1)) / math.sqrt(num_batches)
    se_log = se / mean if mean > 0 else float("nan")
    return shift + math.log(mean), se_log


def _level_model(model: ModelSpec, alpha: float) -> ModelSpec:
    field = -np.abs(model.H) ** alpha
    return ModelSpec(family=model.family, q=model.q, topo=model.topo, J=model.J, H=field)


def ais_run(
    model: ModelSpec,
    schedule: AnnealSchedule,
    rng: np.random.Generator,
    chunk_size: int = DEFAULT_CHUNK,
) -> AISResult:
    """Annealed importance sampling estimate of the dual partition function.

    The target is expressed through a telescoping product over the exponent
    ladder: the top level (largest exponent) is estimated by plain
    importance sampling with ``samples_at_top`` draws, and every
    adjacent-level ratio by averaging per-sweep site-table ratios along a
    Gibbs chain at the higher level.  Each chain starts from the previous
    level's final sample (the first from the last top-level draw).

    Requires an Ising model with no exactly-zero field.  A field magnitude
    of exactly 1 is left unchanged by every exponent, which defeats the
    ladder; this triggers a warning.
    """
    if model.family != ISING:
        raise ValueError("annealed importance sampling is implemented for Ising models only")
    if np.any(model.H == 0):
        raise ValueError("annealed importance sampling requires nonzero fields")
    if np.any(np.abs(model.H) == 1.0):
        warnings.warn(
            "field magnitudes equal to 1 are fixed points of the exponent ladder",
            stacklevel=2,
        )

    exps = schedule.exponents
    top_factors = dual_factors(_level_model(model, exps[-1]))

    top_logs = np.empty(schedule.samples_at_top)
    filled = 0
    last_draw = None
    for lw, x_a in importance_weight_chunks(top_factors, schedule.samples_at_top, rng, chunk_size):
        top_logs[filled : filled + len(lw)] = lw
        filled += len(lw)
        last_draw = x_a[-1]
    top_log_mean, top_se, top_ess = _log_mean_and_se(top_logs)
    log_zd = top_factors.log_proposal_norm + top_log_mean

    level_tables = [dual_factors(_level_model(model, a)) for a in exps]
    # Broadness of a level: sum of log tanh of its field magnitudes.  The
    # broader (stronger-field) member of each adjacent pair hosts the
    # chain; the ratio weight then stays bounded, because the narrower
    # level's site tables only shrink relative to the sampled ones.
    broadness = [float(f.log_lambda_scaled[:, 1].sum()) for f in level_tables]
    state = GibbsState.from_bond_values(top_factors, last_draw)
    levels = []
    var_log = top_se**2
    site_index = np.arange(model.topo.n_sites)
    for v in range(schedule.num_levels - 1, -1, -1):
        sample_high = broadness[v + 1] >= broadness[v]
        host = level_tables[v + 1] if sample_high else level_tables[v]
        other = level_tables[v] if sample_high else level_tables[v + 1]
        delta_table = other.log_lambda - host.log_lambda
        increments = np.empty(schedule.sweeps_per_level)
        cursor = 0

        def record(st, _delta=delta_table, _inc=increments):
            nonlocal cursor
            _inc[cursor] = _delta[site_index, st.x_b].sum()
            cursor += 1

        gibbs_sweeps(state, host, schedule.sweeps_per_level, rng, on_sweep=record)
        log_mean, se_log = _log_mean_and_se_batched(increments)
        # Sampling at the high level estimates Z_low/Z_high directly;
        # sampling at the low level estimates its reciprocal.
        log_ratio = log_mean if sample_high else -log_mean
        levels.append(AISLevel(exps[v], exps[v + 1], log_ratio, se_log, sample_high))
        log_zd += log_ratio
        var_log += se_log**2

    return AISResult(
        log_Z_dual=log_zd,
        log_Z=log_zd - top_factors.log_duality_const,
        n_sites=model.topo.n_sites,
        se_log=math.sqrt(var_log),
        top_se_log=top_se,
        top_ess=top_ess,
        levels=tuple(levels),
    )
