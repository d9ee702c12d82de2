"""Streaming accumulator, estimator runs, diagnostics."""

import math

import numpy as np
import pytest

from dualis import (
    EstimateAccumulator,
    build_lattice,
    exact_log_Z,
    exact_log_Zd,
    free_energy_per_site,
    log_proposal_normalizer,
    run_is,
    run_uniform,
    sample_params,
    stream_update,
    variance_diagnostics,
)
from dualis.estimator import EstimateSeries, checkpoint_grid
from dualis.rng import stream

from conftest import make_ising


def fresh_acc(norm=0.0, const=0.0):
    return EstimateAccumulator(log_proposal_norm=norm, log_duality_const=const)


def test_stream_update_equal_weights():
    acc = fresh_acc()
    stream_update(acc, -3.0)
    stream_update(acc, -3.0)
    assert acc.log_sum_w == pytest.approx(-3.0 + math.log(2.0), rel=1e-14)
    assert acc.count == 2


def test_stream_update_log_zero_sentinel():
    acc = fresh_acc()
    stream_update(acc, -1.0)
    stream_update(acc, float("-inf"))
    assert acc.count == 2
    assert acc.log_sum_w == pytest.approx(-1.0, rel=1e-14)
    # Mean halves: the zero-weight sample still counts toward L.
    assert acc.log_mean_weight == pytest.approx(-1.0 - math.log(2.0), rel=1e-14)


def test_stream_update_underflow_territory():
    # 1e6 weights of exp(-745) each: linear doubles would flush to zero.
    acc = fresh_acc()
    for _ in range(10):
        acc.update_chunk(np.full(100_000, -745.0))
    assert acc.count == 1_000_000
    assert acc.log_mean_weight == pytest.approx(-745.0, rel=1e-13)


def test_update_rejects_nan_and_plus_inf():
    acc = fresh_acc()
    with pytest.raises(ValueError):
        acc.update(float("nan"))
    with pytest.raises(ValueError):
        acc.update(float("inf"))


def test_accumulator_estimate_formula():
    acc = fresh_acc(norm=5.0, const=3.0)
    acc.update_chunk(np.array([-1.0, -2.0, -0.5]))
    expect = math.log(sum(math.exp(v) for v in (-1.0, -2.0, -0.5)) / 3) + 5.0 - 3.0
    assert acc.log_partition == pytest.approx(expect, rel=1e-13)


def test_merge_matches_sequential_for_any_partition(rng):
    weights = rng.normal(-2.0, 3.0, size=997)
    sequential = fresh_acc().update_chunk(weights)
    for split in (1, 130, 500, 996):
        left = fresh_acc().update_chunk(weights[:split])
        right = fresh_acc().update_chunk(weights[split:])
        merged = left.merge(right)
        assert merged.count == sequential.count
        assert merged.log_sum_w == pytest.approx(sequential.log_sum_w, rel=1e-12)
        assert merged.log_sum_w2 == pytest.approx(sequential.log_sum_w2, rel=1e-12)


def test_merge_is_commutative_and_associative(rng):
    parts = [fresh_acc().update_chunk(rng.normal(0, 1, size=50)) for _ in range(3)]
    a = parts[0].merge(parts[1]).merge(parts[2])
    b = parts[2].merge(parts[0].merge(parts[1]))
    c = parts[1].merge(parts[2]).merge(parts[0])
    for other in (b, c):
        assert a.count == other.count
        assert a.log_sum_w == pytest.approx(other.log_sum_w, rel=1e-12)
        assert a.log_sum_w2 == pytest.approx(other.log_sum_w2, rel=1e-12)


def test_merge_rejects_mismatched_offsets():
    with pytest.raises(ValueError):
        fresh_acc(norm=1.0).merge(fresh_acc(norm=2.0))


def test_variance_diagnostics_equal_weights():
    acc = fresh_acc()
    acc.update_chunk(np.full(50, -2.0))
    se, ess = variance_diagnostics(acc)
    assert se == 0.0
    assert ess == pytest.approx(50.0, rel=1e-12)


def test_variance_diagnostics_single_heavy_weight():
    acc = fresh_acc()
    acc.update(0.0)
    for _ in range(99):
        acc.update(float("-inf"))
    se, ess = variance_diagnostics(acc)
    assert ess == pytest.approx(1.0, rel=1e-12)
    assert se == pytest.approx(math.sqrt((1 / 100 - 1 / 100**2) / 100), rel=1e-10)


def test_variance_diagnostics_all_zero_weights():
    acc = fresh_acc()
    acc.update_chunk(np.full(10, float("-inf")))
    se, ess = variance_diagnostics(acc)
    assert math.isnan(se)
    assert ess == 0.0
    with pytest.raises(ValueError):
        variance_diagnostics(fresh_acc().update(0.0))


def test_run_is_two_site_chain_within_three_se():
    model = make_ising([1, 2], [False, False], J=0.5, H=-1.0)
    exact = exact_log_Z(model)  # 2.611442779196733 by direct 4-term sum
    assert exact == pytest.approx(2.611442779196733, rel=1e-13)
    series = run_is(model, 100_000, stream(6, "est", 0))
    assert series.final_log_Z == pytest.approx(exact, abs=3 * series.final_se_log)


def test_run_is_three_by_three_within_three_se():
    topo = build_lattice([3, 3], [True, True])
    model = sample_params(topo, "ising", 2, (1.3, 1.5), (-1.25, -1.0), stream(6, "est", 1))
    exact = exact_log_Z(model)
    series = run_is(model, 100_000, stream(6, "est", 2))
    assert series.final_log_Z == pytest.approx(exact, abs=3 * series.final_se_log)


def test_run_is_unbiased_over_repeats():
    # Mean of the linear-domain ratio estimates over 200 short runs lies
    # within 4 standard errors of the exact value.
    model = make_ising([2, 2], [True, True], J=0.5, H=-1.0)
    exact_ratio = exact_log_Zd(model) - log_proposal_normalizer(model)
    runs = 200
    rhats = np.empty(runs)
    for t in range(runs):
        series = run_is(model, 1000, stream(6, "unbiased", t))
        rhats[t] = math.exp(series.accumulator.log_mean_weight - exact_ratio)
    se = rhats.std(ddof=1) / math.sqrt(runs)
    assert abs(rhats.mean() - 1.0) < 4 * se


def test_run_uniform_two_site_chain():
    model = make_ising([1, 2], [False, False], J=0.5, H=-1.0)
    exact = exact_log_Z(model)
    series = run_uniform(model, 200_000, stream(6, "est", 3))
    assert series.final_log_Z == pytest.approx(exact, abs=3 * series.final_se_log)


def test_run_uniform_matches_is_at_strong_coupling():
    # Large constant coupling: the two schemes converge comparably and
    # must agree within joint error bars.
    topo = build_lattice([4, 4], [True, True])
    model = sample_params(topo, "ising", 2, 5.0, (-1.2, -0.8), stream(6, "est", 4))
    a = run_is(model, 50_000, stream(6, "est", 5))
    b = run_uniform(model, 50_000, stream(6, "est", 6))
    joint = math.hypot(a.final_se_log, b.final_se_log)
    assert abs(a.final_log_Z - b.final_log_Z) < 4 * joint


def test_run_is_single_sample_defined():
    model = make_ising([1, 2], [False, False], J=0.5, H=-1.0)
    series = run_is(model, 1, stream(6, "est", 7))
    assert series.counts.tolist() == [1]
    assert math.isfinite(series.final_log_Z)


def test_checkpoint_grid_shapes():
    grid = checkpoint_grid(10**6)
    assert grid[-1] == 10**6
    assert len(grid) <= 100
    assert np.all(np.diff(grid) > 0)
    grid = checkpoint_grid(10, checkpoint_stride=3)
    assert grid.tolist() == [3, 6, 9, 10]
    assert checkpoint_grid(1).tolist() == [1]


def test_series_checkpoints_consistent_with_final():
    model = make_ising([2, 2], [True, True], J=0.7, H=-0.9)
    series = run_is(model, 5000, stream(6, "est", 8), checkpoint_stride=500)
    assert series.counts[-1] == 5000
    values = series.per_site_log_Z()
    assert values[-1] == pytest.approx(series.final_per_site, rel=1e-12)
    ses = series.per_site_se()
    assert ses[-1] == pytest.approx(series.final_se_per_site, rel=1e-10)


def test_series_merge_equals_single_run_moments():
    model = make_ising([2, 2], [True, True], J=0.7, H=-0.9)
    grid = checkpoint_grid(2000)
    parts = [
        run_is(model, 2000, stream(6, "merge", c), checkpoint_grid_override=grid)
        for c in range(3)
    ]
    merged = EstimateSeries.merge(parts)
    assert merged.accumulator.count == 6000
    direct = parts[0].accumulator.merge(parts[1].accumulator).merge(parts[2].accumulator)
    assert merged.final_log_Z == pytest.approx(direct.log_partition, rel=1e-13)
    assert merged.counts[-1] == 6000


def test_free_energy_per_site():
    assert free_energy_per_site(2.611442779196733, 2) == pytest.approx(1.3057213895983665)
    assert free_energy_per_site(0.0, 7) == 0.0
    with pytest.raises(ValueError):
        free_energy_per_site(1.0, 0)


def test_reported_se_tracks_empirical_spread():
    # On a well-behaved small model the delta-method error bar matches the
    # empirical scatter of independent runs within a factor of two.
    model = make_ising([2, 2], [True, True], J=0.5, H=-1.5)
    finals, ses = [], []
    for t in range(40):
        s = run_is(model, 4000, stream(6, "se", t))
        finals.append(s.final_log_Z)
        ses.append(s.final_se_log)
    ratio = np.std(finals, ddof=1) / np.mean(ses)
    assert 0.5 < ratio < 2.0
