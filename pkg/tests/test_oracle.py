"""Exact enumeration: partition functions, dual distribution, divergence."""

import itertools
import math

import numpy as np
import pytest

from dualis import (
    build_lattice,
    chi_squared_divergence,
    exact_dual_distribution,
    exact_log_Z,
    exact_log_Zd,
    exact_summary,
    sample_params,
)
from dualis.oracle import SizeGuardError, dump_dual_distribution, iter_configs
from dualis.rng import stream

from conftest import make_ising, make_potts


@pytest.mark.filterwarnings("ignore:some fields are exactly zero")
def test_exact_log_Z_two_site_chain():
    m = make_ising([1, 2], [False, False], J=0.5, H=0.0)
    assert exact_log_Z(m) == pytest.approx(1.506408868078168, rel=1e-13)


def test_exact_log_Z_factorizes_at_zero_coupling():
    # J -> 0: Z approaches the product of per-site field sums.
    h = np.array([-1.2, -0.4, -0.9, -1.6, -0.3, -0.7])
    m = make_ising([2, 3], [False, False], J=1e-13, H=h)
    expected = np.log(np.exp(h) + np.exp(-h)).sum()
    assert exact_log_Z(m) == pytest.approx(expected, abs=1e-10)


def test_exact_log_Z_matches_independent_enumeration_order():
    # Recompute Z with itertools.product, which enumerates spins in the
    # opposite significance order from the library's mixed-radix counter.
    gen = stream(21, "oracle", 0)
    j = gen.uniform(0.3, 1.5, 7)
    h = gen.uniform(0.2, 1.8, 6)
    model = make_potts([2, 3], [False, False], q=3, J=j, H=h)
    from dualis import boltzmann_log_weight

    logs = [
        boltzmann_log_weight(model, np.array(x))
        for x in itertools.product(range(3), repeat=model.topo.n_sites)
    ]
    shift = max(logs)
    brute = shift + math.log(sum(math.exp(v - shift) for v in logs))
    assert exact_log_Z(model) == pytest.approx(brute, rel=1e-12)


def test_exact_log_Zd_two_site_chain_frozen():
    m = make_ising([1, 2], [False, False], J=0.5, H=-1.0)
    assert exact_log_Zd(m) == pytest.approx(3.9977371403166235, rel=1e-13)
    assert exact_log_Zd(m) - exact_log_Z(m) == pytest.approx(math.log(4.0), abs=1e-12)


def test_exact_dual_distribution_two_site_chain_frozen():
    m = make_ising([1, 2], [False, False], J=0.5, H=-1.0)
    p = exact_dual_distribution(m)
    assert p == pytest.approx([0.788618774728166, 0.21138122527183406], rel=1e-12)
    assert p.sum() == pytest.approx(1.0, abs=1e-12)


def test_dual_distribution_concentrates_at_zero_coupling():
    m = make_ising([2, 2], [True, False], J=1e-12, H=-1.0)
    p = exact_dual_distribution(m)
    assert p[0] == pytest.approx(1.0, abs=1e-10)


def test_dual_distribution_normalized_on_random_models():
    for i, (family, q) in enumerate([("ising", 2), ("potts", 3)]):
        gen = stream(31, "dist", i)
        h_range = (-1.5, -0.5) if family == "ising" else (0.5, 1.5)
        topo = build_lattice([2, 2], [True, False])
        model = sample_params(topo, family, q, (0.2, 1.8), h_range, gen)
        p = exact_dual_distribution(model)
        assert len(p) == q**topo.n_bonds
        assert p.sum() == pytest.approx(1.0, abs=1e-12)


def test_chi_squared_two_site_chain_frozen():
    m = make_ising([1, 2], [False, False], J=0.5, H=-1.0)
    assert chi_squared_divergence(m) == pytest.approx(0.05069111374024282, rel=1e-10)


def test_chi_squared_nonnegative_and_zero_iff_equal():
    m = make_ising([2, 2], [True, True], J=0.5, H=-1.0)
    assert chi_squared_divergence(m) >= 0.0
    # Identity check on a synthetic table equal to the proposal itself.
    p = np.array([0.3, 0.2, 0.4, 0.1])
    assert np.sum(p * p / p) - 1.0 == pytest.approx(0.0, abs=1e-15)


def test_chi_squared_vanishes_in_strong_field():
    m = make_ising([1, 2], [False, False], J=0.5, H=-8.0)
    assert chi_squared_divergence(m) < 1e-4


def test_chi_squared_decreases_with_field_strength():
    values = [
        chi_squared_divergence(make_ising([2, 2], [True, True], J=0.5, H=-h))
        for h in (0.5, 1.0, 1.5, 2.0, 3.0)
    ]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_chi_squared_matches_direct_sum():
    model = make_potts([1, 3], [False, True], q=3, J=0.9, H=1.3)
    p = exact_dual_distribution(model)
    from dualis.dual import dual_factors

    f = dual_factors(model)
    prob = f.gamma / f.gamma.sum(axis=1, keepdims=True)
    total = 0.0
    for idx, rev in enumerate(itertools.product(range(3), repeat=model.topo.n_bonds)):
        # Config index convention: bond 0 is the least significant digit
        # (itertools.product varies its last position fastest).
        x_a = tuple(reversed(rev))
        assert idx == sum(v * 3**k for k, v in enumerate(x_a))
        qx = 1.0
        for k, v in enumerate(x_a):
            qx *= prob[k, v]
        total += p[idx] ** 2 / qx
    assert chi_squared_divergence(model) == pytest.approx(total - 1.0, rel=1e-10)


def test_size_guards():
    big_spin = make_ising([5, 5], [True, True], J=1.0, H=-1.0)
    assert big_spin.topo.n_sites == 25  # 2^25 spins exceeds the guard
    with pytest.raises(SizeGuardError):
        exact_log_Z(big_spin)
    with pytest.raises(SizeGuardError):
        exact_log_Zd(big_spin)  # 2^50 bond assignments
    mid = make_ising([3, 3], [True, True], J=1.0, H=-1.0)  # 2^18 bonds
    with pytest.raises(SizeGuardError):
        exact_dual_distribution(mid)
    with pytest.raises(SizeGuardError):
        chi_squared_divergence(mid)


def test_exact_summary_bundle():
    m = make_potts([2, 2], [True, False], q=3, J=1.1, H=1.4)
    res = exact_summary(m, want_distribution=True, want_chi_squared=True)
    assert res.log_duality_ratio == pytest.approx(2 * 6 * math.log(3.0), rel=1e-10)
    assert res.dual_distribution.sum() == pytest.approx(1.0, abs=1e-12)
    assert res.chi_squared >= 0.0


def test_iter_configs_mixed_radix_order():
    got = np.concatenate(list(iter_configs(3, 3, chunk_size=5)))
    assert got.shape == (27, 3)
    for idx, row in enumerate(got):
        assert idx == sum(int(v) * 3**k for k, v in enumerate(row))


def test_dump_dual_distribution(tmp_path):
    m = make_ising([1, 2], [False, False], J=0.5, H=-1.0)
    path = tmp_path / "p.csv"
    dump_dual_distribution(m, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "config_index,bond_0,probability"
    assert len(lines) == 3
    assert lines[1].startswith("0,0,0.788618775")
